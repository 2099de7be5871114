#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sprp/covariance.hpp"
#include "sprp/randproj.hpp"

namespace sprp {

enum class Family { Gaussian, Poisson, BernoulliLogit, BernoulliProbit };

std::string to_string(Family f);
Family family_from_string(const std::string& name);

/// Observed data: point locations or an areal graph, covariates, response.
struct SpatialDataset {
  std::optional<Locations> locations;
  std::optional<ArealGraph> graph;
  Eigen::MatrixXd X;
  Eigen::VectorXd response;
  Family family = Family::Gaussian;
  std::vector<std::string> unit_ids;  ///< areal unit labels, row-aligned

  bool is_areal() const { return graph.has_value(); }
  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
  /// Throws IngestionError / DesignError on any violated invariant.
  void validate() const;
};

struct PriorSpec {
  double beta_var = 100.0;
  double sigma2_shape = 2.0;
  double sigma2_scale = 2.0;
  double tau2_shape = 2.0;
  double tau2_scale = 1.0;
  double phi_lo = 0.01;
  double phi_hi = 1.5;

  void validate() const;
};

struct ModelSpec {
  bool restricted = false;
  SketchConfig sketch;
  PriorSpec priors;
  bool nugget = false;
  double nu = 2.5;

  int rank() const { return sketch.rank; }
  void validate(const SpatialDataset& data) const;
};

/// QR factorisation of the design, computed once and reused for P_[X]
/// and (X^T X)^{-1} X^T products.
class DesignProjector {
 public:
  explicit DesignProjector(const Eigen::MatrixXd& X);

  /// M - X (X^T X)^{-1} X^T M.
  Eigen::MatrixXd complement(const Eigen::MatrixXd& M) const;
  /// (X^T X)^{-1} X^T M via the triangular factor.
  Eigen::MatrixXd coefficients(const Eigen::MatrixXd& M) const;
  const Eigen::MatrixXd& X() const { return X_; }

 private:
  Eigen::MatrixXd X_;
  Eigen::MatrixXd q_;  // n x p, orthonormal columns
  Eigen::MatrixXd r_;  // p x p upper triangular
};

Eigen::MatrixXd ortho_complement_apply(const Eigen::MatrixXd& X, const Eigen::MatrixXd& M);

/// Synthetic spatial covariates B (n x m) entering eta = X beta + B delta.
struct LinearPredictorBasis {
  Eigen::MatrixXd B;            ///< U D^{1/2}, or P_perp U D^{1/2} when restricted
  Eigen::MatrixXd unprojected;  ///< U D^{1/2} in both cases
  Eigen::MatrixXd gram;         ///< B^T B
  std::shared_ptr<const EigenApprox> eig;
  bool restricted = false;

  int rank() const { return static_cast<int>(B.cols()); }
};

/// The eigencomponents are always those of the correlation matrix; projection
/// (RRP) is applied afterwards.
LinearPredictorBasis make_basis(std::shared_ptr<const EigenApprox> eig, const DesignProjector& proj,
                                bool restricted);
LinearPredictorBasis make_basis(const EigenApprox& eig, const Eigen::MatrixXd& X, bool restricted);

/// Basis with the nugget absorbed: U (sigma2 D + tau2 I)^{1/2}, paired with
/// delta ~ N(0, I).
LinearPredictorBasis make_nugget_basis(std::shared_ptr<const EigenApprox> eig,
                                       const DesignProjector& proj, bool restricted, double sigma2,
                                       double tau2);

/// Sum of log f(z_i | eta_i). Gaussian and probit use tau2 as the
/// observation-noise variance; Poisson and logit ignore it. Poisson
/// predictors above 700 give -infinity.
double conditional_loglik(const Eigen::VectorXd& response, const Eigen::VectorXd& eta, Family family,
                          double tau2 = 1.0);

/// log-likelihood of a Poisson or logit GLMM at eta = X beta + B delta.
double glmm_loglik(const Eigen::VectorXd& response, const Eigen::MatrixXd& X,
                   const Eigen::MatrixXd& B, const Eigen::VectorXd& beta,
                   const Eigen::VectorXd& delta, Family family);

/// log N(Y; X beta, sigma2 B B^T + tau2 I) through Woodbury and the matrix
/// determinant lemma; only an m x m system is factorised.
double linear_marginal_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& beta, double sigma2, double tau2,
                              const LinearPredictorBasis& basis);

/// Same, but the caller supplies r = Y - X beta.
double linear_marginal_loglik_resid(const Eigen::VectorXd& resid, double sigma2, double tau2,
                                    const LinearPredictorBasis& basis);

Eigen::VectorXd reconstruct_W(const Eigen::MatrixXd& B_frp, const Eigen::VectorXd& delta);

/// Mean response for a linear predictor value.
double inverse_link(double eta, Family family, double tau2 = 1.0);

}  // namespace sprp
