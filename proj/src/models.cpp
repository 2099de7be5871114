#include "sprp/models.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>

#include "sprp/errors.hpp"
#include "sprp/rng.hpp"

namespace sprp {

std::string to_string(Family f) {
  switch (f) {
    case Family::Gaussian: return "gaussian";
    case Family::Poisson: return "poisson";
    case Family::BernoulliLogit: return "bernoulli-logit";
    case Family::BernoulliProbit: return "bernoulli-probit";
  }
  return "unknown";
}

Family family_from_string(const std::string& name) {
  if (name == "gaussian" || name == "linear") return Family::Gaussian;
  if (name == "poisson") return Family::Poisson;
  if (name == "bernoulli-logit" || name == "logit" || name == "binary") return Family::BernoulliLogit;
  if (name == "bernoulli-probit" || name == "probit") return Family::BernoulliProbit;
  throw ConfigError("unknown family '" + name + "'");
}

void SpatialDataset::validate() const {
  const Eigen::Index rows = X.rows();
  if (rows == 0) throw IngestionError("dataset has no rows");
  if (response.size() != rows) throw IngestionError("response length differs from covariate rows");
  if (locations && locations->rows() != rows) {
    throw IngestionError("location rows differ from covariate rows");
  }
  if (graph) {
    if (graph->size() != rows) throw IngestionError("adjacency size differs from dataset rows");
    graph->validate();
  }
  if (!locations && !graph) throw IngestionError("dataset needs locations or an adjacency graph");
  if (locations && (locations->cols() < 2 || locations->cols() > 3)) {
    throw IngestionError("locations must have 2 or 3 coordinates");
  }
  if (!X.allFinite()) throw IngestionError("covariates contain non-finite values");
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double z = response(i);
    if (!std::isfinite(z)) {
      throw IngestionError("response row " + std::to_string(i + 1) + " is not finite");
    }
    if (family == Family::Poisson && (z < 0.0 || z != std::floor(z))) {
      throw IngestionError("Poisson response row " + std::to_string(i + 1) +
                           " is not a nonnegative integer");
    }
    if ((family == Family::BernoulliLogit || family == Family::BernoulliProbit) && z != 0.0 &&
        z != 1.0) {
      throw IngestionError("binary response row " + std::to_string(i + 1) + " is not 0/1");
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < X.cols()) throw DesignError("covariate matrix X is not of full column rank");
}

void PriorSpec::validate() const {
  if (!(beta_var > 0) || !(sigma2_shape > 0) || !(sigma2_scale > 0) || !(tau2_shape > 0) ||
      !(tau2_scale > 0)) {
    throw ConfigError("prior hyperparameters must be positive");
  }
  if (!(phi_lo > 0) || !(phi_lo < phi_hi)) throw ConfigError("phi prior bounds must be 0 < lo < hi");
}

void ModelSpec::validate(const SpatialDataset& data) const {
  priors.validate();
  sketch.validate(data.n());
  if (!(nu > 0)) throw ConfigError("smoothness nu must be positive");
  if (restricted && rank() > data.n() - data.p()) {
    throw ConfigError("restricted model needs rank <= n - p");
  }
  if (data.family == Family::Gaussian && !nugget) {
    throw ConfigError("gaussian family requires the nugget term");
  }
  if (data.family == Family::BernoulliProbit && !nugget) {
    throw ConfigError("probit family requires the nugget term");
  }
}

DesignProjector::DesignProjector(const Eigen::MatrixXd& X) : X_(X) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_check(X);
  if (rank_check.rank() < p) throw DesignError("covariate matrix X is not of full column rank");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
  q_ = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
  r_ = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
}

Eigen::MatrixXd DesignProjector::complement(const Eigen::MatrixXd& M) const {
  if (M.rows() != q_.rows()) throw ConfigError("row mismatch in projection");
  return M - q_ * (q_.transpose() * M);
}

Eigen::MatrixXd DesignProjector::coefficients(const Eigen::MatrixXd& M) const {
  if (M.rows() != q_.rows()) throw ConfigError("row mismatch in projection");
  return r_.triangularView<Eigen::Upper>().solve(q_.transpose() * M);
}

Eigen::MatrixXd ortho_complement_apply(const Eigen::MatrixXd& X, const Eigen::MatrixXd& M) {
  return DesignProjector(X).complement(M);
}

namespace {

LinearPredictorBasis finish_basis(std::shared_ptr<const EigenApprox> eig, Eigen::MatrixXd full,
                                  const DesignProjector& proj, bool restricted) {
  LinearPredictorBasis out;
  out.restricted = restricted;
  out.eig = std::move(eig);
  out.B = restricted ? proj.complement(full) : full;
  out.unprojected = std::move(full);
  out.gram = out.B.transpose() * out.B;
  return out;
}

}  // namespace

LinearPredictorBasis make_basis(std::shared_ptr<const EigenApprox> eig, const DesignProjector& proj,
                                bool restricted) {
  if (eig->n() != proj.X().rows()) throw ConfigError("eigenbasis and design row counts differ");
  Eigen::MatrixXd full = eig->vectors * eig->values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  return finish_basis(std::move(eig), std::move(full), proj, restricted);
}

LinearPredictorBasis make_basis(const EigenApprox& eig, const Eigen::MatrixXd& X, bool restricted) {
  return make_basis(std::make_shared<const EigenApprox>(eig), DesignProjector(X), restricted);
}

LinearPredictorBasis make_nugget_basis(std::shared_ptr<const EigenApprox> eig,
                                       const DesignProjector& proj, bool restricted, double sigma2,
                                       double tau2) {
  if (!(sigma2 > 0) || !(tau2 > 0)) throw DomainError("variances must be positive");
  const Eigen::VectorXd scale = (sigma2 * eig->values.cwiseMax(0.0).array() + tau2).sqrt().matrix();
  Eigen::MatrixXd full = eig->vectors * scale.asDiagonal();
  return finish_basis(std::move(eig), std::move(full), proj, restricted);
}

namespace {

std::atomic<int> overflow_warnings{0};

}  // namespace

double conditional_loglik(const Eigen::VectorXd& response, const Eigen::VectorXd& eta, Family family,
                          double tau2) {
  const Eigen::Index n = response.size();
  if (eta.size() != n) throw ConfigError("linear predictor length mismatch");
  double total = 0.0;
  switch (family) {
    case Family::Poisson:
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!(eta(i) <= 700.0)) {
          if (overflow_warnings.fetch_add(1) < 5) {
            spdlog::warn("Poisson log-mean {} overflows; treating proposal as invalid", eta(i));
          }
          return -std::numeric_limits<double>::infinity();
        }
        total += response(i) * eta(i) - std::exp(eta(i)) - std::lgamma(response(i) + 1.0);
      }
      return total;
    case Family::BernoulliLogit:
      for (Eigen::Index i = 0; i < n; ++i) {
        const double e = eta(i);
        const double log1pexp = std::max(e, 0.0) + std::log1p(std::exp(-std::abs(e)));
        total += response(i) * e - log1pexp;
      }
      return total;
    case Family::BernoulliProbit: {
      const double sd = std::sqrt(tau2);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double s = eta(i) / sd;
        total += response(i) > 0.5 ? log_normal_cdf(s) : log_normal_cdf(-s);
      }
      return total;
    }
    case Family::Gaussian: {
      if (!(tau2 > 0)) throw DomainError("tau2 must be positive");
      const double ss = (response - eta).squaredNorm();
      return -0.5 * (n * std::log(2.0 * std::numbers::pi * tau2) + ss / tau2);
    }
  }
  return total;
}

double glmm_loglik(const Eigen::VectorXd& response, const Eigen::MatrixXd& X,
                   const Eigen::MatrixXd& B, const Eigen::VectorXd& beta,
                   const Eigen::VectorXd& delta, Family family) {
  if (family != Family::Poisson && family != Family::BernoulliLogit) {
    throw UsageError("glmm_loglik supports the Poisson and logit families");
  }
  const Eigen::VectorXd eta = X * beta + B * delta;
  return conditional_loglik(response, eta, family);
}

double linear_marginal_loglik_resid(const Eigen::VectorXd& resid, double sigma2, double tau2,
                                    const LinearPredictorBasis& basis) {
  if (!(sigma2 > 0) || !(tau2 > 0)) throw DomainError("variances must be positive");
  const Eigen::Index n = resid.size();
  const Eigen::Index m = basis.B.cols();
  // Sigma = tau2 I + sigma2 B B^T
  // Sigma^{-1} = I/tau2 - B (I/sigma2 + G/tau2)^{-1} B^T / tau2^2
  // |Sigma| = tau2^n sigma2^m |I/sigma2 + G/tau2|
  const Eigen::VectorXd b = basis.B.transpose() * resid;
  double logdet_core = 0.0;
  double quad_core = 0.0;
  if (!basis.restricted) {
    // U orthonormal: G = D is diagonal.
    for (Eigen::Index j = 0; j < m; ++j) {
      const double c = 1.0 / sigma2 + basis.gram(j, j) / tau2;
      logdet_core += std::log(c);
      quad_core += b(j) * b(j) / c;
    }
  } else {
    Eigen::MatrixXd core = basis.gram / tau2;
    core.diagonal().array() += 1.0 / sigma2;
    Eigen::LLT<Eigen::MatrixXd> llt(core);
    if (llt.info() != Eigen::Success) throw Error("Woodbury core is not positive definite");
    logdet_core = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const Eigen::VectorXd w = llt.matrixL().solve(b);
    quad_core = w.squaredNorm();
  }
  const double logdet = n * std::log(tau2) + m * std::log(sigma2) + logdet_core;
  const double quad = resid.squaredNorm() / tau2 - quad_core / (tau2 * tau2);
  return -0.5 * (n * std::log(2.0 * std::numbers::pi) + logdet + quad);
}

double linear_marginal_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& beta, double sigma2, double tau2,
                              const LinearPredictorBasis& basis) {
  return linear_marginal_loglik_resid(y - X * beta, sigma2, tau2, basis);
}

Eigen::VectorXd reconstruct_W(const Eigen::MatrixXd& B_frp, const Eigen::VectorXd& delta) {
  return B_frp * delta;
}

double inverse_link(double eta, Family family, double tau2) {
  switch (family) {
    case Family::Gaussian: return eta;
    case Family::Poisson: return std::exp(eta);
    case Family::BernoulliLogit: return 1.0 / (1.0 + std::exp(-eta));
    case Family::BernoulliProbit: return normal_cdf(eta / std::sqrt(tau2));
  }
  return eta;
}

}  // namespace sprp
