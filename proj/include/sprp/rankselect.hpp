#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "sprp/mcmc.hpp"
#include "sprp/models.hpp"

namespace sprp {

struct GlmFit {
  Eigen::VectorXd coef;
  double loglik = 0.0;  ///< maximised log-likelihood (gaussian: at the MLE of the variance)
  double deviance = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Iteratively reweighted least squares for the canonical GLMs (probit uses
/// Fisher scoring). Stops when the relative coefficient change drops below
/// `tol` or after `max_iter` iterations.
GlmFit fit_glm_irls(const Eigen::VectorXd& response, const Eigen::MatrixXd& X, Family family,
                    int max_iter = 50, double tol = 1e-8);

struct RankSelectionReport {
  std::vector<int> candidates;
  std::vector<double> bic;         ///< +inf where the fit did not converge
  std::vector<double> loglik;
  std::vector<bool> converged;
  int chosen_rank = 0;
  double phi0 = 0.0;
  Family family = Family::Gaussian;
  bool exact_basis = true;
};

/// Default candidate grid intersected with [1, n - p].
std::vector<int> default_candidate_ranks(Eigen::Index n, Eigen::Index p);

struct RankSelectOptions {
  std::optional<double> phi0;  ///< defaults to half the maximum pairwise distance
  std::vector<int> candidates;  ///< empty selects the default grid
  double nu = 2.5;
  Eigen::Index exact_threshold = 1500;
  std::uint64_t sketch_seed = 1;
};

/// BIC = -2 loglik + (p + m) log n over GLMs with X and the first m synthetic
/// columns U_m D_m^{1/2} of R(phi0) (or of the ICAR covariance for areal data).
RankSelectionReport select_rank(const SpatialDataset& data, const RankSelectOptions& options = {});

enum class RankAdvice { Keep, Increase };

std::string to_string(RankAdvice a);

/// Increase only when the larger rank lowers DIC by more than `margin`.
RankAdvice confirm_rank(double dic_current, double dic_larger, double margin = 10.0);

struct RankConfirmation {
  RankAdvice advice = RankAdvice::Keep;
  int rank = 0;
  int larger_rank = 0;
  double dic_current = 0.0;
  double dic_larger = 0.0;
};

/// Fits chains at `rank` and `rank + step` and compares their DIC.
RankConfirmation confirm_rank(const SpatialDataset& data, const ModelSpec& spec,
                              const McmcConfig& config, int rank, int step,
                              double margin = 10.0);

}  // namespace sprp
