#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace sprp {

struct EssResult {
  double value = 0.0;
  bool constant = false;  ///< the path has zero variance; value is 0
};

/// Effective sample size by Geyer's initial monotone sequence estimator,
/// capped at the path length. Needs at least 100 draws.
EssResult ess(const Eigen::VectorXd& path);

/// Autocovariances at lags 0..max_lag (divisor N), computed via FFT.
Eigen::VectorXd autocovariance(const Eigen::VectorXd& path, Eigen::Index max_lag);

/// Batch-means Monte Carlo standard error of the path mean, batch size floor(sqrt(N)).
double batch_means_se(const Eigen::VectorXd& path);

struct SeCheck {
  std::string name;
  double se = 0.0;
  bool pass = false;  ///< se strictly below the threshold
};

std::vector<SeCheck> mcmc_se_check(const std::vector<std::string>& names,
                                   const Eigen::MatrixXd& samples, double threshold = 0.02);

/// Largest |correlation| between two distinct columns of `samples`.
double max_abs_cross_correlation(const Eigen::MatrixXd& samples);

/// Equal-tail quantile with linear interpolation (type 7).
double quantile(Eigen::VectorXd values, double prob);

}  // namespace sprp
