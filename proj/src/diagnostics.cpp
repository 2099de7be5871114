#include "sprp/diagnostics.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>

#include "sprp/errors.hpp"

namespace sprp {

Eigen::VectorXd autocovariance(const Eigen::VectorXd& path, Eigen::Index max_lag) {
  const Eigen::Index n = path.size();
  max_lag = std::min(max_lag, n - 1);
  Eigen::Index len = 1;
  while (len < 2 * n) len <<= 1;
  std::vector<double> padded(len, 0.0);
  const double mean = path.mean();
  for (Eigen::Index i = 0; i < n; ++i) padded[i] = path(i) - mean;

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, padded);
  for (auto& f : freq) f = std::complex<double>(std::norm(f), 0.0);
  std::vector<double> acov;
  fft.inv(acov, freq);

  Eigen::VectorXd out(max_lag + 1);
  for (Eigen::Index k = 0; k <= max_lag; ++k) out(k) = acov[k] / static_cast<double>(n);
  return out;
}

EssResult ess(const Eigen::VectorXd& path) {
  const Eigen::Index n = path.size();
  if (n < 100) throw ConfigError("ESS needs at least 100 draws");
  const double scale = path.cwiseAbs().maxCoeff();
  const double var = (path.array() - path.mean()).square().mean();
  if (!(var > 1e-28 * std::max(1.0, scale * scale))) return {0.0, true};

  const Eigen::VectorXd gamma = autocovariance(path, n - 1);
  // Initial positive sequence of pair sums, made monotone.
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; 2 * j + 1 < n; ++j) {
    double pair = (gamma(2 * j) + gamma(2 * j + 1)) / gamma(0);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1e-12);
  return {std::min(static_cast<double>(n), n / tau), false};
}

double batch_means_se(const Eigen::VectorXd& path) {
  const Eigen::Index n = path.size();
  if (n < 4) throw ConfigError("batch means need at least 4 draws");
  const Eigen::Index b = static_cast<Eigen::Index>(std::floor(std::sqrt(static_cast<double>(n))));
  const Eigen::Index a = n / b;
  const double mean = path.head(a * b).mean();
  double ss = 0.0;
  for (Eigen::Index j = 0; j < a; ++j) {
    const double d = path.segment(j * b, b).mean() - mean;
    ss += d * d;
  }
  const double sigma2 = b * ss / static_cast<double>(a - 1);
  return std::sqrt(sigma2 / static_cast<double>(a * b));
}

std::vector<SeCheck> mcmc_se_check(const std::vector<std::string>& names,
                                   const Eigen::MatrixXd& samples, double threshold) {
  if (static_cast<Eigen::Index>(names.size()) != samples.cols()) {
    throw ConfigError("one name per sample column is required");
  }
  std::vector<SeCheck> out;
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    const double se = batch_means_se(samples.col(j));
    out.push_back({names[j], se, se < threshold});
  }
  return out;
}

double max_abs_cross_correlation(const Eigen::MatrixXd& samples) {
  const Eigen::Index s = samples.rows();
  if (s < 2) return 0.0;
  const Eigen::MatrixXd centered = samples.rowwise() - samples.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(s - 1);
  double best = 0.0;
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < cov.cols(); ++j) {
      const double d = std::sqrt(cov(i, i) * cov(j, j));
      if (d > 0) best = std::max(best, std::abs(cov(i, j) / d));
    }
  }
  return best;
}

double quantile(Eigen::VectorXd values, double prob) {
  const Eigen::Index n = values.size();
  if (n == 0) throw ConfigError("quantile of an empty sample");
  std::sort(values.data(), values.data() + n);
  const double h = (n - 1) * prob;
  const auto lo = static_cast<Eigen::Index>(std::floor(h));
  const auto hi = std::min(lo + 1, n - 1);
  return values(lo) + (h - lo) * (values(hi) - values(lo));
}

}  // namespace sprp
