#include "sprp/rankselect.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sprp/errors.hpp"
#include "sprp/rng.hpp"

namespace sprp {

namespace {

double saturated_loglik(const Eigen::VectorXd& y, Family family) {
  if (family != Family::Poisson) return 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) > 0) total += y(i) * std::log(y(i)) - y(i);
    total -= std::lgamma(y(i) + 1.0);
  }
  return total;
}

double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

GlmFit fit_glm_irls(const Eigen::VectorXd& response, const Eigen::MatrixXd& X, Family family,
                    int max_iter, double tol) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (response.size() != n) throw ConfigError("response length differs from design rows");
  GlmFit out;
  out.coef = Eigen::VectorXd::Zero(p);

  if (family == Family::Gaussian) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < p) throw DesignError("design matrix is not of full column rank");
    out.coef = qr.solve(response);
    const double rss = (response - X * out.coef).squaredNorm();
    const double s2 = std::max(rss / n, std::numeric_limits<double>::min());
    out.loglik = -0.5 * n * (std::log(2.0 * std::numbers::pi * s2) + 1.0);
    out.deviance = rss;
    out.converged = true;
    out.iterations = 1;
    return out;
  }

  // Starting linear predictor from the data, as in standard GLM software.
  Eigen::VectorXd eta(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = response(i);
    if (family == Family::Poisson) {
      eta(i) = std::log(y + 0.5);
    } else {
      const double mu = (y + 0.5) / 2.0;
      eta(i) = family == Family::BernoulliLogit ? std::log(mu / (1.0 - mu))
                                                : (y > 0.5 ? 0.6744897501960817 : -0.6744897501960817);
    }
  }

  Eigen::VectorXd z(n);
  Eigen::VectorXd w(n);
  bool first = true;
  for (int it = 1; it <= max_iter; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = eta(i);
      const double y = response(i);
      switch (family) {
        case Family::Poisson: {
          const double mu = std::exp(std::min(e, 700.0));
          w(i) = mu;
          z(i) = e + (y - mu) / mu;
          break;
        }
        case Family::BernoulliLogit: {
          const double mu = 1.0 / (1.0 + std::exp(-e));
          const double v = std::max(mu * (1.0 - mu), 1e-300);
          w(i) = v;
          z(i) = e + (y - mu) / v;
          break;
        }
        default: {
          const double mu = std::clamp(normal_cdf(e), 1e-300, 1.0 - 1e-16);
          const double dens = std::max(std_normal_pdf(e), 1e-300);
          w(i) = dens * dens / (mu * (1.0 - mu));
          z(i) = e + (y - mu) / dens;
          break;
        }
      }
    }
    const Eigen::VectorXd sw = w.cwiseSqrt();
    const Eigen::MatrixXd Xw = sw.asDiagonal() * X;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
    if (qr.rank() < p) {
      out.iterations = it;
      out.converged = false;
      break;
    }
    const Eigen::VectorXd beta = qr.solve(sw.cwiseProduct(z));
    if (!beta.allFinite()) {
      out.iterations = it;
      out.converged = false;
      break;
    }
    const double change = (beta - out.coef).norm() / std::max(beta.norm(), 1.0);
    out.coef = beta;
    eta = X * beta;
    out.iterations = it;
    if (!first && change < tol) {
      out.converged = true;
      break;
    }
    first = false;
  }
  // Separation drives fitted probabilities to 0/1 with diverging coefficients.
  if (out.converged && family != Family::Poisson && eta.cwiseAbs().maxCoeff() > 30.0) {
    out.converged = false;
  }
  out.loglik = conditional_loglik(response, X * out.coef, family);
  out.deviance = 2.0 * (saturated_loglik(response, family) - out.loglik);
  return out;
}

std::vector<int> default_candidate_ranks(Eigen::Index n, Eigen::Index p) {
  std::vector<int> out;
  for (int m : {10, 20, 30, 40, 50, 75, 100}) {
    if (m >= 1 && m <= n - p) out.push_back(m);
  }
  return out;
}

RankSelectionReport select_rank(const SpatialDataset& data, const RankSelectOptions& options) {
  data.validate();
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  RankSelectionReport report;
  report.family = data.family;
  report.candidates = options.candidates.empty() ? default_candidate_ranks(n, p) : options.candidates;
  if (report.candidates.empty()) throw ConfigError("no admissible candidate ranks");
  for (std::size_t i = 0; i < report.candidates.size(); ++i) {
    const int m = report.candidates[i];
    if (m < 1 || m > n - p) throw ConfigError("candidate rank " + std::to_string(m) + " outside [1, n - p]");
    if (i > 0 && m <= report.candidates[i - 1]) throw ConfigError("candidate ranks must increase strictly");
  }
  const int max_rank = report.candidates.back();

  Eigen::MatrixXd cov;
  if (data.is_areal()) {
    cov = generalized_inverse(icar_precision(*data.graph));
    report.phi0 = std::numeric_limits<double>::quiet_NaN();
  } else {
    report.phi0 = options.phi0.value_or(0.5 * max_pairwise_distance(*data.locations));
    cov = build_corr_matrix(*data.locations, {1.0, report.phi0, options.nu}).entries;
  }
  report.exact_basis = n <= options.exact_threshold;
  EigenApprox eig;
  if (report.exact_basis) {
    eig = exact_eigs(cov, max_rank);
  } else {
    SketchConfig sk;
    sk.rank = max_rank;
    sk.oversample = std::min<int>(max_rank, static_cast<int>(n) - max_rank);
    sk.seed = options.sketch_seed;
    eig = approx_eigs(cov, sk);
  }
  const Eigen::MatrixXd synthetic = eig.vectors * eig.values.cwiseMax(0.0).cwiseSqrt().asDiagonal();

  const double log_n = std::log(static_cast<double>(n));
  for (int m : report.candidates) {
    Eigen::MatrixXd design(n, p + m);
    design << data.X, synthetic.leftCols(m);
    GlmFit fit;
    try {
      fit = fit_glm_irls(data.response, design, data.family);
    } catch (const DesignError&) {
      fit.converged = false;
    }
    report.converged.push_back(fit.converged);
    report.loglik.push_back(fit.converged ? fit.loglik : std::numeric_limits<double>::quiet_NaN());
    report.bic.push_back(fit.converged ? -2.0 * fit.loglik + (p + m) * log_n
                                       : std::numeric_limits<double>::infinity());
    if (!fit.converged) spdlog::warn("GLM fit at rank {} did not converge", m);
  }
  const auto best = std::min_element(report.bic.begin(), report.bic.end());
  if (!std::isfinite(*best)) throw Error("rank selection failed: no candidate GLM converged");
  report.chosen_rank = report.candidates[static_cast<std::size_t>(best - report.bic.begin())];
  return report;
}

std::string to_string(RankAdvice a) { return a == RankAdvice::Increase ? "increase" : "keep"; }

RankAdvice confirm_rank(double dic_current, double dic_larger, double margin) {
  return dic_current - dic_larger > margin ? RankAdvice::Increase : RankAdvice::Keep;
}

RankConfirmation confirm_rank(const SpatialDataset& data, const ModelSpec& spec,
                              const McmcConfig& config, int rank, int step, double margin) {
  if (step <= 0) throw ConfigError("rank step must be positive");
  RankConfirmation out;
  out.rank = rank;
  out.larger_rank = rank + step;
  auto fit_dic = [&](int m) {
    ModelSpec s = spec;
    s.sketch.rank = m;
    if (s.sketch.oversample >= 0) {
      s.sketch.oversample = std::min<int>(s.sketch.oversample, static_cast<int>(data.n()) - m);
    } else if (2 * m > data.n()) {
      s.sketch.oversample = static_cast<int>(data.n()) - m;
    }
    auto cache = make_cache(data, s, config.omega_policy);
    const Chain chain = run_chain(data, s, config, cache, 0);
    return dic(chain, data, *cache).dic;
  };
  out.dic_current = fit_dic(rank);
  out.dic_larger = fit_dic(out.larger_rank);
  out.advice = confirm_rank(out.dic_current, out.dic_larger, margin);
  return out;
}

}  // namespace sprp
