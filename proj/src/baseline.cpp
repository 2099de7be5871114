#include <spdlog/spdlog.h>

#include <chrono>
#include <numbers>

#include "sampler_internal.hpp"
#include "sprp/errors.hpp"
#include "sprp/mcmc.hpp"
#include "sprp/rankselect.hpp"

namespace sprp {

namespace {

constexpr double kJitter = 1e-6;

double site_loglik(double z, double eta, Family family) {
  if (family == Family::Poisson) {
    if (!(eta <= 700.0)) return -std::numeric_limits<double>::infinity();
    return z * eta - std::exp(eta);
  }
  return z * eta - (std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta))));
}

/// Inverse and log-determinant of R(phi) + jitter I.
struct Precision {
  Eigen::MatrixXd inverse;
  double logdet = 0.0;
};

bool precision_at(const Locations& locs, double phi, double nu, Precision& out) {
  Eigen::MatrixXd R = build_corr_matrix(locs, {1.0, phi, nu}).entries;
  R.diagonal().array() += kJitter;
  Eigen::LLT<Eigen::MatrixXd> llt(R);
  if (llt.info() != Eigen::Success) return false;
  out.logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  out.inverse = llt.solve(Eigen::MatrixXd::Identity(R.rows(), R.cols()));
  return true;
}

}  // namespace

Chain run_full_w_chain(const SpatialDataset& data, const ModelSpec& spec, const McmcConfig& config,
                       int chain_index) {
  data.validate();
  config.validate();
  spec.priors.validate();
  if (data.family != Family::Poisson && data.family != Family::BernoulliLogit) {
    throw UsageError("the full-W sampler supports the Poisson and logit families");
  }
  if (data.is_areal()) throw UsageError("the full-W sampler needs point locations");
  const auto start = std::chrono::steady_clock::now();
  const Locations& locs = *data.locations;
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  const PriorSpec& pr = spec.priors;
  const PhiGrid grid{pr.phi_lo, pr.phi_hi, config.phi_grid};
  const std::uint64_t seed = substream_seed(config.seed, static_cast<std::uint64_t>(chain_index));
  Rng rng(seed);

  GlmFit fit = fit_glm_irls(data.response, data.X, data.family);
  Eigen::VectorXd beta = fit.converged ? fit.coef : Eigen::VectorXd::Zero(p);
  Eigen::VectorXd W = Eigen::VectorXd::Zero(n);
  double sigma2 = 2.0;
  double phi = std::clamp(0.15 * max_pairwise_distance(locs), pr.phi_lo, pr.phi_hi);
  if (chain_index > 0) {
    for (Eigen::Index j = 0; j < p; ++j) beta(j) += rng.normal(0.0, 0.5);
    sigma2 = std::clamp(rng.inv_gamma(pr.sigma2_shape, pr.sigma2_scale), 0.1, 10.0);
    phi = pr.phi_lo + (pr.phi_hi - pr.phi_lo) * rng.uniform();
  }
  if (grid.enabled()) phi = grid.snap(phi);
  Precision prec;
  if (!precision_at(locs, phi, spec.nu, prec)) throw Error("initial correlation matrix is singular");
  Eigen::VectorXd eta = data.X * beta + W;
  Eigen::VectorXd g = prec.inverse * W;  // R^{-1} W, kept current
  auto total_loglik = [&](const Eigen::VectorXd& e) {
    return config.prior_only ? 0.0 : conditional_loglik(data.response, e, data.family);
  };
  double ll = total_loglik(eta);

  std::vector<detail::Adapter> beta_ad(p, detail::Adapter(config.scale_beta, 0.44));
  detail::Adapter w_ad(config.scale_delta, 0.44);
  detail::Adapter phi_ad(config.scale_phi, 0.44);
  const int burnin = config.burnin_iterations();

  Chain chain = detail::allocate_chain(data, spec, config, seed, n);
  chain.model.sketch.rank = static_cast<int>(n);
  Eigen::Index row = 0;
  for (int t = 0; t < config.iterations; ++t) {
    const bool adapting = config.adapt && t < burnin;
    const bool counting = t >= burnin;

    for (Eigen::Index j = 0; j < p; ++j) {
      const double sc = beta_ad[j].scale();
      const double prop = beta(j) + sc * rng.normal();
      Eigen::VectorXd e = eta + data.X.col(j) * (prop - beta(j));
      const double l = total_loglik(e);
      const double lr = l - ll - 0.5 * (prop * prop - beta(j) * beta(j)) / pr.beta_var;
      const int acc = detail::accept(lr, rng) ? 1 : 0;
      if (acc) {
        beta(j) = prop;
        eta = std::move(e);
        ll = l;
      }
      if (adapting) beta_ad[j].adapt(acc, t);
      if (counting) beta_ad[j].count(acc, 1);
    }

    // One-variable-at-a-time random-effect sweep.
    int w_acc = 0;
    const double sw = w_ad.scale();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double qii = prec.inverse(i, i);
      const double mu = -(g(i) - qii * W(i)) / qii;
      const double var = sigma2 / qii;
      const double prop = W(i) + sw * rng.normal();
      const double e_new = eta(i) + prop - W(i);
      double lr = -0.5 * ((prop - mu) * (prop - mu) - (W(i) - mu) * (W(i) - mu)) / var;
      if (!config.prior_only) {
        lr += site_loglik(data.response(i), e_new, data.family) -
              site_loglik(data.response(i), eta(i), data.family);
      }
      if (detail::accept(lr, rng)) {
        g += prec.inverse.col(i) * (prop - W(i));
        eta(i) = e_new;
        W(i) = prop;
        ++w_acc;
      }
    }
    ll = total_loglik(eta);
    if (adapting) w_ad.adapt(static_cast<double>(w_acc) / n, t);
    if (counting) w_ad.count(w_acc, static_cast<int>(n));

    const double quad = W.dot(g);
    sigma2 = rng.inv_gamma(pr.sigma2_shape + 0.5 * n, pr.sigma2_scale + 0.5 * quad);

    {
      double prop = phi + phi_ad.scale() * rng.normal();
      if (grid.enabled()) prop = grid.snap(prop);
      int acc = 0;
      if (prop >= pr.phi_lo && prop <= pr.phi_hi) {
        Precision cand;
        if (prop == phi) {
          acc = 1;
        } else if (precision_at(locs, prop, spec.nu, cand)) {
          const Eigen::VectorXd g_new = cand.inverse * W;
          const double lr = -0.5 * (cand.logdet - prec.logdet) - 0.5 * (W.dot(g_new) - quad) / sigma2;
          if (detail::accept(lr, rng)) {
            phi = prop;
            prec = std::move(cand);
            g = g_new;
            acc = 1;
          }
        }
      }
      if (adapting) phi_ad.adapt(acc, t);
      if (counting) phi_ad.count(acc, 1);
    }

    if (detail::store_iteration(config, t) && row < chain.size()) {
      chain.iteration(row) = t + 1;
      chain.beta.row(row) = beta.transpose();
      chain.delta.row(row) = W.transpose();
      chain.sigma2(row) = sigma2;
      chain.phi(row) = phi;
      chain.tau2(row) = detail::kNaN;
      chain.loglik(row) = ll;
      ++row;
    }
  }
  double acc = 0.0;
  long tries = 0;
  for (const auto& a : beta_ad) {
    acc += a.accepts;
    tries += a.tries;
  }
  chain.acceptance["beta"] = tries > 0 ? acc / tries : 0.0;
  chain.acceptance["W"] = w_ad.rate();
  chain.acceptance["phi"] = phi_ad.rate();
  chain.acceptance["sigma2"] = 1.0;
  chain.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return chain;
}

}  // namespace sprp
