#include <spdlog/spdlog.h>

#include <chrono>

#include "sampler_internal.hpp"
#include "sprp/errors.hpp"
#include "sprp/mcmc.hpp"

namespace sprp {

namespace {

/// log density of the latent variables given their mean, up to a constant.
double latent_loglik(const Eigen::VectorXd& latent, const Eigen::VectorXd& eta, double tau2) {
  return -0.5 * (latent - eta).squaredNorm() / tau2 - 0.5 * latent.size() * std::log(tau2);
}

}  // namespace

void draw_probit_latent(ChainState& s, const SpatialDataset& data, Rng& rng, long& violations) {
  const double sd = std::sqrt(s.tau2);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const bool positive = data.response(i) > 0.5;
    const double y = rng.truncated_normal(s.eta(i), sd, positive);
    if (positive ? !(y >= 0.0) : !(y < 0.0)) ++violations;
    s.latent(i) = y;
  }
}

void draw_probit_coefficients(ChainState& s, const SamplerContext& ctx, Rng& rng) {
  const Eigen::MatrixXd& X = ctx.data->X;
  const Eigen::MatrixXd& B = s.basis->B;
  const Eigen::Index p = X.cols();
  const Eigen::Index m = B.cols();
  Eigen::MatrixXd prec(p + m, p + m);
  prec.topLeftCorner(p, p) = X.transpose() * X;
  prec.topRightCorner(p, m) = X.transpose() * B;
  prec.bottomLeftCorner(m, p) = prec.topRightCorner(p, m).transpose();
  prec.bottomRightCorner(m, m) = s.basis->gram;
  prec /= s.tau2;
  Eigen::VectorXd rhs(p + m);
  rhs.head(p) = X.transpose() * s.latent;
  rhs.tail(m) = B.transpose() * s.latent;
  rhs /= s.tau2;
  if (ctx.config.prior_only) {
    prec.setZero();
    rhs.setZero();
  }
  prec.diagonal().head(p).array() += 1.0 / ctx.spec.priors.beta_var;
  prec.diagonal().tail(m).array() += 1.0 / s.sigma2;
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) throw Error("coefficient precision is not positive definite");
  const Eigen::VectorXd draw = llt.solve(rhs) + llt.matrixU().solve(rng.normal_vector(p + m));
  s.beta = draw.head(p);
  s.delta = draw.tail(m);
  s.eta = X * s.beta + B * s.delta;
}

namespace {

int probit_phi_mh(ChainState& s, const SamplerContext& ctx, double scale, Rng& rng) {
  if (!ctx.cache->has_phi()) return 0;
  if (scale <= 0.0) return 1;
  const PriorSpec& pr = ctx.spec.priors;
  double prop = s.phi + scale * rng.normal();
  if (ctx.grid.enabled()) prop = ctx.grid.snap(prop);
  if (prop < pr.phi_lo || prop > pr.phi_hi) return 0;
  if (prop == s.phi) return 1;
  std::shared_ptr<const LinearPredictorBasis> basis;
  try {
    basis = ctx.basis_for(prop, s.sigma2, s.tau2);
  } catch (const Error& e) {
    spdlog::warn("phi proposal {} rejected: {}", prop, e.what());
    return 0;
  }
  Eigen::VectorXd eta = ctx.data->X * s.beta + basis->B * s.delta;
  double log_ratio = 0.0;
  if (!ctx.config.prior_only) {
    log_ratio = latent_loglik(s.latent, eta, s.tau2) - latent_loglik(s.latent, s.eta, s.tau2);
  }
  if (!detail::accept(log_ratio, rng)) return 0;
  s.phi = prop;
  s.basis = std::move(basis);
  s.eta = std::move(eta);
  return 1;
}

}  // namespace

Chain probit_gibbs_chain(const SpatialDataset& data, const ModelSpec& spec,
                         const McmcConfig& config, std::shared_ptr<EigenCache> cache,
                         int chain_index) {
  if (data.family != Family::BernoulliProbit) {
    throw UsageError("probit_gibbs_chain needs a bernoulli-probit dataset");
  }
  if (!spec.nugget) throw ConfigError("probit family requires the nugget term");
  data.validate();
  spec.validate(data);
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  if (!cache) cache = make_cache(data, spec, config.omega_policy);
  const DesignProjector proj(data.X);
  const SamplerContext ctx = make_context(data, proj, cache, spec, config);
  const std::uint64_t seed = substream_seed(config.seed, static_cast<std::uint64_t>(chain_index));
  Rng rng(seed);
  ChainState s = initial_state(ctx, chain_index, rng);
  if (config.fix_tau2) s.tau2 = config.tau2_init;

  const PriorSpec& pr = spec.priors;
  const Eigen::Index n = data.n();
  const auto m = static_cast<double>(spec.rank());
  detail::Adapter phi_ad(config.scale_phi, 0.44);
  const int burnin = config.burnin_iterations();
  Chain chain = detail::allocate_chain(data, spec, config, seed, spec.rank());
  Eigen::Index row = 0;
  long violations = 0;

  for (int t = 0; t < config.iterations; ++t) {
    draw_probit_latent(s, data, rng, violations);
    draw_probit_coefficients(s, ctx, rng);
    if (!config.fix_tau2) {
      const double ss = config.prior_only ? 0.0 : (s.latent - s.eta).squaredNorm();
      const double shape = pr.tau2_shape + (config.prior_only ? 0.0 : 0.5 * n);
      s.tau2 = rng.inv_gamma(shape, pr.tau2_scale + 0.5 * ss);
    }
    s.sigma2 = rng.inv_gamma(pr.sigma2_shape + 0.5 * m, pr.sigma2_scale + 0.5 * s.delta.squaredNorm());
    if (cache->has_phi()) {
      const int pa = probit_phi_mh(s, ctx, phi_ad.scale(), rng);
      if (config.adapt && t < burnin) phi_ad.adapt(pa, t);
      if (t >= burnin) phi_ad.count(pa, 1);
    }
    if (detail::store_iteration(config, t) && row < chain.size()) {
      s.loglik = ctx.loglik(s, s.eta);
      detail::store_state(chain, row++, t + 1, s, true);
    }
  }
  chain.latent_violations = violations;
  chain.acceptance["beta"] = 1.0;
  chain.acceptance["delta"] = 1.0;
  chain.acceptance["sigma2"] = 1.0;
  chain.acceptance["tau2"] = config.fix_tau2 ? 0.0 : 1.0;
  if (cache->has_phi()) chain.acceptance["phi"] = phi_ad.rate();
  chain.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (violations > 0) spdlog::error("{} latent draws violated their truncation", violations);
  return chain;
}

}  // namespace sprp
