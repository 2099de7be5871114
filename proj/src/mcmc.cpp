#include "sprp/mcmc.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include "sprp/errors.hpp"
#include "sprp/rankselect.hpp"
#include "sampler_internal.hpp"

namespace sprp {

using detail::accept;
using detail::Adapter;
using detail::inv_gamma_log_prior;
using detail::kNaN;

namespace {

std::size_t threads_from_env_impl() {
  if (const char* env = std::getenv("SPRP_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Shared pieces of the Gaussian marginal model at the current state.
struct MarginalCore {
  Eigen::LLT<Eigen::MatrixXd> llt;  // of I/sigma2 + B^T B / tau2
};

MarginalCore marginal_core(const LinearPredictorBasis& basis, double sigma2, double tau2) {
  Eigen::MatrixXd core = basis.gram / tau2;
  core.diagonal().array() += 1.0 / sigma2;
  MarginalCore out{Eigen::LLT<Eigen::MatrixXd>(core)};
  if (out.llt.info() != Eigen::Success) throw Error("Woodbury core is not positive definite");
  return out;
}

double marginal_ll(const ChainState& s, const SamplerContext& ctx, double sigma2, double tau2,
                   const LinearPredictorBasis& basis) {
  if (ctx.config.prior_only) return 0.0;
  const Eigen::VectorXd resid = ctx.data->response - ctx.data->X * s.beta;
  return linear_marginal_loglik_resid(resid, sigma2, tau2, basis);
}

bool is_glm(Family f) { return f == Family::Poisson || f == Family::BernoulliLogit; }

/// Log-scale random walk on one variance with an inverse-gamma prior. The
/// caller-supplied `evaluate` returns the log-likelihood at the proposed value
/// and may stash derived quantities that are committed on acceptance.
template <typename Eval, typename Commit>
int log_variance_mh(double& value, double shape, double scale_prior, double step, double current_ll,
                    Rng& rng, Eval evaluate, Commit commit) {
  if (step <= 0.0) return 1;
  const double prop = value * std::exp(step * rng.normal());
  if (!(prop > 0.0) || !std::isfinite(prop)) return 0;
  double ll_prop;
  try {
    ll_prop = evaluate(prop);
  } catch (const Error& e) {
    spdlog::warn("variance proposal rejected: {}", e.what());
    return 0;
  }
  const double log_ratio = ll_prop - current_ll + inv_gamma_log_prior(prop, shape, scale_prior) -
                           inv_gamma_log_prior(value, shape, scale_prior) +
                           std::log(prop / value);
  if (!accept(log_ratio, rng)) return 0;
  value = prop;
  commit(ll_prop);
  return 1;
}

}  // namespace

void McmcConfig::validate() const {
  if (iterations <= 0) throw ConfigError("iterations must be positive");
  if (burnin_iterations() >= iterations) throw ConfigError("burnin must be below iterations");
  if (thin <= 0) throw ConfigError("thin must be positive");
  if (scale_beta < 0 || scale_phi < 0 || scale_delta < 0 || scale_variance < 0) {
    throw ConfigError("proposal scales must be nonnegative");
  }
  if (n_chains <= 0) throw ConfigError("n_chains must be positive");
  if (phi_grid == 1 || phi_grid < 0) throw ConfigError("phi grid needs at least 2 points");
  if (!(tau2_init > 0)) throw ConfigError("tau2_init must be positive");
}

std::vector<std::string> Chain::scalar_names(bool include_delta) const {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < beta.cols(); ++j) names.push_back("beta_" + std::to_string(j + 1));
  if (include_delta) {
    for (Eigen::Index j = 0; j < delta.cols(); ++j) {
      names.push_back("delta_" + std::to_string(j + 1));
    }
  }
  names.push_back("sigma2");
  if (phi.size() > 0 && !phi.array().isNaN().all()) names.push_back("phi");
  if (tau2.size() > 0 && !tau2.array().isNaN().all()) names.push_back("tau2");
  return names;
}

Eigen::MatrixXd Chain::scalar_samples(bool include_delta) const {
  const auto names = scalar_names(include_delta);
  Eigen::MatrixXd out(size(), static_cast<Eigen::Index>(names.size()));
  Eigen::Index c = 0;
  out.leftCols(beta.cols()) = beta;
  c += beta.cols();
  if (include_delta) {
    out.middleCols(c, delta.cols()) = delta;
    c += delta.cols();
  }
  out.col(c++) = sigma2;
  if (phi.size() > 0 && !phi.array().isNaN().all()) out.col(c++) = phi;
  if (tau2.size() > 0 && !tau2.array().isNaN().all()) out.col(c++) = tau2;
  return out;
}

bool SamplerContext::absorbs_nugget() const { return spec.nugget && is_glm(data->family); }

std::shared_ptr<const LinearPredictorBasis> SamplerContext::basis_for(double phi, double sigma2,
                                                                      double tau2) const {
  auto eig = cache->get(phi);
  if (absorbs_nugget()) {
    return std::make_shared<const LinearPredictorBasis>(
        make_nugget_basis(eig, *proj, spec.restricted, sigma2, tau2));
  }
  const double key = cache->has_phi() ? phi : 0.0;
  auto it = basis_cache_.find(key);
  if (it != basis_cache_.end() && it->second->eig == eig) return it->second;
  auto basis = std::make_shared<const LinearPredictorBasis>(make_basis(eig, *proj, spec.restricted));
  if (basis_cache_.size() >= 512) basis_cache_.clear();
  basis_cache_[key] = basis;
  return basis;
}

double SamplerContext::loglik(const ChainState& s, const Eigen::VectorXd& eta) const {
  if (config.prior_only) return 0.0;
  return conditional_loglik(data->response, eta, data->family, s.tau2 > 0 ? s.tau2 : 1.0);
}

SamplerContext make_context(const SpatialDataset& data, const DesignProjector& proj,
                            std::shared_ptr<EigenCache> cache, const ModelSpec& spec,
                            const McmcConfig& config) {
  SamplerContext ctx;
  ctx.data = &data;
  ctx.proj = &proj;
  ctx.cache = std::move(cache);
  ctx.spec = spec;
  ctx.config = config;
  ctx.grid = PhiGrid{spec.priors.phi_lo, spec.priors.phi_hi, config.phi_grid};
  return ctx;
}

std::shared_ptr<EigenCache> make_cache(const SpatialDataset& data, const ModelSpec& spec,
                                       OmegaPolicy policy) {
  if (data.is_areal()) return EigenCache::areal(*data.graph, spec.sketch);
  return std::make_shared<EigenCache>(*data.locations, spec.nu, spec.sketch, policy);
}

ChainState initial_state(const SamplerContext& ctx, int chain_index, Rng& rng) {
  const SpatialDataset& data = *ctx.data;
  const PriorSpec& pr = ctx.spec.priors;
  ChainState s;

  GlmFit fit = fit_glm_irls(data.response, data.X, data.family);
  s.beta = fit.converged && fit.coef.allFinite() ? fit.coef : Eigen::VectorXd::Zero(data.p());
  s.delta = Eigen::VectorXd::Zero(ctx.spec.rank());

  double resid_var = 1.0;
  if (data.family == Family::Gaussian) {
    resid_var = (data.response - data.X * s.beta).squaredNorm() / std::max<Eigen::Index>(1, data.n());
    resid_var = std::max(resid_var, 1e-6);
  }
  s.sigma2 = data.family == Family::Gaussian ? 0.5 * resid_var : 2.0;
  s.tau2 = 0.0;
  if (ctx.spec.nugget) {
    if (data.family == Family::Gaussian) s.tau2 = 0.5 * resid_var;
    else if (data.family == Family::BernoulliProbit) s.tau2 = ctx.config.tau2_init;
    else s.tau2 = 0.1;
  }

  if (ctx.cache->has_phi()) {
    s.phi = std::clamp(0.15 * max_pairwise_distance(*data.locations), pr.phi_lo, pr.phi_hi);
  } else {
    s.phi = kNaN;
  }

  if (chain_index > 0) {
    for (Eigen::Index j = 0; j < s.beta.size(); ++j) {
      s.beta(j) += rng.normal(0.0, std::max(0.5, 0.5 * std::abs(s.beta(j))));
    }
    s.sigma2 = std::clamp(rng.inv_gamma(pr.sigma2_shape, pr.sigma2_scale), 0.1, 10.0);
    if (ctx.cache->has_phi()) s.phi = pr.phi_lo + (pr.phi_hi - pr.phi_lo) * rng.uniform();
    if (ctx.spec.nugget && !(data.family == Family::BernoulliProbit && ctx.config.fix_tau2)) {
      s.tau2 = std::clamp(rng.inv_gamma(pr.tau2_shape, pr.tau2_scale), 0.05, 5.0);
      if (data.family == Family::Gaussian) s.tau2 *= resid_var;
    }
    if (data.family == Family::Gaussian) s.sigma2 *= resid_var;
  }
  if (ctx.grid.enabled() && ctx.cache->has_phi()) s.phi = ctx.grid.snap(s.phi);

  s.basis = ctx.basis_for(s.phi, s.sigma2, s.tau2 > 0 ? s.tau2 : 1.0);
  s.eta = data.X * s.beta + s.basis->B * s.delta;
  if (data.family == Family::BernoulliProbit) {
    s.latent = Eigen::VectorXd::Zero(data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i) s.latent(i) = data.response(i) > 0.5 ? 0.5 : -0.5;
  }
  s.loglik = data.family == Family::Gaussian ? marginal_ll(s, ctx, s.sigma2, s.tau2, *s.basis)
                                             : ctx.loglik(s, s.eta);
  return s;
}

namespace {

/// One coordinate of the beta random walk against the conditional likelihood.
int beta_coordinate_mh(ChainState& s, const SamplerContext& ctx, Eigen::Index j, double sc,
                       Rng& rng, double& current) {
  if (sc <= 0.0) return 1;
  const double prop = s.beta(j) + sc * rng.normal();
  Eigen::VectorXd eta = s.eta + ctx.data->X.col(j) * (prop - s.beta(j));
  const double ll = ctx.loglik(s, eta);
  const double log_ratio =
      ll - current - 0.5 * (prop * prop - s.beta(j) * s.beta(j)) / ctx.spec.priors.beta_var;
  if (!accept(log_ratio, rng)) return 0;
  s.beta(j) = prop;
  s.eta = std::move(eta);
  current = ll;
  return 1;
}

int beta_coordinate_mh(ChainState& s, const SamplerContext& ctx, Eigen::Index j, double sc,
                       Rng& rng) {
  return beta_coordinate_mh(s, ctx, j, sc, rng, s.loglik);
}

}  // namespace

int mh_update_beta(ChainState& s, const SamplerContext& ctx, const Eigen::VectorXd& scales,
                   Rng& rng) {
  // The gaussian chain caches the marginal likelihood; work with the conditional one here.
  const bool gaussian = ctx.data->family == Family::Gaussian;
  double current = gaussian ? ctx.loglik(s, s.eta) : s.loglik;
  int accepted = 0;
  for (Eigen::Index j = 0; j < s.beta.size(); ++j) {
    accepted += beta_coordinate_mh(s, ctx, j, scales(j), rng, current);
  }
  if (!gaussian) s.loglik = current;
  return accepted;
}

int mh_update_delta_block(ChainState& s, const SamplerContext& ctx, double scale, Rng& rng) {
  if (scale <= 0.0) return 1;
  const double prior_var = ctx.absorbs_nugget() ? 1.0 : s.sigma2;
  const Eigen::VectorXd step = scale * rng.normal_vector(s.delta.size());
  const Eigen::VectorXd prop = s.delta + step;
  Eigen::VectorXd eta = s.eta + s.basis->B * step;
  const double ll = ctx.loglik(s, eta);
  const double log_ratio =
      ll - s.loglik - 0.5 * (prop.squaredNorm() - s.delta.squaredNorm()) / prior_var;
  if (!accept(log_ratio, rng)) return 0;
  s.delta = prop;
  s.eta = std::move(eta);
  s.loglik = ll;
  return 1;
}

int mh_update_sigma2(ChainState& s, const SamplerContext& ctx, double scale, Rng& rng) {
  const PriorSpec& pr = ctx.spec.priors;
  const Family family = ctx.data->family;
  if (family == Family::Gaussian) {
    return log_variance_mh(
        s.sigma2, pr.sigma2_shape, pr.sigma2_scale, scale, s.loglik, rng,
        [&](double v) { return marginal_ll(s, ctx, v, s.tau2, *s.basis); },
        [&](double ll) { s.loglik = ll; });
  }
  if (ctx.absorbs_nugget()) {
    std::shared_ptr<const LinearPredictorBasis> basis;
    Eigen::VectorXd eta;
    return log_variance_mh(
        s.sigma2, pr.sigma2_shape, pr.sigma2_scale, scale, s.loglik, rng,
        [&](double v) {
          basis = ctx.basis_for(s.phi, v, s.tau2);
          eta = ctx.data->X * s.beta + basis->B * s.delta;
          return ctx.loglik(s, eta);
        },
        [&](double ll) {
          s.basis = basis;
          s.eta = std::move(eta);
          s.loglik = ll;
        });
  }
  const double m = static_cast<double>(s.delta.size());
  s.sigma2 = rng.inv_gamma(pr.sigma2_shape + 0.5 * m, pr.sigma2_scale + 0.5 * s.delta.squaredNorm());
  return 1;
}

int mh_update_tau2(ChainState& s, const SamplerContext& ctx, double scale, Rng& rng) {
  const PriorSpec& pr = ctx.spec.priors;
  if (!ctx.spec.nugget) return 0;
  if (ctx.data->family == Family::Gaussian) {
    return log_variance_mh(
        s.tau2, pr.tau2_shape, pr.tau2_scale, scale, s.loglik, rng,
        [&](double v) { return marginal_ll(s, ctx, s.sigma2, v, *s.basis); },
        [&](double ll) { s.loglik = ll; });
  }
  if (ctx.absorbs_nugget()) {
    std::shared_ptr<const LinearPredictorBasis> basis;
    Eigen::VectorXd eta;
    return log_variance_mh(
        s.tau2, pr.tau2_shape, pr.tau2_scale, scale, s.loglik, rng,
        [&](double v) {
          basis = ctx.basis_for(s.phi, s.sigma2, v);
          eta = ctx.data->X * s.beta + basis->B * s.delta;
          return ctx.loglik(s, eta);
        },
        [&](double ll) {
          s.basis = basis;
          s.eta = std::move(eta);
          s.loglik = ll;
        });
  }
  return 0;
}

int mh_update_phi(ChainState& s, const SamplerContext& ctx, double scale, Rng& rng) {
  if (!ctx.cache->has_phi()) return 0;
  if (scale <= 0.0) return 1;
  const PriorSpec& pr = ctx.spec.priors;
  double prop = s.phi + scale * rng.normal();
  if (ctx.grid.enabled()) prop = ctx.grid.snap(prop);
  if (prop < pr.phi_lo || prop > pr.phi_hi) return 0;
  if (prop == s.phi) return 1;

  std::shared_ptr<const LinearPredictorBasis> basis;
  try {
    basis = ctx.basis_for(prop, s.sigma2, s.tau2 > 0 ? s.tau2 : 1.0);
  } catch (const Error& e) {
    spdlog::warn("phi proposal {} rejected: {}", prop, e.what());
    return 0;
  }
  if (ctx.data->family == Family::Gaussian) {
    double ll;
    try {
      ll = marginal_ll(s, ctx, s.sigma2, s.tau2, *basis);
    } catch (const Error& e) {
      spdlog::warn("phi proposal {} rejected: {}", prop, e.what());
      return 0;
    }
    if (!accept(ll - s.loglik, rng)) return 0;
    s.phi = prop;
    s.basis = std::move(basis);
    s.eta = ctx.data->X * s.beta + s.basis->B * s.delta;
    s.loglik = ll;
    return 1;
  }
  Eigen::VectorXd eta = ctx.data->X * s.beta + basis->B * s.delta;
  const double ll = ctx.loglik(s, eta);
  if (!accept(ll - s.loglik, rng)) return 0;
  s.phi = prop;
  s.basis = std::move(basis);
  s.eta = std::move(eta);
  s.loglik = ll;
  return 1;
}

void gibbs_update_beta_marginal(ChainState& s, const SamplerContext& ctx, Rng& rng) {
  const Eigen::MatrixXd& X = ctx.data->X;
  const Eigen::VectorXd& y = ctx.data->response;
  const LinearPredictorBasis& basis = *s.basis;
  const double t2 = s.tau2;
  // X^T Sigma^{-1} X and X^T Sigma^{-1} y through Woodbury.
  const MarginalCore core = marginal_core(basis, s.sigma2, t2);
  const Eigen::MatrixXd BtX = basis.B.transpose() * X;
  const Eigen::MatrixXd XtX = X.transpose() * X;
  Eigen::MatrixXd prec = XtX / t2 - BtX.transpose() * core.llt.solve(BtX) / (t2 * t2);
  Eigen::VectorXd rhs;
  if (ctx.config.prior_only) {
    prec.setZero();
    rhs = Eigen::VectorXd::Zero(X.cols());
  } else {
    const Eigen::VectorXd Bty = basis.B.transpose() * y;
    rhs = X.transpose() * y / t2 - BtX.transpose() * core.llt.solve(Bty) / (t2 * t2);
  }
  prec.diagonal().array() += 1.0 / ctx.spec.priors.beta_var;
  prec = 0.5 * (prec + prec.transpose()).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) throw Error("beta conditional precision is not positive definite");
  const Eigen::VectorXd mean = llt.solve(rhs);
  const Eigen::VectorXd z = rng.normal_vector(X.cols());
  s.beta = mean + llt.matrixU().solve(z);
  s.loglik = marginal_ll(s, ctx, s.sigma2, t2, basis);
}

void draw_delta_given_marginal(ChainState& s, const SamplerContext& ctx, Rng& rng) {
  const LinearPredictorBasis& basis = *s.basis;
  const MarginalCore core = marginal_core(basis, s.sigma2, s.tau2);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(basis.rank());
  if (!ctx.config.prior_only) {
    const Eigen::VectorXd resid = ctx.data->response - ctx.data->X * s.beta;
    mean = core.llt.solve(basis.B.transpose() * resid) / s.tau2;
  }
  const Eigen::VectorXd z = rng.normal_vector(basis.rank());
  s.delta = mean + core.llt.matrixU().solve(z);
  s.eta = ctx.data->X * s.beta + basis.B * s.delta;
}

namespace detail {

Chain allocate_chain(const SpatialDataset& data, const ModelSpec& spec, const McmcConfig& config,
                     std::uint64_t seed, Eigen::Index m) {
  Chain chain;
  const Eigen::Index S = config.stored_samples();
  chain.iteration.resize(S);
  chain.beta.resize(S, data.p());
  chain.delta.resize(S, m);
  chain.sigma2.resize(S);
  chain.phi.resize(S);
  chain.tau2.resize(S);
  chain.loglik.resize(S);
  chain.seed = seed;
  chain.model = spec;
  chain.config = config;
  chain.family = data.family;
  return chain;
}

void store_state(Chain& chain, Eigen::Index row, int iteration, const ChainState& s, bool nugget) {
  chain.iteration(row) = iteration;
  chain.beta.row(row) = s.beta.transpose();
  chain.delta.row(row) = s.delta.transpose();
  chain.sigma2(row) = s.sigma2;
  chain.phi(row) = s.phi;
  chain.tau2(row) = nugget ? s.tau2 : kNaN;
  chain.loglik(row) = s.loglik;
}

std::size_t default_threads() { return threads_from_env_impl(); }

}  // namespace detail

Chain run_chain(const SpatialDataset& data, const ModelSpec& spec, const McmcConfig& config,
                std::shared_ptr<EigenCache> cache, int chain_index) {
  data.validate();
  spec.validate(data);
  config.validate();
  if (data.family == Family::BernoulliProbit) {
    return probit_gibbs_chain(data, spec, config, std::move(cache), chain_index);
  }
  const auto start = std::chrono::steady_clock::now();
  if (!cache) cache = make_cache(data, spec, config.omega_policy);
  const DesignProjector proj(data.X);
  const SamplerContext ctx = make_context(data, proj, cache, spec, config);
  const std::uint64_t seed = substream_seed(config.seed, static_cast<std::uint64_t>(chain_index));
  Rng rng(seed);
  ChainState s = initial_state(ctx, chain_index, rng);

  const bool gaussian = data.family == Family::Gaussian;
  const Eigen::Index p = data.p();
  std::vector<Adapter> beta_ad(p, Adapter(config.scale_beta, 0.44));
  Adapter delta_ad(config.scale_delta, 0.234);
  Adapter phi_ad(config.scale_phi, 0.44);
  Adapter sigma_ad(config.scale_variance, 0.44);
  Adapter tau_ad(config.scale_variance, 0.44);

  const int burnin = config.burnin_iterations();
  Chain chain = detail::allocate_chain(data, spec, config, seed, spec.rank());
  Eigen::Index row = 0;
  for (int t = 0; t < config.iterations; ++t) {
    const bool adapting = config.adapt && t < burnin;
    const bool counting = t >= burnin;

    if (gaussian) {
      gibbs_update_beta_marginal(s, ctx, rng);
      const int sa = mh_update_sigma2(s, ctx, sigma_ad.scale(), rng);
      const int ta = mh_update_tau2(s, ctx, tau_ad.scale(), rng);
      if (adapting) {
        sigma_ad.adapt(sa, t);
        tau_ad.adapt(ta, t);
      }
      if (counting) {
        sigma_ad.count(sa, 1);
        tau_ad.count(ta, 1);
      }
    } else {
      for (Eigen::Index j = 0; j < p; ++j) {
        const int acc = beta_coordinate_mh(s, ctx, j, beta_ad[j].scale(), rng);
        if (adapting) beta_ad[j].adapt(acc, t);
        if (counting) beta_ad[j].count(acc, 1);
      }
      const int da = mh_update_delta_block(s, ctx, delta_ad.scale(), rng);
      if (adapting) delta_ad.adapt(da, t);
      if (counting) delta_ad.count(da, 1);
      const int sa = mh_update_sigma2(s, ctx, sigma_ad.scale(), rng);
      if (ctx.absorbs_nugget()) {
        const int ta = mh_update_tau2(s, ctx, tau_ad.scale(), rng);
        if (adapting) {
          sigma_ad.adapt(sa, t);
          tau_ad.adapt(ta, t);
        }
        if (counting) {
          sigma_ad.count(sa, 1);
          tau_ad.count(ta, 1);
        }
      } else if (counting) {
        sigma_ad.count(sa, 1);
      }
    }
    if (cache->has_phi()) {
      const int pa = mh_update_phi(s, ctx, phi_ad.scale(), rng);
      if (adapting) phi_ad.adapt(pa, t);
      if (counting) phi_ad.count(pa, 1);
    }
    if (gaussian) draw_delta_given_marginal(s, ctx, rng);

    if (detail::store_iteration(config, t) && row < chain.size()) {
      detail::store_state(chain, row++, t + 1, s, spec.nugget);
    }
  }

  if (!gaussian) {
    double acc = 0.0;
    long tries = 0;
    for (const auto& a : beta_ad) {
      acc += a.accepts;
      tries += a.tries;
    }
    chain.acceptance["beta"] = tries > 0 ? acc / tries : 0.0;
    chain.acceptance["delta"] = delta_ad.rate();
  }
  chain.acceptance["sigma2"] = sigma_ad.rate();
  if (cache->has_phi()) chain.acceptance["phi"] = phi_ad.rate();
  if (gaussian || ctx.absorbs_nugget()) chain.acceptance["tau2"] = tau_ad.rate();
  chain.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return chain;
}

std::vector<Chain> run_chains(const SpatialDataset& data, const ModelSpec& spec,
                              const McmcConfig& config, std::shared_ptr<EigenCache> cache,
                              int threads) {
  data.validate();
  spec.validate(data);
  config.validate();
  if (!cache) cache = make_cache(data, spec, config.omega_policy);
  const int n = config.n_chains;
  std::vector<Chain> chains(n);
  std::vector<std::exception_ptr> errors(n);
  const std::size_t workers =
      std::min<std::size_t>(n, threads > 0 ? static_cast<std::size_t>(threads) : detail::default_threads());
  std::atomic<int> next{0};
  auto work = [&] {
    for (int c = next++; c < n; c = next++) {
      try {
        chains[c] = run_chain(data, spec, config, cache, c);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return chains;
}

}  // namespace sprp
