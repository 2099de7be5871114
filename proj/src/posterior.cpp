#include <algorithm>
#include <cmath>
#include <map>

#include "sampler_internal.hpp"
#include "sprp/diagnostics.hpp"
#include "sprp/errors.hpp"
#include "sprp/mcmc.hpp"

namespace sprp {

namespace {

bool chain_absorbs_nugget(const Chain& chain) {
  return chain.model.nugget &&
         (chain.family == Family::Poisson || chain.family == Family::BernoulliLogit);
}

/// Column scaling of U giving the unprojected basis for sample k.
Eigen::VectorXd basis_scale(const Chain& chain, Eigen::Index k, const EigenApprox& eig) {
  const Eigen::ArrayXd d = eig.values.cwiseMax(0.0).array();
  if (chain_absorbs_nugget(chain)) return (chain.sigma2(k) * d + chain.tau2(k)).sqrt().matrix();
  return d.sqrt().matrix();
}

void check_chain_matches(const Chain& chain, const SpatialDataset& data) {
  if (chain.beta.cols() != data.p()) throw UsageError("chain and dataset covariate counts differ");
  if (chain.family != data.family) throw UsageError("chain and dataset families differ");
}

std::shared_ptr<const EigenApprox> eig_for(const Chain& chain, Eigen::Index k, EigenCache& cache) {
  auto eig = cache.get(chain.phi(k));
  if (eig->rank() != chain.delta.cols()) throw UsageError("chain rank does not match the eigen cache");
  return eig;
}

double tau2_at(const Chain& chain, Eigen::Index k) {
  return chain.tau2.size() > k && !std::isnan(chain.tau2(k)) ? chain.tau2(k) : 1.0;
}

std::vector<Eigen::Index> thinned_indices(Eigen::Index total, int max_samples) {
  std::vector<Eigen::Index> idx;
  if (total <= 0) return idx;
  const Eigen::Index S = max_samples > 0 ? std::min<Eigen::Index>(total, max_samples) : total;
  for (Eigen::Index j = 0; j < S; ++j) idx.push_back(j * total / S);
  return idx;
}

}  // namespace

const ParamSummary& PosteriorSummary::at(const std::string& name) const {
  for (const auto& p : params) {
    if (p.name == name) return p;
  }
  throw UsageError("no parameter named '" + name + "' in summary");
}

PosteriorSummary summarize(const std::vector<std::string>& names, const Eigen::MatrixXd& samples,
                           bool adjusted) {
  if (static_cast<Eigen::Index>(names.size()) != samples.cols()) {
    throw ConfigError("one name per sample column is required");
  }
  PosteriorSummary out;
  out.adjusted = adjusted;
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    const Eigen::VectorXd col = samples.col(j);
    ParamSummary ps;
    ps.name = names[j];
    ps.mean = col.mean();
    ps.lower = quantile(col, 0.025);
    ps.upper = quantile(col, 0.975);
    if (col.size() >= 100) {
      const EssResult e = ess(col);
      ps.ess = e.value;
      ps.ess_constant = e.constant;
    } else {
      ps.ess = std::numeric_limits<double>::quiet_NaN();
    }
    ps.mcse = col.size() >= 4 ? batch_means_se(col) : std::numeric_limits<double>::quiet_NaN();
    out.params.push_back(ps);
  }
  return out;
}

PosteriorSummary summarize(const Chain& chain, bool include_delta) {
  return summarize(chain.scalar_names(include_delta), chain.scalar_samples(include_delta));
}

Chain merge_chains(const std::vector<Chain>& chains) {
  if (chains.empty()) throw ConfigError("no chains to merge");
  Chain out = chains.front();
  Eigen::Index total = 0;
  for (const auto& c : chains) total += c.size();
  auto stack_mat = [&](auto member) {
    Eigen::MatrixXd m(total, (chains.front().*member).cols());
    Eigen::Index r = 0;
    for (const auto& c : chains) {
      m.middleRows(r, c.size()) = c.*member;
      r += c.size();
    }
    return m;
  };
  auto stack_vec = [&](auto member) {
    Eigen::VectorXd v(total);
    Eigen::Index r = 0;
    for (const auto& c : chains) {
      v.segment(r, c.size()) = c.*member;
      r += c.size();
    }
    return v;
  };
  out.beta = stack_mat(&Chain::beta);
  out.delta = stack_mat(&Chain::delta);
  out.sigma2 = stack_vec(&Chain::sigma2);
  out.phi = stack_vec(&Chain::phi);
  out.tau2 = stack_vec(&Chain::tau2);
  out.loglik = stack_vec(&Chain::loglik);
  out.iteration.resize(total);
  Eigen::Index r = 0;
  for (const auto& c : chains) {
    out.iteration.segment(r, c.size()) = c.iteration;
    r += c.size();
  }
  for (auto& [name, rate] : out.acceptance) {
    double sum = 0.0;
    for (const auto& c : chains) {
      auto it = c.acceptance.find(name);
      sum += it != c.acceptance.end() ? it->second : 0.0;
    }
    rate = sum / static_cast<double>(chains.size());
  }
  out.wall_seconds = 0.0;
  out.latent_violations = 0;
  for (const auto& c : chains) {
    out.wall_seconds += c.wall_seconds;
    out.latent_violations += c.latent_violations;
  }
  return out;
}

Eigen::MatrixXd posterior_adjust(const Chain& chain, const SpatialDataset& data, EigenCache& cache) {
  if (!chain.model.restricted) {
    throw UsageError("posterior adjustment applies to restricted (RRP) chains only");
  }
  check_chain_matches(chain, data);
  const DesignProjector proj(data.X);
  const bool absorbed = chain_absorbs_nugget(chain);
  std::map<double, Eigen::MatrixXd> coef_cache;  // (X^T X)^{-1} X^T U D^{1/2} per phi
  Eigen::MatrixXd out(chain.size(), chain.beta.cols());
  for (Eigen::Index k = 0; k < chain.size(); ++k) {
    auto eig = eig_for(chain, k, cache);
    Eigen::VectorXd correction;
    if (absorbed) {
      const Eigen::VectorXd W = eig->vectors * (basis_scale(chain, k, *eig).asDiagonal() *
                                                chain.delta.row(k).transpose());
      correction = proj.coefficients(W);
    } else {
      const double key = std::isnan(chain.phi(k)) ? 0.0 : chain.phi(k);
      auto it = coef_cache.find(key);
      if (it == coef_cache.end()) {
        const Eigen::MatrixXd full = eig->vectors * basis_scale(chain, k, *eig).asDiagonal();
        it = coef_cache.emplace(key, proj.coefficients(full)).first;
      }
      correction = it->second * chain.delta.row(k).transpose();
    }
    out.row(k) = chain.beta.row(k) - correction.transpose();
  }
  return out;
}

Eigen::MatrixXd linear_predictor_draws(const Chain& chain, const SpatialDataset& data,
                                       EigenCache& cache) {
  check_chain_matches(chain, data);
  const DesignProjector proj(data.X);
  const bool absorbed = chain_absorbs_nugget(chain);
  std::map<double, Eigen::MatrixXd> basis_cache;
  Eigen::MatrixXd out(chain.size(), data.n());
  for (Eigen::Index k = 0; k < chain.size(); ++k) {
    auto eig = eig_for(chain, k, cache);
    const Eigen::VectorXd delta = chain.delta.row(k).transpose();
    Eigen::VectorXd w;
    if (absorbed) {
      Eigen::MatrixXd full = eig->vectors * basis_scale(chain, k, *eig).asDiagonal();
      if (chain.model.restricted) full = proj.complement(full);
      w = full * delta;
    } else {
      const double key = std::isnan(chain.phi(k)) ? 0.0 : chain.phi(k);
      auto it = basis_cache.find(key);
      if (it == basis_cache.end()) {
        Eigen::MatrixXd full = eig->vectors * basis_scale(chain, k, *eig).asDiagonal();
        if (chain.model.restricted) full = proj.complement(full);
        it = basis_cache.emplace(key, std::move(full)).first;
      }
      w = it->second * delta;
    }
    out.row(k) = (data.X * chain.beta.row(k).transpose() + w).transpose();
  }
  return out;
}

DicResult dic(const Chain& chain, const SpatialDataset& data, EigenCache& cache) {
  if (chain.size() == 0) throw ConfigError("DIC needs at least one sample");
  const Eigen::MatrixXd eta = linear_predictor_draws(chain, data, cache);
  const bool uses_tau2 = chain.family == Family::Gaussian || chain.family == Family::BernoulliProbit;
  double mean_dev = 0.0;
  double tau2_mean = 0.0;
  for (Eigen::Index k = 0; k < chain.size(); ++k) {
    const double t2 = uses_tau2 ? tau2_at(chain, k) : 1.0;
    tau2_mean += t2;
    mean_dev += -2.0 * conditional_loglik(data.response, eta.row(k).transpose(), data.family, t2);
  }
  mean_dev /= static_cast<double>(chain.size());
  tau2_mean /= static_cast<double>(chain.size());
  const Eigen::VectorXd eta_bar = eta.colwise().mean().transpose();
  const double dev_hat = -2.0 * conditional_loglik(data.response, eta_bar, data.family, tau2_mean);
  DicResult out;
  out.mean_deviance = mean_dev;
  out.p_d = mean_dev - dev_hat;
  out.dic = mean_dev + out.p_d;
  return out;
}

Prediction predict(const Chain& chain, const PredictionSites& sites, const SpatialDataset& data,
                   EigenCache& cache, int max_samples, std::uint64_t seed) {
  check_chain_matches(chain, data);
  if (chain.size() == 0) throw ConfigError("prediction needs at least one sample");
  const bool areal = data.is_areal();
  const Eigen::Index n_new =
      areal ? static_cast<Eigen::Index>(sites.units.size()) : sites.locations.rows();
  if (sites.X.rows() != n_new || sites.X.cols() != data.p()) {
    throw IngestionError("prediction sites need one covariate row of width " +
                         std::to_string(data.p()) + " per site");
  }
  if (!sites.X.allFinite()) throw IngestionError("prediction covariates contain missing values");
  if (!areal) {
    if (!data.locations || sites.locations.cols() != data.locations->cols()) {
      throw IngestionError("prediction locations have the wrong dimension");
    }
    if (!sites.locations.allFinite()) throw IngestionError("prediction locations are not finite");
  } else {
    for (Eigen::Index u : sites.units) {
      if (u < 0 || u >= data.n()) throw IngestionError("unknown areal unit in prediction request");
    }
  }

  Eigen::MatrixXd beta = chain.beta;
  if (chain.model.restricted) beta = posterior_adjust(chain, data, cache);
  const bool absorbed = chain_absorbs_nugget(chain);
  const double nu = cache.nu();

  // Nystrom extension R*(phi) U D^{-1} per phi, or the selected rows of U for areal units.
  std::map<double, Eigen::MatrixXd> ext_cache;
  auto extension = [&](Eigen::Index k, const EigenApprox& eig) -> const Eigen::MatrixXd& {
    const double key = std::isnan(chain.phi(k)) ? 0.0 : chain.phi(k);
    auto it = ext_cache.find(key);
    if (it != ext_cache.end()) return it->second;
    Eigen::MatrixXd E;
    if (areal) {
      E.resize(n_new, eig.rank());
      for (Eigen::Index i = 0; i < n_new; ++i) E.row(i) = eig.vectors.row(sites.units[i]);
    } else {
      const Eigen::VectorXd inv_d = eig.values.cwiseMax(1e-300).cwiseInverse();
      E = cross_corr(sites.locations, *data.locations, chain.phi(k), nu) * eig.vectors *
          inv_d.asDiagonal();
    }
    return ext_cache.emplace(key, std::move(E)).first->second;
  };

  const auto idx = thinned_indices(chain.size(), max_samples);
  const auto S = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd mu(S, n_new);
  Eigen::MatrixXd etas(S, n_new);
  Eigen::MatrixXd obs;
  const bool gaussian = data.family == Family::Gaussian;
  if (gaussian) obs.resize(S, n_new);
  Rng rng(seed);
  for (Eigen::Index s = 0; s < S; ++s) {
    const Eigen::Index k = idx[s];
    auto eig = eig_for(chain, k, cache);
    const Eigen::MatrixXd& E = extension(k, *eig);
    const Eigen::VectorXd d = eig->values.cwiseMax(0.0);
    Eigen::VectorXd coef(d.size());
    const Eigen::VectorXd delta = chain.delta.row(k).transpose();
    if (areal) {
      // In-sample units: rows of the unprojected basis.
      coef = basis_scale(chain, k, *eig).cwiseProduct(delta);
    } else if (absorbed) {
      // Spatial part of the latent field: sigma2 R* U (sigma2 D + tau2 I)^{-1} c.
      const double s2 = chain.sigma2(k);
      const double t2 = chain.tau2(k);
      for (Eigen::Index j = 0; j < d.size(); ++j) {
        const double c = std::sqrt(s2 * d(j) + t2) * delta(j);
        coef(j) = s2 * d(j) / (s2 * d(j) + t2) * c;
      }
    } else {
      coef = d.cwiseSqrt().cwiseProduct(delta);
    }
    const Eigen::VectorXd eta = sites.X * beta.row(k).transpose() + E * coef;
    etas.row(s) = eta.transpose();
    const double t2 = tau2_at(chain, k);
    for (Eigen::Index i = 0; i < n_new; ++i) {
      mu(s, i) = inverse_link(eta(i), data.family, t2);
      if (gaussian) obs(s, i) = eta(i) + std::sqrt(t2) * rng.normal();
    }
  }

  Prediction out;
  out.mean = mu.colwise().mean().transpose();
  out.eta_mean = etas.colwise().mean().transpose();
  out.lower.resize(n_new);
  out.upper.resize(n_new);
  if (gaussian) {
    out.obs_lower.resize(n_new);
    out.obs_upper.resize(n_new);
  }
  for (Eigen::Index i = 0; i < n_new; ++i) {
    out.lower(i) = quantile(mu.col(i), 0.025);
    out.upper(i) = quantile(mu.col(i), 0.975);
    if (gaussian) {
      out.obs_lower(i) = quantile(obs.col(i), 0.025);
      out.obs_upper(i) = quantile(obs.col(i), 0.975);
    }
  }
  return out;
}

}  // namespace sprp
