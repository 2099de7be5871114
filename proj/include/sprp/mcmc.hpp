#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sprp/eigen_cache.hpp"
#include "sprp/models.hpp"
#include "sprp/rng.hpp"

namespace sprp {

struct McmcConfig {
  int iterations = 10000;
  int burnin = -1;  ///< negative selects 20% of iterations
  int thin = 1;
  double scale_beta = 0.05;
  double scale_phi = 0.05;
  double scale_delta = 0.05;
  double scale_variance = 0.3;  ///< log-scale random walk for non-conjugate variances
  bool adapt = true;
  std::uint64_t seed = 1;
  int n_chains = 1;
  int phi_grid = 0;  ///< >= 2 restricts phi to a uniform grid over the prior support
  OmegaPolicy omega_policy = OmegaPolicy::PerPhi;
  bool fix_tau2 = false;   ///< probit: hold tau2 at its initial value
  double tau2_init = 1.0;
  bool prior_only = false;  ///< drop the likelihood term (prior-recovery checks)

  int burnin_iterations() const { return burnin < 0 ? iterations / 5 : burnin; }
  int stored_samples() const { return (iterations - burnin_iterations()) / thin; }
  void validate() const;
};

/// One state of the sampler with its cached derived quantities.
struct ChainState {
  Eigen::VectorXd beta;
  Eigen::VectorXd delta;
  double sigma2 = 1.0;
  double phi = 0.0;
  double tau2 = 0.0;
  Eigen::VectorXd latent;  ///< probit only
  std::shared_ptr<const LinearPredictorBasis> basis;
  Eigen::VectorXd eta;  ///< X beta + B delta
  double loglik = 0.0;
};

/// Stored sample path after burn-in and thinning.
struct Chain {
  Eigen::VectorXi iteration;
  Eigen::MatrixXd beta;   ///< samples x p
  Eigen::MatrixXd delta;  ///< samples x m
  Eigen::VectorXd sigma2;
  Eigen::VectorXd phi;   ///< NaN for areal data
  Eigen::VectorXd tau2;  ///< NaN without a nugget
  Eigen::VectorXd loglik;
  std::map<std::string, double> acceptance;
  std::uint64_t seed = 0;
  ModelSpec model;
  McmcConfig config;
  Family family = Family::Gaussian;
  double wall_seconds = 0.0;
  long latent_violations = 0;  ///< probit truncation breaches (must stay 0)

  Eigen::Index size() const { return beta.rows(); }
  /// Scalar parameter names in the column order of `scalar_samples()`.
  std::vector<std::string> scalar_names(bool include_delta = true) const;
  Eigen::MatrixXd scalar_samples(bool include_delta = true) const;
};

/// Everything a block update needs besides the state.
struct SamplerContext {
  const SpatialDataset* data = nullptr;
  const DesignProjector* proj = nullptr;
  std::shared_ptr<EigenCache> cache;
  ModelSpec spec;
  McmcConfig config;
  PhiGrid grid;

  /// Linear-predictor basis at phi for the current state (rebuilt for the
  /// nugget-absorbing parameterisation).
  std::shared_ptr<const LinearPredictorBasis> basis_for(double phi, double sigma2,
                                                        double tau2) const;
  bool absorbs_nugget() const;
  double loglik(const ChainState& s, const Eigen::VectorXd& eta) const;

 private:
  mutable std::map<double, std::shared_ptr<const LinearPredictorBasis>> basis_cache_;
};

SamplerContext make_context(const SpatialDataset& data, const DesignProjector& proj,
                            std::shared_ptr<EigenCache> cache, const ModelSpec& spec,
                            const McmcConfig& config);

/// Cache for a dataset and model: point data sketches R(phi) lazily, areal
/// data decomposes the ICAR covariance once.
std::shared_ptr<EigenCache> make_cache(const SpatialDataset& data, const ModelSpec& spec,
                                       OmegaPolicy policy = OmegaPolicy::PerPhi);

ChainState initial_state(const SamplerContext& ctx, int chain_index, Rng& rng);

// Block updates. Each returns the number of accepted proposals.

/// One-variable-at-a-time Gaussian random walk on beta; scales per coordinate.
int mh_update_beta(ChainState& s, const SamplerContext& ctx, const Eigen::VectorXd& scales,
                   Rng& rng);
/// Exact inverse-gamma draw for sigma2 given delta (or MH when the nugget is absorbed).
int mh_update_sigma2(ChainState& s, const SamplerContext& ctx, double scale, Rng& rng);
/// Random walk on phi; a move recomputes the eigenbasis. Out-of-support
/// proposals and failed sketches are rejected.
int mh_update_phi(ChainState& s, const SamplerContext& ctx, double scale, Rng& rng);
/// Spherical Gaussian random walk on the whole delta vector.
int mh_update_delta_block(ChainState& s, const SamplerContext& ctx, double scale, Rng& rng);
/// Log-scale random walk on tau2 (non-conjugate cases).
int mh_update_tau2(ChainState& s, const SamplerContext& ctx, double scale, Rng& rng);

/// Gaussian family: exact draw of beta from its conditional under the marginal model.
void gibbs_update_beta_marginal(ChainState& s, const SamplerContext& ctx, Rng& rng);
/// Gaussian family: composition draw of delta | Y, beta, sigma2, tau2, phi.
void draw_delta_given_marginal(ChainState& s, const SamplerContext& ctx, Rng& rng);

/// Probit: latent normals truncated to the side given by each response; breaches
/// of the truncation are counted in `violations`.
void draw_probit_latent(ChainState& s, const SpatialDataset& data, Rng& rng, long& violations);
/// Probit: joint normal draw of (beta, delta) given the latent variables.
void draw_probit_coefficients(ChainState& s, const SamplerContext& ctx, Rng& rng);

/// Run one chain; families other than probit use Metropolis-within-Gibbs.
Chain run_chain(const SpatialDataset& data, const ModelSpec& spec, const McmcConfig& config,
                std::shared_ptr<EigenCache> cache = nullptr, int chain_index = 0);

/// Run config.n_chains chains from dispersed starts, concurrently.
std::vector<Chain> run_chains(const SpatialDataset& data, const ModelSpec& spec,
                              const McmcConfig& config, std::shared_ptr<EigenCache> cache = nullptr,
                              int threads = 0);

/// Gibbs sampler for the probit model with nugget (latent truncated normals,
/// joint conjugate draw of (beta, delta), conjugate tau2 and sigma2, MH for phi).
Chain probit_gibbs_chain(const SpatialDataset& data, const ModelSpec& spec,
                         const McmcConfig& config, std::shared_ptr<EigenCache> cache = nullptr,
                         int chain_index = 0);

/// One-variable-at-a-time sampler over the full n-dimensional random effect
/// W ~ N(0, sigma2 R(phi)) for Poisson and logit data. Reference baseline for
/// mixing comparisons; W is stored in Chain::delta.
Chain run_full_w_chain(const SpatialDataset& data, const ModelSpec& spec, const McmcConfig& config,
                       int chain_index = 0);

// ----------------------------------------------------------------------------
// Posterior processing

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double ess = 0.0;
  bool ess_constant = false;
  double mcse = 0.0;
};

struct PosteriorSummary {
  std::vector<ParamSummary> params;
  bool adjusted = false;

  const ParamSummary& at(const std::string& name) const;
};

PosteriorSummary summarize(const std::vector<std::string>& names, const Eigen::MatrixXd& samples,
                           bool adjusted = false);
PosteriorSummary summarize(const Chain& chain, bool include_delta = false);
/// Pools several chains (rows concatenated) before summarising.
Chain merge_chains(const std::vector<Chain>& chains);

/// Per-sample confounding adjustment of a restricted chain:
/// beta = beta_tilde - (X^T X)^{-1} X^T W, with W rebuilt from the
/// unprojected basis at each sampled phi. Returns samples x p.
Eigen::MatrixXd posterior_adjust(const Chain& chain, const SpatialDataset& data,
                                 EigenCache& cache);

struct PredictionSites {
  Locations locations;              ///< point data: new coordinates
  std::vector<Eigen::Index> units;  ///< areal data: row indices into the fitted graph
  Eigen::MatrixXd X;                ///< covariates at the sites
};

struct Prediction {
  Eigen::VectorXd mean;  ///< posterior mean of the mean response
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd eta_mean;
  Eigen::VectorXd obs_lower;  ///< gaussian only: 95% interval of a new observation
  Eigen::VectorXd obs_upper;
};

/// Posterior predictive summaries at new sites. Eigenvectors are extended
/// out of sample with the Nystrom rule u_j(s*) = d_j^{-1} sum_i rho(s*, s_i) U_ij;
/// restricted fits predict with the adjusted coefficients.
Prediction predict(const Chain& chain, const PredictionSites& sites, const SpatialDataset& data,
                   EigenCache& cache, int max_samples = 1000, std::uint64_t seed = 7);

struct DicResult {
  double dic = 0.0;
  double mean_deviance = 0.0;
  double p_d = 0.0;
};

/// DIC from the conditional deviance given (beta, delta), plugging in the
/// posterior mean of the linear predictor.
DicResult dic(const Chain& chain, const SpatialDataset& data, EigenCache& cache);

/// Posterior draws of the linear predictor at the data sites (samples x n).
Eigen::MatrixXd linear_predictor_draws(const Chain& chain, const SpatialDataset& data,
                                       EigenCache& cache);

}  // namespace sprp
