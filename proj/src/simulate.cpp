#include "sprp/simulate.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <cmath>
#include <thread>

#include "sampler_internal.hpp"
#include "sprp/diagnostics.hpp"
#include "sprp/errors.hpp"

namespace sprp {

std::string to_string(Scheme s) { return s == Scheme::Orthogonal ? "orthogonal" : "confounded"; }

Scheme scheme_from_string(const std::string& name) {
  if (name == "confounded") return Scheme::Confounded;
  if (name == "orthogonal") return Scheme::Orthogonal;
  throw ConfigError("unknown scheme '" + name + "'");
}

double SimScheme::nugget() const {
  if (tau2 >= 0.0) return tau2;
  return family == Family::BernoulliProbit ? 1.0 : 0.1;
}

void SimScheme::validate() const {
  if (n <= 2) throw ConfigError("simulation needs n > 2");
  if (beta.size() != 2) throw ConfigError("simulated designs use the two coordinates; beta needs 2 entries");
  if (grid < 0) throw ConfigError("grid size must be nonnegative");
  if (!(theta.sigma2 >= 0) || !(theta.phi > 0) || !(theta.nu > 0)) {
    throw ConfigError("invalid Matérn parameters");
  }
  if ((family == Family::Gaussian || family == Family::BernoulliProbit) && !(nugget() > 0)) {
    throw ConfigError("gaussian and probit simulation need tau2 > 0");
  }
}

Eigen::VectorXd sample_gp(const Locations& locations, const MaternParams& params, Rng& rng) {
  const Eigen::Index n = locations.rows();
  Eigen::MatrixXd K = params.sigma2 * build_corr_matrix(locations, {1.0, params.phi, params.nu}).entries;
  const double scale = std::max(params.sigma2, std::numeric_limits<double>::min());
  double jitter = 0.0;
  for (int attempt = 0; attempt < 9; ++attempt) {
    Eigen::MatrixXd Kj = K;
    Kj.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(Kj);
    if (llt.info() == Eigen::Success) return llt.matrixL() * rng.normal_vector(n);
    jitter = jitter == 0.0 ? 1e-12 * scale : jitter * 10.0;
  }
  throw Error("covariance Cholesky failed after maximum jitter");
}

Eigen::VectorXd sample_gp(const Locations& locations, const MaternParams& params,
                          std::uint64_t seed) {
  Rng rng(seed);
  return sample_gp(locations, params, rng);
}

Eigen::VectorXd draw_response(const Eigen::VectorXd& eta, Family family, double tau2, Rng& rng) {
  Eigen::VectorXd z(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    switch (family) {
      case Family::Gaussian: z(i) = eta(i) + std::sqrt(tau2) * rng.normal(); break;
      case Family::Poisson: z(i) = rng.poisson(std::exp(eta(i))); break;
      case Family::BernoulliLogit:
        z(i) = rng.uniform() < 1.0 / (1.0 + std::exp(-eta(i))) ? 1.0 : 0.0;
        break;
      case Family::BernoulliProbit:
        z(i) = eta(i) + std::sqrt(tau2) * rng.normal() > 0.0 ? 1.0 : 0.0;
        break;
    }
  }
  return z;
}

SimulatedData simulate_dataset(const SimScheme& scheme) {
  scheme.validate();
  Rng rng(scheme.seed);
  const Eigen::Index n = scheme.n;
  Locations locs(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    locs(i, 0) = rng.uniform();
    locs(i, 1) = rng.uniform();
  }
  const Locations grid = scheme.grid > 0 ? lattice_centroids(scheme.grid, scheme.grid) : Locations(0, 2);
  Locations all(n + grid.rows(), 2);
  all << locs, grid;
  const Eigen::VectorXd W_all = sample_gp(all, scheme.theta, rng);

  SimulatedData out;
  TruthRecord& t = out.truth;
  t.scheme = scheme.scheme;
  t.family = scheme.family;
  t.theta = scheme.theta;
  t.beta = scheme.beta;
  t.tau2 = scheme.nugget();
  t.seed = scheme.seed;
  t.n = scheme.n;
  const Eigen::MatrixXd X = locs;
  t.W = W_all.head(n);
  t.grid_locations = grid;
  t.grid_X = grid;
  t.grid_W = W_all.tail(grid.rows());
  if (scheme.scheme == Scheme::Orthogonal) {
    const DesignProjector proj(X);
    const Eigen::VectorXd coef = proj.coefficients(t.W);
    t.W = proj.complement(t.W);
    if (grid.rows() > 0) t.grid_W -= t.grid_X * coef;
  }
  t.eta = X * scheme.beta + t.W;
  t.grid_eta = t.grid_X * scheme.beta + t.grid_W;

  SpatialDataset& d = out.data;
  d.locations = locs;
  d.X = X;
  d.family = scheme.family;
  d.response = draw_response(t.eta, scheme.family, t.tau2, rng);
  t.grid_response = draw_response(t.grid_eta, scheme.family, t.tau2, rng);
  return out;
}

IcarSampler::IcarSampler(const ArealGraph& graph, double tol) {
  graph.validate();
  const IcarPrecision q = icar_precision(graph);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q.Q);
  if (es.info() != Eigen::Success) throw Error("eigendecomposition of Q failed");
  const double cutoff = tol * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (es.eigenvalues()(i) > cutoff) keep.push_back(i);
  }
  null_dim_ = static_cast<int>(es.eigenvalues().size() - keep.size());
  if (null_dim_ > 1) {
    spdlog::warn("graph has {} null directions (disconnected); all are skipped", null_dim_);
  }
  vectors_.resize(q.Q.rows(), static_cast<Eigen::Index>(keep.size()));
  values_.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    vectors_.col(j) = es.eigenvectors().col(keep[j]);
    values_(j) = es.eigenvalues()(keep[j]);
  }
}

Eigen::VectorXd IcarSampler::draw(double tau_smooth, Rng& rng) const {
  if (!(tau_smooth > 0)) throw DomainError("smoothing parameter must be positive");
  Eigen::VectorXd coef(values_.size());
  for (Eigen::Index j = 0; j < values_.size(); ++j) {
    coef(j) = rng.normal() / std::sqrt(tau_smooth * values_(j));
  }
  return vectors_ * coef;
}

Eigen::VectorXd simulate_icar(const ArealGraph& graph, double tau_smooth, std::uint64_t seed) {
  Rng rng(seed);
  return IcarSampler(graph).draw(tau_smooth, rng);
}

SimulatedData simulate_areal_dataset(const ArealScheme& scheme) {
  if (scheme.rows <= 0 || scheme.cols <= 0) throw ConfigError("lattice dimensions must be positive");
  if (scheme.beta.size() != 2) throw ConfigError("areal designs use the two coordinates; beta needs 2 entries");
  Rng rng(scheme.seed);
  const ArealGraph graph = lattice_graph(scheme.rows, scheme.cols);
  const Eigen::MatrixXd X = lattice_centroids(scheme.rows, scheme.cols);
  SimulatedData out;
  TruthRecord& t = out.truth;
  t.areal = true;
  t.scheme = scheme.scheme;
  t.family = scheme.family;
  t.beta = scheme.beta;
  t.tau2 = scheme.tau2 >= 0 ? scheme.tau2 : (scheme.family == Family::BernoulliProbit ? 1.0 : 0.1);
  t.tau_smooth = scheme.tau_smooth;
  t.seed = scheme.seed;
  t.n = scheme.rows * scheme.cols;
  t.W = IcarSampler(graph).draw(scheme.tau_smooth, rng);
  if (scheme.scheme == Scheme::Orthogonal) t.W = DesignProjector(X).complement(t.W);
  t.eta = X * scheme.beta + t.W;

  SpatialDataset& d = out.data;
  d.graph = graph;
  d.X = X;
  d.family = scheme.family;
  d.response = draw_response(t.eta, scheme.family, t.tau2, rng);
  for (int i = 0; i < t.n; ++i) d.unit_ids.push_back("u" + std::to_string(i + 1));
  return out;
}

// ----------------------------------------------------------------------------

double StudyTable::at(const std::string& metric, const std::string& column) const {
  const auto r = std::find(metrics.begin(), metrics.end(), metric);
  const auto c = std::find(columns.begin(), columns.end(), column);
  if (r == metrics.end() || c == columns.end()) {
    throw UsageError("no study cell (" + metric + ", " + column + ")");
  }
  return values(r - metrics.begin(), c - columns.begin());
}

std::vector<double> StudyTable::ci_lengths(int j, const std::string& column) const {
  std::vector<double> out;
  for (const auto& rep : replicates) {
    if (!rep.ok) continue;
    for (std::size_t c = 0; c < rep.columns.size(); ++c) {
      if (rep.columns[c] == column) out.push_back(rep.beta_upper[c](j) - rep.beta_lower[c](j));
    }
  }
  return out;
}

namespace {

void add_column(ReplicateResult& rep, const std::string& label, const Eigen::MatrixXd& beta_samples,
                const Chain& chain, double pmse) {
  const Eigen::Index p = beta_samples.cols();
  Eigen::VectorXd mean(p), lo(p), hi(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    mean(j) = beta_samples.col(j).mean();
    lo(j) = quantile(beta_samples.col(j), 0.025);
    hi(j) = quantile(beta_samples.col(j), 0.975);
  }
  rep.columns.push_back(label);
  rep.beta_mean.push_back(mean);
  rep.beta_lower.push_back(lo);
  rep.beta_upper.push_back(hi);
  rep.sigma2_mean.push_back(chain.sigma2.mean());
  rep.phi_mean.push_back(chain.phi.array().isNaN().all() ? std::nan("") : chain.phi.mean());
  rep.tau2_mean.push_back(chain.tau2.array().isNaN().all() ? std::nan("") : chain.tau2.mean());
  rep.pmse.push_back(pmse);
}

bool same_sketch(const ModelSpec& a, const ModelSpec& b) {
  return a.nu == b.nu && a.sketch.rank == b.sketch.rank && a.sketch.power == b.sketch.power &&
         a.sketch.oversampling() == b.sketch.oversampling() && a.sketch.seed == b.sketch.seed;
}

ReplicateResult run_one(const SimScheme& base, const std::vector<StudyModel>& models,
                        const McmcConfig& config, const StudyOptions& options, int r) {
  ReplicateResult rep;
  rep.replicate = r;
  SimScheme scheme = base;
  scheme.seed = substream_seed(options.seed, static_cast<std::uint64_t>(r));
  const SimulatedData sim = simulate_dataset(scheme);
  const SpatialDataset& data = sim.data;

  std::vector<std::shared_ptr<EigenCache>> caches(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (same_sketch(models[i].spec, models[j].spec)) caches[i] = caches[j];
    }
    if (!caches[i]) caches[i] = make_cache(data, models[i].spec, config.omega_policy);
  }

  PredictionSites sites;
  sites.locations = sim.truth.grid_locations;
  sites.X = sim.truth.grid_X;
  const bool do_predict = options.predict && sites.locations.rows() > 0;

  McmcConfig cfg = config;
  cfg.seed = substream_seed(options.seed ^ 0x5bd1e995u, static_cast<std::uint64_t>(r));
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& model = models[i];
    std::vector<Chain> chains;
    for (int c = 0; c < cfg.n_chains; ++c) chains.push_back(run_chain(data, model.spec, cfg, caches[i], c));
    const Chain chain = merge_chains(chains);
    double pmse = std::nan("");
    if (do_predict) {
      const Prediction pred = predict(chain, sites, data, *caches[i], options.max_prediction_samples,
                                      cfg.seed + 17);
      pmse = (pred.mean - sim.truth.grid_response).squaredNorm() / static_cast<double>(pred.mean.size());
    }
    add_column(rep, model.label, chain.beta, chain, pmse);
    if (model.spec.restricted) {
      add_column(rep, "A-" + model.label, posterior_adjust(chain, data, *caches[i]), chain, pmse);
    }
  }
  rep.ok = true;
  return rep;
}

}  // namespace

StudyTable run_replicate_study(const SimScheme& scheme, const std::vector<StudyModel>& models,
                               const McmcConfig& config, const StudyOptions& options) {
  if (models.empty()) throw UsageError("a study needs at least one model");
  scheme.validate();
  config.validate();
  if (options.replicates < 0) throw ConfigError("replicate count must be nonnegative");
  StudyTable table;
  table.replicates_requested = options.replicates;
  for (const auto& m : models) {
    table.columns.push_back(m.label);
    if (m.spec.restricted) table.columns.push_back("A-" + m.label);
  }

  const int R = options.replicates;
  table.replicates.resize(R);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int r = next++; r < R; r = next++) {
      try {
        table.replicates[r] = run_one(scheme, models, config, options, r);
      } catch (const std::exception& e) {
        table.replicates[r].replicate = r;
        table.replicates[r].ok = false;
        table.replicates[r].error = e.what();
        spdlog::warn("replicate {} failed: {}", r, e.what());
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(
      std::max(R, 1), options.threads > 0 ? static_cast<std::size_t>(options.threads)
                                          : detail::default_threads());
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  const int p = static_cast<int>(scheme.beta.size());
  for (int j = 0; j < p; ++j) {
    const std::string b = "beta" + std::to_string(j + 1);
    for (const char* suffix : {"_mean", "_coverage", "_ci_length", "_mse"}) table.metrics.push_back(b + suffix);
  }
  for (const char* name : {"sigma2_mean", "phi_mean", "tau2_mean", "pmse"}) table.metrics.push_back(name);

  const auto C = static_cast<Eigen::Index>(table.columns.size());
  table.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(table.metrics.size()), C);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(table.values.rows(), C);
  for (const auto& rep : table.replicates) {
    if (!rep.ok) {
      ++table.replicates_failed;
      continue;
    }
    ++table.replicates_ok;
    for (std::size_t k = 0; k < rep.columns.size(); ++k) {
      const auto c = std::find(table.columns.begin(), table.columns.end(), rep.columns[k]) -
                     table.columns.begin();
      auto add = [&](Eigen::Index row, double v) {
        if (std::isnan(v)) return;
        table.values(row, c) += v;
        counts(row, c) += 1.0;
      };
      for (int j = 0; j < p; ++j) {
        const double truth = scheme.beta(j);
        const double mean = rep.beta_mean[k](j);
        const double lo = rep.beta_lower[k](j);
        const double hi = rep.beta_upper[k](j);
        add(4 * j + 0, mean);
        add(4 * j + 1, lo <= truth && truth <= hi ? 1.0 : 0.0);
        add(4 * j + 2, hi - lo);
        add(4 * j + 3, (mean - truth) * (mean - truth));
      }
      add(4 * p + 0, rep.sigma2_mean[k]);
      add(4 * p + 1, rep.phi_mean[k]);
      add(4 * p + 2, rep.tau2_mean[k]);
      add(4 * p + 3, rep.pmse[k]);
    }
  }
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < C; ++c) {
      table.values(r, c) = counts(r, c) > 0 ? table.values(r, c) / counts(r, c) : std::nan("");
    }
  }
  return table;
}

}  // namespace sprp
