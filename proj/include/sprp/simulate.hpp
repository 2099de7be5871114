#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "sprp/covariance.hpp"
#include "sprp/mcmc.hpp"
#include "sprp/models.hpp"
#include "sprp/rng.hpp"

namespace sprp {

enum class Scheme { Confounded, Orthogonal };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& name);

struct SimScheme {
  Scheme scheme = Scheme::Confounded;
  Family family = Family::Gaussian;
  int n = 400;
  MaternParams theta{1.0, 0.2, 2.5};
  Eigen::VectorXd beta = Eigen::VectorXd::Ones(2);
  double tau2 = -1.0;  ///< negative selects 0.1 (gaussian) or 1 (probit)
  int grid = 20;       ///< prediction grid is grid x grid cell centres; 0 disables it
  std::uint64_t seed = 1;

  double nugget() const;
  void validate() const;
};

/// Everything used to generate a dataset, plus held-out draws at the grid.
struct TruthRecord {
  Scheme scheme = Scheme::Confounded;
  Family family = Family::Gaussian;
  MaternParams theta;
  Eigen::VectorXd beta;
  double tau2 = 0.0;
  std::uint64_t seed = 0;
  int n = 0;
  Eigen::VectorXd W;
  Eigen::VectorXd eta;
  Locations grid_locations;
  Eigen::MatrixXd grid_X;
  Eigen::VectorXd grid_W;
  Eigen::VectorXd grid_eta;
  Eigen::VectorXd grid_response;  ///< one new observation per grid site
  bool areal = false;
  double tau_smooth = 0.0;  ///< ICAR smoothing parameter (areal only)
};

struct SimulatedData {
  SpatialDataset data;
  TruthRecord truth;
};

/// W = L z with L the Cholesky factor of sigma2 R(phi); a growing diagonal
/// jitter is added if the factorisation fails.
Eigen::VectorXd sample_gp(const Locations& locations, const MaternParams& params, Rng& rng);
Eigen::VectorXd sample_gp(const Locations& locations, const MaternParams& params,
                          std::uint64_t seed);

SimulatedData simulate_dataset(const SimScheme& scheme);

/// Draws a response for each linear predictor value. Binary draws use one
/// uniform per site (inverse CDF); probit uses the latent-normal construction.
Eigen::VectorXd draw_response(const Eigen::VectorXd& eta, Family family, double tau2, Rng& rng);

/// ICAR field sampler built from the eigenpairs of Q; null-space directions
/// are skipped.
class IcarSampler {
 public:
  explicit IcarSampler(const ArealGraph& graph, double tol = 1e-9);
  /// sum_i e_i N(0, 1 / (tau_smooth lambda_i)) over the non-null eigenpairs.
  Eigen::VectorXd draw(double tau_smooth, Rng& rng) const;
  int null_dimension() const { return null_dim_; }

 private:
  Eigen::MatrixXd vectors_;
  Eigen::VectorXd values_;
  int null_dim_ = 0;
};

Eigen::VectorXd simulate_icar(const ArealGraph& graph, double tau_smooth, std::uint64_t seed);

struct ArealScheme {
  Scheme scheme = Scheme::Confounded;
  Family family = Family::Poisson;
  int rows = 15;
  int cols = 15;
  double tau_smooth = 1.0;
  Eigen::VectorXd beta = Eigen::VectorXd::Ones(2);
  double tau2 = -1.0;
  std::uint64_t seed = 1;
};

/// Lattice data with X = cell-centre coordinates and an ICAR random effect.
SimulatedData simulate_areal_dataset(const ArealScheme& scheme);

// ----------------------------------------------------------------------------
// Replicate studies

struct StudyModel {
  std::string label;  ///< e.g. "FRP", "RRP"; restricted models also report "A-" + label
  ModelSpec spec;
};

struct StudyOptions {
  int replicates = 100;
  std::uint64_t seed = 1;
  int threads = 0;
  int max_prediction_samples = 500;
  bool predict = true;
};

/// Per-replicate, per-column raw results.
struct ReplicateResult {
  int replicate = 0;
  bool ok = false;
  std::string error;
  std::vector<std::string> columns;
  std::vector<Eigen::VectorXd> beta_mean;
  std::vector<Eigen::VectorXd> beta_lower;
  std::vector<Eigen::VectorXd> beta_upper;
  std::vector<double> sigma2_mean;
  std::vector<double> phi_mean;
  std::vector<double> tau2_mean;
  std::vector<double> pmse;
};

struct StudyTable {
  std::vector<std::string> columns;  ///< model labels
  std::vector<std::string> metrics;  ///< row names
  Eigen::MatrixXd values;            ///< metrics x columns
  int replicates_requested = 0;
  int replicates_ok = 0;
  int replicates_failed = 0;
  std::vector<ReplicateResult> replicates;

  double at(const std::string& metric, const std::string& column) const;
  /// Per-replicate CI lengths of beta_j for one column.
  std::vector<double> ci_lengths(int j, const std::string& column) const;
};

/// Simulate, fit every model, adjust restricted fits, predict on the grid,
/// and aggregate posterior means, coverage, CI length, MSE and prediction MSE.
StudyTable run_replicate_study(const SimScheme& scheme, const std::vector<StudyModel>& models,
                               const McmcConfig& config, const StudyOptions& options);

}  // namespace sprp
