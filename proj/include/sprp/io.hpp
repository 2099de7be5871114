#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "sprp/diagnostics.hpp"
#include "sprp/mcmc.hpp"
#include "sprp/models.hpp"
#include "sprp/rankselect.hpp"
#include "sprp/simulate.hpp"

namespace sprp::io {

using nlohmann::json;

/// Header plus rows of raw cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a named column; IngestionError naming the column if absent.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  /// Parses cell (row, col) as a finite or NaN double; errors name the row and column.
  double number(std::size_t row, std::size_t col) const;
};

CsvTable read_csv(const std::string& path);

/// Point data: columns x, y [, coord_z], x1..xp, z.
/// Areal data: columns unit_id, x1..xp, z plus an edge-list adjacency file.
SpatialDataset read_dataset(const std::string& path, Family family,
                            const std::optional<std::string>& adjacency_path = std::nullopt);
void write_dataset(const std::string& path, const SpatialDataset& data);

/// Edge list with columns from,to naming unit ids.
ArealGraph read_adjacency(const std::string& path, const std::vector<std::string>& unit_ids);
void write_adjacency(const std::string& path, const ArealGraph& graph,
                     const std::vector<std::string>& unit_ids);

/// Prediction sites: x, y [, coord_z], x1..xp for point data; unit_id, x1..xp for areal data.
PredictionSites read_sites(const std::string& path, const SpatialDataset& data);
/// Point sites only: x, y [, coord_z], x1..xp.
void write_sites(const std::string& path, const Locations& locations, const Eigen::MatrixXd& X);
void write_prediction(const std::string& path, const PredictionSites& sites, const SpatialDataset& data,
                      const Prediction& pred);

json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const json& j);
json to_json(const McmcConfig& config);
McmcConfig mcmc_config_from_json(const json& j);

/// Chain CSV (iteration, beta_1..p, delta_1..m, sigma2, phi, tau2, loglik) and JSON sidecar.
void write_chain(const std::string& csv_path, const std::string& sidecar_path, const Chain& chain);
Chain read_chain(const std::string& csv_path, const std::string& sidecar_path);

json to_json(const TruthRecord& truth);
TruthRecord truth_from_json(const json& j);
void write_json(const std::string& path, const json& j);
json read_json(const std::string& path);

json to_json(const PosteriorSummary& summary);
json to_json(const std::vector<SeCheck>& checks);
json to_json(const RankSelectionReport& report);
json to_json(const DicResult& d);

void write_study_csv(const std::string& path, const StudyTable& table);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace sprp::io
