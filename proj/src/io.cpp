#include "sprp/io.hpp"

#include <fmt/format.h>

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "sprp/errors.hpp"

namespace sprp::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

void close_out(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw Error("failed writing '" + path + "'");
}

/// Covariate columns x1..xp in order.
std::vector<std::size_t> covariate_columns(const CsvTable& t) {
  std::vector<std::size_t> cols;
  for (int j = 1;; ++j) {
    const std::string name = "x" + std::to_string(j);
    if (!t.has_column(name)) break;
    cols.push_back(t.column(name));
  }
  if (cols.empty()) throw IngestionError("missing covariate column 'x1'");
  return cols;
}

std::vector<std::string> coordinate_names(Eigen::Index dims) {
  std::vector<std::string> names{"x", "y"};
  if (dims == 3) names.push_back("coord_z");
  return names;
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd json_vec(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = a[i].is_null() ? std::nan("") : a[i].get<double>();
  }
  return v;
}

json mat_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(row);
  }
  return a;
}

Eigen::MatrixXd json_mat(const json& a, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(a.size()), cols);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (static_cast<Eigen::Index>(a[i].size()) != cols) throw IngestionError("ragged matrix in JSON");
    for (Eigen::Index j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), j) = a[i][j].get<double>();
  }
  return m;
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

/// Rejects keys outside `allowed`.
void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + what);
  }
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{}", v);
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw IngestionError("missing column '" + name + "'");
}

bool CsvTable::has_column(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  const std::string& cell = rows.at(row).at(col);
  const std::string where =
      "row " + std::to_string(row + 1) + ", column '" + header.at(col) + "'";
  if (cell.empty()) throw IngestionError("empty cell at " + where);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0' || errno == ERANGE) {
    throw IngestionError("non-numeric value '" + cell + "' at " + where);
  }
  return v;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw IngestionError(path + ": row " + std::to_string(t.rows.size() + 1) + " has " +
                           std::to_string(cells.size()) + " cells, expected " +
                           std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (!have_header) throw IngestionError(path + ": empty file");
  return t;
}

SpatialDataset read_dataset(const std::string& path, Family family,
                            const std::optional<std::string>& adjacency_path) {
  const CsvTable t = read_csv(path);
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  if (n == 0) throw IngestionError(path + ": no data rows");
  SpatialDataset d;
  d.family = family;
  const auto xcols = covariate_columns(t);
  const std::size_t zcol = t.column("z");
  d.X.resize(n, static_cast<Eigen::Index>(xcols.size()));
  d.response.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < xcols.size(); ++j) {
      d.X(i, static_cast<Eigen::Index>(j)) = t.number(static_cast<std::size_t>(i), xcols[j]);
    }
    d.response(i) = t.number(static_cast<std::size_t>(i), zcol);
  }
  if (adjacency_path) {
    const std::size_t ucol = t.column("unit_id");
    for (const auto& row : t.rows) d.unit_ids.push_back(row[ucol]);
    d.graph = read_adjacency(*adjacency_path, d.unit_ids);
  } else {
    const Eigen::Index dims = t.has_column("coord_z") ? 3 : 2;
    const auto names = coordinate_names(dims);
    Locations locs(n, dims);
    for (Eigen::Index k = 0; k < dims; ++k) {
      const std::size_t c = t.column(names[static_cast<std::size_t>(k)]);
      for (Eigen::Index i = 0; i < n; ++i) locs(i, k) = t.number(static_cast<std::size_t>(i), c);
    }
    d.locations = std::move(locs);
  }
  d.validate();
  return d;
}

void write_dataset(const std::string& path, const SpatialDataset& data) {
  auto out = open_out(path);
  std::vector<std::string> header;
  if (data.is_areal()) {
    header.push_back("unit_id");
  } else {
    for (const auto& c : coordinate_names(data.locations->cols())) header.push_back(c);
  }
  for (Eigen::Index j = 0; j < data.p(); ++j) header.push_back("x" + std::to_string(j + 1));
  header.push_back("z");
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.is_areal()) {
      out << (data.unit_ids.empty() ? std::to_string(i + 1) : data.unit_ids[static_cast<std::size_t>(i)]);
    } else {
      for (Eigen::Index k = 0; k < data.locations->cols(); ++k) {
        out << (k ? "," : "") << format_double((*data.locations)(i, k));
      }
    }
    for (Eigen::Index j = 0; j < data.p(); ++j) out << "," << format_double(data.X(i, j));
    out << "," << format_double(data.response(i)) << "\n";
  }
  close_out(out, path);
}

ArealGraph read_adjacency(const std::string& path, const std::vector<std::string>& unit_ids) {
  const CsvTable t = read_csv(path);
  const std::size_t a = t.column("from");
  const std::size_t b = t.column("to");
  std::map<std::string, Eigen::Index> index;
  for (std::size_t i = 0; i < unit_ids.size(); ++i) {
    if (!index.emplace(unit_ids[i], static_cast<Eigen::Index>(i)).second) {
      throw IngestionError("duplicate unit_id '" + unit_ids[i] + "'");
    }
  }
  const auto n = static_cast<Eigen::Index>(unit_ids.size());
  ArealGraph g;
  g.adjacency = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    auto ia = index.find(t.rows[r][a]);
    auto ib = index.find(t.rows[r][b]);
    if (ia == index.end() || ib == index.end()) {
      throw IngestionError(path + ": row " + std::to_string(r + 1) + " names an unknown unit");
    }
    if (ia->second == ib->second) {
      throw StructuralError(path + ": row " + std::to_string(r + 1) + " is a self-loop");
    }
    g.adjacency(ia->second, ib->second) = 1.0;
    g.adjacency(ib->second, ia->second) = 1.0;
  }
  return g;
}

void write_adjacency(const std::string& path, const ArealGraph& graph,
                     const std::vector<std::string>& unit_ids) {
  auto out = open_out(path);
  out << "from,to\n";
  for (Eigen::Index i = 0; i < graph.adjacency.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < graph.adjacency.cols(); ++j) {
      if (graph.adjacency(i, j) != 0.0) {
        out << unit_ids[static_cast<std::size_t>(i)] << "," << unit_ids[static_cast<std::size_t>(j)] << "\n";
      }
    }
  }
  close_out(out, path);
}

PredictionSites read_sites(const std::string& path, const SpatialDataset& data) {
  const CsvTable t = read_csv(path);
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  PredictionSites s;
  s.X.resize(n, data.p());
  for (Eigen::Index j = 0; j < data.p(); ++j) {
    const std::size_t c = t.column("x" + std::to_string(j + 1));
    for (Eigen::Index i = 0; i < n; ++i) s.X(i, j) = t.number(static_cast<std::size_t>(i), c);
  }
  if (data.is_areal()) {
    const std::size_t c = t.column("unit_id");
    std::map<std::string, Eigen::Index> index;
    for (std::size_t i = 0; i < data.unit_ids.size(); ++i) index[data.unit_ids[i]] = static_cast<Eigen::Index>(i);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      auto it = index.find(t.rows[i][c]);
      if (it == index.end()) {
        throw IngestionError("row " + std::to_string(i + 1) + ": unknown unit_id '" + t.rows[i][c] + "'");
      }
      s.units.push_back(it->second);
    }
  } else {
    const Eigen::Index dims = data.locations->cols();
    const auto names = coordinate_names(dims);
    s.locations.resize(n, dims);
    for (Eigen::Index k = 0; k < dims; ++k) {
      const std::size_t c = t.column(names[static_cast<std::size_t>(k)]);
      for (Eigen::Index i = 0; i < n; ++i) s.locations(i, k) = t.number(static_cast<std::size_t>(i), c);
    }
  }
  if (!s.X.allFinite()) throw IngestionError("prediction covariates contain missing values");
  return s;
}

void write_sites(const std::string& path, const Locations& locations, const Eigen::MatrixXd& X) {
  if (locations.rows() != X.rows()) throw ConfigError("site locations and covariates differ in rows");
  auto out = open_out(path);
  const auto names = coordinate_names(locations.cols());
  for (std::size_t k = 0; k < names.size(); ++k) out << (k ? "," : "") << names[k];
  for (Eigen::Index j = 0; j < X.cols(); ++j) out << ",x" << j + 1;
  out << "\n";
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index k = 0; k < locations.cols(); ++k) out << (k ? "," : "") << format_double(locations(i, k));
    for (Eigen::Index j = 0; j < X.cols(); ++j) out << "," << format_double(X(i, j));
    out << "\n";
  }
  close_out(out, path);
}

void write_prediction(const std::string& path, const PredictionSites& sites, const SpatialDataset& data,
                      const Prediction& pred) {
  auto out = open_out(path);
  const bool areal = data.is_areal();
  const bool obs = pred.obs_lower.size() > 0;
  if (areal) {
    out << "unit_id";
  } else {
    const auto names = coordinate_names(sites.locations.cols());
    for (std::size_t k = 0; k < names.size(); ++k) out << (k ? "," : "") << names[k];
  }
  out << ",mean,lower,upper,eta_mean";
  if (obs) out << ",obs_lower,obs_upper";
  out << "\n";
  for (Eigen::Index i = 0; i < pred.mean.size(); ++i) {
    if (areal) {
      const auto u = static_cast<std::size_t>(sites.units[static_cast<std::size_t>(i)]);
      out << (data.unit_ids.empty() ? std::to_string(u + 1) : data.unit_ids[u]);
    } else {
      for (Eigen::Index k = 0; k < sites.locations.cols(); ++k) {
        out << (k ? "," : "") << format_double(sites.locations(i, k));
      }
    }
    out << "," << format_double(pred.mean(i)) << "," << format_double(pred.lower(i)) << ","
        << format_double(pred.upper(i)) << "," << format_double(pred.eta_mean(i));
    if (obs) out << "," << format_double(pred.obs_lower(i)) << "," << format_double(pred.obs_upper(i));
    out << "\n";
  }
  close_out(out, path);
}

json to_json(const ModelSpec& spec) {
  return json{{"restricted", spec.restricted},
              {"nugget", spec.nugget},
              {"nu", spec.nu},
              {"rank", spec.sketch.rank},
              {"oversample", spec.sketch.oversample},
              {"power", spec.sketch.power},
              {"sketch_seed", spec.sketch.seed},
              {"priors",
               {{"beta_var", spec.priors.beta_var},
                {"sigma2_shape", spec.priors.sigma2_shape},
                {"sigma2_scale", spec.priors.sigma2_scale},
                {"tau2_shape", spec.priors.tau2_shape},
                {"tau2_scale", spec.priors.tau2_scale},
                {"phi_lo", spec.priors.phi_lo},
                {"phi_hi", spec.priors.phi_hi}}}};
}

ModelSpec model_spec_from_json(const json& j) {
  check_keys(j, {"restricted", "nugget", "nu", "rank", "oversample", "power", "sketch_seed", "priors"},
             "model");
  ModelSpec s;
  s.restricted = j.value("restricted", s.restricted);
  s.nugget = j.value("nugget", s.nugget);
  s.nu = j.value("nu", s.nu);
  s.sketch.rank = j.value("rank", s.sketch.rank);
  s.sketch.oversample = j.value("oversample", s.sketch.oversample);
  s.sketch.power = j.value("power", s.sketch.power);
  s.sketch.seed = j.value("sketch_seed", s.sketch.seed);
  if (j.contains("priors")) {
    const json& p = j["priors"];
    check_keys(p, {"beta_var", "sigma2_shape", "sigma2_scale", "tau2_shape", "tau2_scale", "phi_lo", "phi_hi"},
               "priors");
    s.priors.beta_var = p.value("beta_var", s.priors.beta_var);
    s.priors.sigma2_shape = p.value("sigma2_shape", s.priors.sigma2_shape);
    s.priors.sigma2_scale = p.value("sigma2_scale", s.priors.sigma2_scale);
    s.priors.tau2_shape = p.value("tau2_shape", s.priors.tau2_shape);
    s.priors.tau2_scale = p.value("tau2_scale", s.priors.tau2_scale);
    s.priors.phi_lo = p.value("phi_lo", s.priors.phi_lo);
    s.priors.phi_hi = p.value("phi_hi", s.priors.phi_hi);
  }
  return s;
}

json to_json(const McmcConfig& c) {
  return json{{"iterations", c.iterations},
              {"burnin", c.burnin_iterations()},
              {"thin", c.thin},
              {"scale_beta", c.scale_beta},
              {"scale_phi", c.scale_phi},
              {"scale_delta", c.scale_delta},
              {"scale_variance", c.scale_variance},
              {"adapt", c.adapt},
              {"seed", c.seed},
              {"n_chains", c.n_chains},
              {"phi_grid", c.phi_grid},
              {"omega_policy", c.omega_policy == OmegaPolicy::PerPhi ? "per-phi" : "per-chain"},
              {"fix_tau2", c.fix_tau2},
              {"tau2_init", c.tau2_init}};
}

McmcConfig mcmc_config_from_json(const json& j) {
  check_keys(j,
             {"iterations", "burnin", "thin", "scale_beta", "scale_phi", "scale_delta", "scale_variance",
              "adapt", "seed", "n_chains", "phi_grid", "omega_policy", "fix_tau2", "tau2_init"},
             "mcmc");
  McmcConfig c;
  c.iterations = j.value("iterations", c.iterations);
  c.burnin = j.value("burnin", c.burnin);
  c.thin = j.value("thin", c.thin);
  c.scale_beta = j.value("scale_beta", c.scale_beta);
  c.scale_phi = j.value("scale_phi", c.scale_phi);
  c.scale_delta = j.value("scale_delta", c.scale_delta);
  c.scale_variance = j.value("scale_variance", c.scale_variance);
  c.adapt = j.value("adapt", c.adapt);
  c.seed = j.value("seed", c.seed);
  c.n_chains = j.value("n_chains", c.n_chains);
  c.phi_grid = j.value("phi_grid", c.phi_grid);
  const std::string policy = j.value("omega_policy", std::string("per-phi"));
  if (policy == "per-phi") c.omega_policy = OmegaPolicy::PerPhi;
  else if (policy == "per-chain") c.omega_policy = OmegaPolicy::PerChain;
  else throw ConfigError("omega_policy must be per-phi or per-chain");
  c.fix_tau2 = j.value("fix_tau2", c.fix_tau2);
  c.tau2_init = j.value("tau2_init", c.tau2_init);
  return c;
}

void write_chain(const std::string& csv_path, const std::string& sidecar_path, const Chain& chain) {
  auto out = open_out(csv_path);
  out << "iteration";
  for (Eigen::Index j = 0; j < chain.beta.cols(); ++j) out << ",beta_" << j + 1;
  for (Eigen::Index j = 0; j < chain.delta.cols(); ++j) out << ",delta_" << j + 1;
  out << ",sigma2,phi,tau2,loglik\n";
  for (Eigen::Index k = 0; k < chain.size(); ++k) {
    out << chain.iteration(k);
    for (Eigen::Index j = 0; j < chain.beta.cols(); ++j) out << "," << format_double(chain.beta(k, j));
    for (Eigen::Index j = 0; j < chain.delta.cols(); ++j) out << "," << format_double(chain.delta(k, j));
    out << "," << format_double(chain.sigma2(k)) << "," << format_double(chain.phi(k)) << ","
        << format_double(chain.tau2(k)) << "," << format_double(chain.loglik(k)) << "\n";
  }
  close_out(out, csv_path);

  json side{{"family", to_string(chain.family)},
            {"model", to_json(chain.model)},
            {"config", to_json(chain.config)},
            {"seed", chain.seed},
            {"acceptance", chain.acceptance},
            {"wall_seconds", chain.wall_seconds},
            {"latent_violations", chain.latent_violations},
            {"samples", chain.size()},
            {"p", chain.beta.cols()},
            {"m", chain.delta.cols()}};
  write_json(sidecar_path, side);
}

Chain read_chain(const std::string& csv_path, const std::string& sidecar_path) {
  const json side = read_json(sidecar_path);
  Chain c;
  try {
    c.family = family_from_string(side.at("family").get<std::string>());
    c.model = model_spec_from_json(side.at("model"));
    c.config = mcmc_config_from_json(side.at("config"));
    c.seed = side.at("seed").get<std::uint64_t>();
    c.acceptance = side.at("acceptance").get<std::map<std::string, double>>();
    c.wall_seconds = side.value("wall_seconds", 0.0);
    c.latent_violations = side.value("latent_violations", 0L);
  } catch (const json::exception& e) {
    throw IngestionError(sidecar_path + ": " + e.what());
  }
  const auto p = side.at("p").get<Eigen::Index>();
  const auto m = side.at("m").get<Eigen::Index>();
  const CsvTable t = read_csv(csv_path);
  if (static_cast<Eigen::Index>(t.header.size()) != p + m + 5) {
    throw IngestionError(csv_path + ": column count does not match the sidecar");
  }
  const auto S = static_cast<Eigen::Index>(t.rows.size());
  c.iteration.resize(S);
  c.beta.resize(S, p);
  c.delta.resize(S, m);
  c.sigma2.resize(S);
  c.phi.resize(S);
  c.tau2.resize(S);
  c.loglik.resize(S);
  for (Eigen::Index k = 0; k < S; ++k) {
    const auto r = static_cast<std::size_t>(k);
    c.iteration(k) = static_cast<int>(t.number(r, t.column("iteration")));
    for (Eigen::Index j = 0; j < p; ++j) c.beta(k, j) = t.number(r, static_cast<std::size_t>(1 + j));
    for (Eigen::Index j = 0; j < m; ++j) c.delta(k, j) = t.number(r, static_cast<std::size_t>(1 + p + j));
    c.sigma2(k) = t.number(r, t.column("sigma2"));
    c.phi(k) = t.number(r, t.column("phi"));
    c.tau2(k) = t.number(r, t.column("tau2"));
    c.loglik(k) = t.number(r, t.column("loglik"));
  }
  return c;
}

json to_json(const TruthRecord& t) {
  json j{{"scheme", to_string(t.scheme)},
         {"family", to_string(t.family)},
         {"theta", {{"sigma2", t.theta.sigma2}, {"phi", t.theta.phi}, {"nu", t.theta.nu}}},
         {"beta", vec_json(t.beta)},
         {"tau2", t.tau2},
         {"seed", t.seed},
         {"n", t.n},
         {"areal", t.areal},
         {"tau_smooth", t.tau_smooth},
         {"W", vec_json(t.W)},
         {"eta", vec_json(t.eta)},
         {"grid",
          {{"locations", mat_json(t.grid_locations)},
           {"X", mat_json(t.grid_X)},
           {"W", vec_json(t.grid_W)},
           {"eta", vec_json(t.grid_eta)},
           {"response", vec_json(t.grid_response)}}}};
  return j;
}

TruthRecord truth_from_json(const json& j) {
  TruthRecord t;
  try {
    t.scheme = scheme_from_string(j.at("scheme").get<std::string>());
    t.family = family_from_string(j.at("family").get<std::string>());
    t.theta.sigma2 = j.at("theta").at("sigma2").get<double>();
    t.theta.phi = j.at("theta").at("phi").get<double>();
    t.theta.nu = j.at("theta").at("nu").get<double>();
    t.beta = json_vec(j.at("beta"));
    t.tau2 = j.at("tau2").get<double>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.n = j.at("n").get<int>();
    t.areal = j.value("areal", false);
    t.tau_smooth = j.value("tau_smooth", 0.0);
    t.W = json_vec(j.at("W"));
    t.eta = json_vec(j.at("eta"));
    const json& g = j.at("grid");
    const Eigen::Index cols = g.at("locations").empty() ? 2 : static_cast<Eigen::Index>(g.at("locations")[0].size());
    t.grid_locations = json_mat(g.at("locations"), cols);
    const Eigen::Index xcols = g.at("X").empty() ? t.beta.size() : static_cast<Eigen::Index>(g.at("X")[0].size());
    t.grid_X = json_mat(g.at("X"), xcols);
    t.grid_W = json_vec(g.at("W"));
    t.grid_eta = json_vec(g.at("eta"));
    t.grid_response = json_vec(g.at("response"));
  } catch (const json::exception& e) {
    throw IngestionError(std::string("truth record: ") + e.what());
  }
  return t;
}

void write_json(const std::string& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << "\n";
  close_out(out, path);
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IngestionError(path + ": " + e.what());
  }
}

json to_json(const PosteriorSummary& summary) {
  json params = json::array();
  for (const auto& p : summary.params) {
    params.push_back({{"name", p.name},
                      {"mean", nullable(p.mean)},
                      {"lower", nullable(p.lower)},
                      {"upper", nullable(p.upper)},
                      {"ess", nullable(p.ess)},
                      {"ess_constant", p.ess_constant},
                      {"mcse", nullable(p.mcse)}});
  }
  return json{{"adjusted", summary.adjusted}, {"params", params}};
}

json to_json(const std::vector<SeCheck>& checks) {
  json a = json::array();
  for (const auto& c : checks) a.push_back({{"name", c.name}, {"se", nullable(c.se)}, {"pass", c.pass}});
  return a;
}

json to_json(const RankSelectionReport& r) {
  json bic = json::array();
  json ll = json::array();
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    bic.push_back(nullable(r.bic[i]));
    ll.push_back(nullable(r.loglik[i]));
  }
  return json{{"candidates", r.candidates},
              {"bic", bic},
              {"loglik", ll},
              {"converged", r.converged},
              {"chosen_rank", r.chosen_rank},
              {"phi0", nullable(r.phi0)},
              {"family", to_string(r.family)},
              {"exact_basis", r.exact_basis}};
}

json to_json(const DicResult& d) {
  return json{{"dic", nullable(d.dic)}, {"mean_deviance", nullable(d.mean_deviance)}, {"p_d", nullable(d.p_d)}};
}

void write_study_csv(const std::string& path, const StudyTable& table) {
  auto out = open_out(path);
  out << "metric";
  for (const auto& c : table.columns) out << "," << c;
  out << "\n";
  for (std::size_t r = 0; r < table.metrics.size(); ++r) {
    out << table.metrics[r];
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      out << "," << format_double(table.values(static_cast<Eigen::Index>(r), c));
    }
    out << "\n";
  }
  close_out(out, path);
}

}  // namespace sprp::io
