#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include <spdlog/sinks/stdout_sinks.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sprp/covariance.hpp"
#include "sprp/diagnostics.hpp"
#include "sprp/errors.hpp"
#include "sprp/io.hpp"
#include "sprp/mcmc.hpp"
#include "sprp/randproj.hpp"
#include "sprp/rankselect.hpp"
#include "sprp/rng.hpp"
#include "sprp/simulate.hpp"

#ifndef SPRP_VERSION
#define SPRP_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace sprp;
using io::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

const std::vector<std::string> kSubcommands{"simulate", "rank-select", "fit",   "adjust",
                                            "predict",  "bench-approx", "study", "diagnose"};

// ----------------------------------------------------------------------------
// Shared option groups

struct ModelOpts {
  std::string model = "frp";
  int rank = 50;
  int oversample = -1;
  int power = 1;
  std::uint64_t sketch_seed = 1;
  double nu = 2.5;
  bool nugget = false;
  double beta_var = 100.0;
  double sigma2_shape = 2.0;
  double sigma2_scale = 2.0;
  double tau2_shape = 2.0;
  double tau2_scale = 1.0;
  double phi_lo = 0.01;
  double phi_hi = 1.5;

  void add(CLI::App* app) {
    app->add_option("--model", model, "frp or rrp")->check(CLI::IsMember({"frp", "rrp"}));
    app->add_option("--rank", rank, "projection rank m");
    app->add_option("--oversample", oversample, "oversampling l (negative: l = m)");
    app->add_option("--power", power, "sketch power alpha")->check(CLI::Range(0, 2));
    app->add_option("--sketch-seed", sketch_seed, "seed of the Gaussian test matrix");
    app->add_option("--nu", nu, "Matern smoothness");
    app->add_flag("--nugget", nugget, "add a nugget (implied for gaussian and probit)");
    app->add_option("--beta-var", beta_var, "prior variance of each beta");
    app->add_option("--sigma2-shape", sigma2_shape, "inverse-gamma shape for sigma2");
    app->add_option("--sigma2-scale", sigma2_scale, "inverse-gamma scale for sigma2");
    app->add_option("--tau2-shape", tau2_shape, "inverse-gamma shape for tau2");
    app->add_option("--tau2-scale", tau2_scale, "inverse-gamma scale for tau2");
    app->add_option("--phi-lo", phi_lo, "lower end of the uniform phi prior");
    app->add_option("--phi-hi", phi_hi, "upper end of the uniform phi prior");
  }

  ModelSpec spec(Family family) const {
    ModelSpec s;
    s.restricted = model == "rrp";
    s.sketch.rank = rank;
    s.sketch.oversample = oversample;
    s.sketch.power = power;
    s.sketch.seed = sketch_seed;
    s.nu = nu;
    s.nugget = nugget || family == Family::Gaussian || family == Family::BernoulliProbit;
    s.priors = {beta_var, sigma2_shape, sigma2_scale, tau2_shape, tau2_scale, phi_lo, phi_hi};
    return s;
  }
};

struct McmcOpts {
  int iterations = 10000;
  int burnin = -1;
  int thin = 1;
  int chains = 1;
  std::uint64_t seed = 1;
  int phi_grid = 0;
  bool no_adapt = false;
  double scale_beta = 0.05;
  double scale_phi = 0.05;
  double scale_delta = 0.05;
  double scale_variance = 0.3;
  std::string omega = "per-phi";
  bool fix_tau2 = false;
  double tau2_init = 1.0;

  void add(CLI::App* app) {
    app->add_option("--iterations", iterations, "MCMC iterations per chain");
    app->add_option("--burnin", burnin, "burn-in iterations (negative: 20%)");
    app->add_option("--thin", thin, "keep every k-th draw");
    app->add_option("--chains", chains, "number of chains");
    app->add_option("--seed", seed, "MCMC seed");
    app->add_option("--phi-grid", phi_grid, "restrict phi to a grid with this many points (0: continuous)");
    app->add_flag("--no-adapt", no_adapt, "disable burn-in proposal adaptation");
    app->add_option("--scale-beta", scale_beta, "initial beta proposal scale");
    app->add_option("--scale-phi", scale_phi, "initial phi proposal scale");
    app->add_option("--scale-delta", scale_delta, "initial delta block proposal scale");
    app->add_option("--scale-variance", scale_variance, "initial log-scale variance proposal scale");
    app->add_option("--omega", omega, "test matrix policy")->check(CLI::IsMember({"per-phi", "per-chain"}));
    app->add_flag("--fix-tau2", fix_tau2, "probit: hold tau2 fixed at --tau2-init");
    app->add_option("--tau2-init", tau2_init, "probit: initial (or fixed) tau2");
  }

  McmcConfig config() const {
    McmcConfig c;
    c.iterations = iterations;
    c.burnin = burnin;
    c.thin = thin;
    c.n_chains = chains;
    c.seed = seed;
    c.phi_grid = phi_grid;
    c.adapt = !no_adapt;
    c.scale_beta = scale_beta;
    c.scale_phi = scale_phi;
    c.scale_delta = scale_delta;
    c.scale_variance = scale_variance;
    c.omega_policy = omega == "per-chain" ? OmegaPolicy::PerChain : OmegaPolicy::PerPhi;
    c.fix_tau2 = fix_tau2;
    c.tau2_init = tau2_init;
    c.validate();
    return c;
  }
};

struct DataOpts {
  std::string path;
  std::string family;
  std::string adjacency;

  void add(CLI::App* app) {
    app->add_option("--data", path, "dataset CSV")->required();
    app->add_option("--family", family, "gaussian, poisson, logit or probit")->required();
    app->add_option("--adjacency", adjacency, "edge-list CSV (areal data)");
  }

  SpatialDataset load() const {
    const Family f = family_from_string(family);
    return io::read_dataset(path, f, adjacency.empty() ? std::nullopt : std::optional(adjacency));
  }
};

std::string sidecar_for(const std::string& csv) {
  return fs::path(csv).replace_extension(".json").string();
}

std::vector<Chain> load_chains(const std::vector<std::string>& paths) {
  std::vector<Chain> out;
  for (const auto& p : paths) out.push_back(io::read_chain(p, sidecar_for(p)));
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory '" + dir + "': " + ec.message());
}

Locations uniform_locations(int n, std::uint64_t seed) {
  Rng rng(seed);
  Locations loc(n, 2);
  for (int i = 0; i < n; ++i) {
    loc(i, 0) = rng.uniform();
    loc(i, 1) = rng.uniform();
  }
  return loc;
}

json adjusted_block(const Chain& chain, const SpatialDataset& data, EigenCache& cache) {
  const Eigen::MatrixXd adj = posterior_adjust(chain, data, cache);
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < adj.cols(); ++j) names.push_back("beta_" + std::to_string(j + 1));
  return io::to_json(summarize(names, adj, true));
}

std::vector<int> parse_int_list(const std::vector<std::string>& items) {
  std::vector<int> out;
  for (const auto& s : items) out.push_back(std::stoi(s));
  return out;
}

// ----------------------------------------------------------------------------
// Config-file handling: JSON keys name long options of the selected
// subcommand (or global options). Keys also given on the command line are
// skipped so flags win.

bool given_on_command_line(const std::vector<std::string>& args, const std::string& name) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == name || a.rfind(name + "=", 0) == 0;
  });
}

std::vector<std::string> config_arguments(const json& j, CLI::App& app, CLI::App* sub,
                                          const std::vector<std::string>& cli_args) {
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  std::vector<std::string> args;
  for (const auto& [key, value] : j.items()) {
    const std::string name = "--" + key;
    CLI::Option* opt = sub->get_option_no_throw(name);
    if (opt == nullptr) opt = app.get_option_no_throw(name);
    if (opt == nullptr || key == "config") throw ConfigError("unknown config key '" + key + "'");
    if (given_on_command_line(cli_args, name)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(name);
      continue;
    }
    if (value.is_array()) {
      for (const auto& v : value) {
        args.push_back(name);
        args.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      }
      continue;
    }
    args.push_back(name);
    args.push_back(value.is_string() ? value.get<std::string>() : value.dump());
  }
  return args;
}

/// Bad inputs (files, flags, configuration) as opposed to numerical failures.
bool is_usage_error(const Error& e) {
  return dynamic_cast<const IngestionError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
         dynamic_cast<const UsageError*>(&e) || dynamic_cast<const DesignError*>(&e) ||
         dynamic_cast<const StructuralError*>(&e) || dynamic_cast<const DomainError*>(&e);
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_logger_st("sprp"));
  spdlog::set_pattern("[%l] %v");
  CLI::App app{"Projection-based reduced-rank spatial GLMMs"};
  app.set_version_flag("--version", SPRP_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  int threads = 0;
  bool verbose = false;
  bool quiet = false;
  app.add_option("--config", config_path, "JSON file with option values (flags take precedence)");
  app.add_option("--threads", threads, "worker threads (default: SPRP_THREADS or all cores)");
  app.add_flag("-v,--verbose", verbose, "debug logging");
  app.add_flag("-q,--quiet", quiet, "errors only");

  // simulate
  auto* sim = app.add_subcommand("simulate", "simulate a dataset and its truth record");
  std::string sim_family = "gaussian", sim_scheme = "confounded", sim_out, sim_truth, sim_sites, sim_adj;
  int sim_n = 400, sim_grid = 20, sim_rows = 15, sim_cols = 15;
  double sim_sigma2 = 1.0, sim_phi = 0.2, sim_nu = 2.5, sim_tau2 = -1.0, sim_tau_smooth = 1.0;
  std::vector<double> sim_beta{1.0, 1.0};
  std::uint64_t sim_seed = 1;
  bool sim_areal = false;
  sim->add_option("--family", sim_family, "response family");
  sim->add_option("--scheme", sim_scheme, "confounded or orthogonal")
      ->check(CLI::IsMember({"confounded", "orthogonal"}));
  sim->add_option("--n", sim_n, "number of point locations");
  sim->add_option("--sigma2", sim_sigma2, "spatial variance");
  sim->add_option("--phi", sim_phi, "range");
  sim->add_option("--nu", sim_nu, "smoothness");
  sim->add_option("--tau2", sim_tau2, "nugget variance (negative: family default)");
  sim->add_option("--beta", sim_beta, "true coefficients")->expected(1, -1);
  sim->add_option("--grid", sim_grid, "prediction grid side (0: none)");
  sim->add_option("--seed", sim_seed, "simulation seed");
  sim->add_flag("--areal", sim_areal, "ICAR field on a rook lattice instead of point data");
  sim->add_option("--rows", sim_rows, "lattice rows (areal)");
  sim->add_option("--cols", sim_cols, "lattice columns (areal)");
  sim->add_option("--tau-smooth", sim_tau_smooth, "ICAR smoothing parameter (areal)");
  sim->add_option("--out", sim_out, "dataset CSV")->required();
  sim->add_option("--truth", sim_truth, "truth record JSON")->required();
  sim->add_option("--sites-out", sim_sites, "prediction grid sites CSV (point data)");
  sim->add_option("--adjacency-out", sim_adj, "edge-list CSV (areal data)");

  // rank-select
  auto* rs = app.add_subcommand("rank-select", "choose the rank by BIC over synthetic spatial covariates");
  DataOpts rs_data;
  rs_data.add(rs);
  std::optional<double> rs_phi0;
  double rs_margin = 10.0;
  std::vector<std::string> rs_candidates;
  std::string rs_out, rs_csv;
  bool rs_confirm = false;
  int rs_step = 20;
  ModelOpts rs_model;
  McmcOpts rs_mcmc;
  rs->add_option("--phi0", rs_phi0, "range for the synthetic covariates (default: half the max distance)");
  rs->add_option("--candidates", rs_candidates, "candidate ranks")->expected(1, -1)->delimiter(',');
  rs->add_flag("--confirm", rs_confirm, "fit chains at the chosen rank and rank + step and compare DIC");
  rs->add_option("--step", rs_step, "rank increment for --confirm");
  rs->add_option("--margin", rs_margin, "DIC drop needed to advise an increase");
  rs->add_option("--out", rs_out, "report JSON")->required();
  rs->add_option("--csv", rs_csv, "BIC-vs-rank CSV");
  rs_model.add(rs);
  rs_mcmc.add(rs);

  // fit
  auto* fit = app.add_subcommand("fit", "fit a projection-based model by MCMC");
  DataOpts fit_data;
  fit_data.add(fit);
  ModelOpts fit_model;
  McmcOpts fit_mcmc;
  fit_model.add(fit);
  fit_mcmc.add(fit);
  bool fit_auto_rank = false, fit_adjust = false;
  std::string fit_dir;
  double fit_se_threshold = 0.02;
  fit->add_flag("--auto-rank", fit_auto_rank, "select the rank by BIC before fitting");
  fit->add_flag("--adjust", fit_adjust, "report the confounding-adjusted coefficients (rrp)");
  fit->add_option("--se-threshold", fit_se_threshold, "Monte Carlo SE threshold for the se check");
  fit->add_option("--out-dir", fit_dir, "output directory")->required();

  // adjust
  auto* adj = app.add_subcommand("adjust", "confounding adjustment of restricted chains");
  DataOpts adj_data;
  adj_data.add(adj);
  std::vector<std::string> adj_chains;
  std::string adj_out, adj_summary;
  adj->add_option("--chain", adj_chains, "chain CSV (sidecar JSON alongside)")->required()->expected(1, -1);
  adj->add_option("--out", adj_out, "adjusted beta samples CSV")->required();
  adj->add_option("--summary", adj_summary, "adjusted summary JSON");

  // predict
  auto* pred = app.add_subcommand("predict", "posterior predictive summaries at new sites");
  DataOpts pred_data;
  pred_data.add(pred);
  std::vector<std::string> pred_chains;
  std::string pred_sites, pred_out;
  int pred_max = 1000;
  std::uint64_t pred_seed = 7;
  pred->add_option("--chain", pred_chains, "chain CSV (sidecar JSON alongside)")->required()->expected(1, -1);
  pred->add_option("--sites", pred_sites, "prediction sites CSV")->required();
  pred->add_option("--out", pred_out, "prediction CSV")->required();
  pred->add_option("--max-samples", pred_max, "posterior draws used");
  pred->add_option("--seed", pred_seed, "seed for observation draws");

  // bench-approx
  auto* bench = app.add_subcommand("bench-approx", "eigen-approximation accuracy against a dense decomposition");
  int bench_n = 1000, bench_seeds = 20;
  double bench_phi = 0.3;
  std::vector<double> bench_nu{0.5, 2.5};
  std::vector<std::string> bench_ranks{"10", "20", "30", "40", "50", "75", "100"};
  std::uint64_t bench_seed = 1, bench_loc_seed = 2024;
  std::string bench_out;
  bench->add_option("--n", bench_n, "number of uniform locations");
  bench->add_option("--phi", bench_phi, "range");
  bench->add_option("--nu", bench_nu, "smoothness values")->expected(1, -1)->delimiter(',');
  bench->add_option("--ranks", bench_ranks, "target ranks")->expected(1, -1)->delimiter(',');
  bench->add_option("--seeds", bench_seeds, "sketch seeds per configuration");
  bench->add_option("--seed", bench_seed, "base sketch seed");
  bench->add_option("--location-seed", bench_loc_seed, "seed of the location draw");
  bench->add_option("--out", bench_out, "CSV output")->required();

  // study
  auto* study = app.add_subcommand("study", "replicate simulation study");
  std::string st_family = "gaussian", st_scheme = "confounded", st_out, st_manifest;
  std::vector<std::string> st_models{"FRP", "RRP"};
  int st_n = 400, st_reps = 30, st_grid = 20, st_pred_max = 500;
  double st_tau2 = -1.0;
  std::uint64_t st_seed = 1;
  bool st_no_predict = false;
  ModelOpts st_model;
  McmcOpts st_mcmc;
  study->add_option("--family", st_family, "response family");
  study->add_option("--scheme", st_scheme, "confounded or orthogonal")
      ->check(CLI::IsMember({"confounded", "orthogonal"}));
  study->add_option("--models", st_models, "model labels (FRP, RRP)")->expected(0, -1)->delimiter(',');
  study->add_option("--n", st_n, "locations per replicate");
  study->add_option("--replicates", st_reps, "number of replicates");
  study->add_option("--grid", st_grid, "prediction grid side");
  study->add_option("--tau2", st_tau2, "nugget variance (negative: family default)");
  study->add_option("--study-seed", st_seed, "replicate seed");
  study->add_option("--max-prediction-samples", st_pred_max, "posterior draws used for prediction");
  study->add_flag("--no-predict", st_no_predict, "skip grid prediction");
  study->add_option("--out", st_out, "metrics CSV")->required();
  study->add_option("--manifest", st_manifest, "JSON manifest");
  st_model.add(study);
  st_mcmc.add(study);

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "mixing diagnostics for stored chains");
  std::vector<std::string> dg_chains;
  std::string dg_out;
  double dg_threshold = 0.02;
  diag->add_option("--chain", dg_chains, "chain CSV (sidecar JSON alongside)")->required()->expected(1, -1);
  diag->add_option("--se-threshold", dg_threshold, "Monte Carlo SE threshold");
  diag->add_option("--out", dg_out, "report JSON (default: stdout)");

  // Pre-scan for the config file so its values can sit behind the flags.
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string pre_config;
  std::size_t sub_pos = args.size();
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) pre_config = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) pre_config = args[i].substr(9);
    if (sub_pos == args.size() &&
        std::find(kSubcommands.begin(), kSubcommands.end(), args[i]) != kSubcommands.end()) {
      sub_pos = i;
    }
  }
  try {
    if (!pre_config.empty() && sub_pos < args.size()) {
      const json cfg = io::read_json(pre_config);
      CLI::App* sub = app.get_subcommand(args[sub_pos]);
      const auto extra = config_arguments(cfg, app, sub, args);
      args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1, extra.begin(), extra.end());
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::err : spdlog::level::info);
  spdlog::set_pattern("[%l] %v");

  try {
    if (*sim) {
      const Family family = family_from_string(sim_family);
      SimulatedData out;
      if (sim_areal) {
        ArealScheme as;
        as.scheme = scheme_from_string(sim_scheme);
        as.family = family;
        as.rows = sim_rows;
        as.cols = sim_cols;
        as.tau_smooth = sim_tau_smooth;
        as.beta = Eigen::Map<const Eigen::VectorXd>(sim_beta.data(), static_cast<Eigen::Index>(sim_beta.size()));
        as.tau2 = sim_tau2;
        as.seed = sim_seed;
        out = simulate_areal_dataset(as);
        if (sim_adj.empty()) throw UsageError("areal simulation needs --adjacency-out");
        io::write_adjacency(sim_adj, *out.data.graph, out.data.unit_ids);
      } else {
        SimScheme sc;
        sc.scheme = scheme_from_string(sim_scheme);
        sc.family = family;
        sc.n = sim_n;
        sc.theta = {sim_sigma2, sim_phi, sim_nu};
        sc.beta = Eigen::Map<const Eigen::VectorXd>(sim_beta.data(), static_cast<Eigen::Index>(sim_beta.size()));
        sc.tau2 = sim_tau2;
        sc.grid = sim_grid;
        sc.seed = sim_seed;
        out = simulate_dataset(sc);
        if (!sim_sites.empty()) io::write_sites(sim_sites, out.truth.grid_locations, out.truth.grid_X);
      }
      io::write_dataset(sim_out, out.data);
      io::write_json(sim_truth, io::to_json(out.truth));
      spdlog::info("wrote {} rows to {}", out.data.n(), sim_out);
      return 0;
    }

    if (*rs) {
      const SpatialDataset data = rs_data.load();
      RankSelectOptions opt;
      opt.phi0 = rs_phi0;
      opt.candidates = parse_int_list(rs_candidates);
      opt.nu = rs_model.nu;
      opt.sketch_seed = rs_model.sketch_seed;
      const RankSelectionReport report = select_rank(data, opt);
      json j = io::to_json(report);
      spdlog::info("chosen rank {}", report.chosen_rank);
      if (rs_confirm) {
        McmcConfig cfg = rs_mcmc.config();
        const ModelSpec spec = rs_model.spec(data.family);
        const RankConfirmation c = confirm_rank(data, spec, cfg, report.chosen_rank, rs_step, rs_margin);
        j["confirmation"] = {{"rank", c.rank},
                             {"larger_rank", c.larger_rank},
                             {"dic_current", c.dic_current},
                             {"dic_larger", c.dic_larger},
                             {"margin", rs_margin},
                             {"advice", to_string(c.advice)}};
        spdlog::info("DIC {:.2f} at m={} vs {:.2f} at m={}: {}", c.dic_current, c.rank, c.dic_larger,
                     c.larger_rank, to_string(c.advice));
      }
      io::write_json(rs_out, j);
      if (!rs_csv.empty()) {
        std::ofstream out(rs_csv);
        if (!out) throw Error("cannot write '" + rs_csv + "'");
        out << "rank,bic,loglik,converged\n";
        for (std::size_t i = 0; i < report.candidates.size(); ++i) {
          out << report.candidates[i] << "," << io::format_double(report.bic[i]) << ","
              << io::format_double(report.loglik[i]) << "," << (report.converged[i] ? 1 : 0) << "\n";
        }
        if (!out) throw Error("write to '" + rs_csv + "' failed");
      }
      return 0;
    }

    if (*fit) {
      const SpatialDataset data = fit_data.load();
      ModelSpec spec = fit_model.spec(data.family);
      const McmcConfig cfg = fit_mcmc.config();
      json summary;
      if (fit_auto_rank) {
        RankSelectOptions opt;
        opt.nu = spec.nu;
        opt.sketch_seed = spec.sketch.seed;
        const RankSelectionReport report = select_rank(data, opt);
        spec.sketch.rank = report.chosen_rank;
        if (spec.sketch.sketch_size() > data.n()) spec.sketch.oversample = static_cast<int>(data.n()) - report.chosen_rank;
        summary["rank_selection"] = io::to_json(report);
        spdlog::info("auto-rank chose m = {}", report.chosen_rank);
      }
      spec.validate(data);
      if (fit_adjust && !spec.restricted) throw UsageError("--adjust applies to --model rrp");
      ensure_dir(fit_dir);
      auto cache = make_cache(data, spec, cfg.omega_policy);
      const std::vector<Chain> chains = run_chains(data, spec, cfg, cache, threads);
      json files = json::array();
      for (std::size_t c = 0; c < chains.size(); ++c) {
        const std::string csv = (fs::path(fit_dir) / fmt::format("chain_{}.csv", c + 1)).string();
        io::write_chain(csv, sidecar_for(csv), chains[c]);
        files.push_back(csv);
      }
      const Chain merged = merge_chains(chains);
      const std::string label = spec.restricted ? "RRP" : "FRP";
      summary["model"] = label;
      summary["family"] = to_string(data.family);
      summary["n"] = data.n();
      summary["p"] = data.p();
      summary["rank"] = spec.rank();
      summary["chains"] = chains.size();
      summary["samples"] = merged.size();
      summary["chain_files"] = files;
      summary["version"] = SPRP_VERSION;
      summary["blocks"][label] = io::to_json(summarize(merged, false));
      if (fit_adjust) summary["blocks"]["A-" + label] = adjusted_block(merged, data, *cache);
      summary["dic"] = io::to_json(dic(merged, data, *cache));
      json acc = json::array();
      for (const auto& ch : chains) acc.push_back(ch.acceptance);
      summary["acceptance"] = acc;
      io::write_json((fs::path(fit_dir) / "summary.json").string(), summary);
      const auto checks = mcmc_se_check(merged.scalar_names(false), merged.scalar_samples(false), fit_se_threshold);
      io::write_json((fs::path(fit_dir) / "se_check.json").string(),
                     json{{"threshold", fit_se_threshold}, {"checks", io::to_json(checks)}});
      spdlog::info("wrote {} chain(s) and summary to {}", chains.size(), fit_dir);
      return 0;
    }

    if (*adj) {
      const SpatialDataset data = adj_data.load();
      const Chain merged = merge_chains(load_chains(adj_chains));
      auto cache = make_cache(data, merged.model, merged.config.omega_policy);
      const Eigen::MatrixXd beta = posterior_adjust(merged, data, *cache);
      std::ofstream out(adj_out);
      if (!out) throw Error("cannot write '" + adj_out + "'");
      out << "iteration";
      for (Eigen::Index j = 0; j < beta.cols(); ++j) out << ",beta_" << j + 1;
      out << "\n";
      for (Eigen::Index k = 0; k < beta.rows(); ++k) {
        out << merged.iteration(k);
        for (Eigen::Index j = 0; j < beta.cols(); ++j) out << "," << io::format_double(beta(k, j));
        out << "\n";
      }
      if (!out) throw Error("write to '" + adj_out + "' failed");
      if (!adj_summary.empty()) {
        std::vector<std::string> names;
        for (Eigen::Index j = 0; j < beta.cols(); ++j) names.push_back("beta_" + std::to_string(j + 1));
        io::write_json(adj_summary, io::to_json(summarize(names, beta, true)));
      }
      return 0;
    }

    if (*pred) {
      const SpatialDataset data = pred_data.load();
      const Chain merged = merge_chains(load_chains(pred_chains));
      const PredictionSites sites = io::read_sites(pred_sites, data);
      auto cache = make_cache(data, merged.model, merged.config.omega_policy);
      const Prediction p = predict(merged, sites, data, *cache, pred_max, pred_seed);
      io::write_prediction(pred_out, sites, data, p);
      spdlog::info("wrote {} predictions to {}", p.mean.size(), pred_out);
      return 0;
    }

    if (*bench) {
      const std::vector<int> ranks = parse_int_list(bench_ranks);
      const Locations locs = uniform_locations(bench_n, bench_loc_seed);
      std::ofstream out(bench_out);
      if (!out) throw Error("cannot write '" + bench_out + "'");
      out << "nu,method,alpha,rank,seed,subspace_dist,eig_err\n";
      for (double nu : bench_nu) {
        const Eigen::MatrixXd K = build_corr_matrix(locs, {1.0, bench_phi, nu}).entries;
        int max_rank = 0;
        for (int m : ranks) max_rank = std::max(max_rank, m);
        if (max_rank > bench_n) throw ConfigError("rank exceeds the number of locations");
        const EigenApprox ref = exact_eigs(K, max_rank);
        for (int m : ranks) {
          const int k = std::min(2 * m, bench_n);
          const Eigen::MatrixXd v = ref.vectors.leftCols(m);
          const Eigen::VectorXd lam = ref.values.head(m);
          for (int s = 0; s < bench_seeds; ++s) {
            const std::uint64_t seed = substream_seed(bench_seed, static_cast<std::uint64_t>(s));
            auto row = [&](const std::string& method, const std::string& alpha, const EigenApprox& e) {
              out << io::format_double(nu) << "," << method << "," << alpha << "," << m << "," << seed << ","
                  << io::format_double(subspace_distance(e.vectors, v)) << ","
                  << io::format_double(eigenvalue_error(e.values, lam)) << "\n";
            };
            row("deterministic", "", deterministic_subsample_eigs(K, k, m, seed));
            for (int alpha = 0; alpha <= 2; ++alpha) {
              SketchConfig sk;
              sk.rank = m;
              sk.oversample = k - m;
              sk.power = alpha;
              sk.seed = seed;
              row("random", std::to_string(alpha), approx_eigs(K, sk));
            }
          }
        }
      }
      if (!out) throw Error("write to '" + bench_out + "' failed");
      return 0;
    }

    if (*study) {
      if (st_models.empty()) throw UsageError("study needs at least one model");
      SimScheme sc;
      sc.scheme = scheme_from_string(st_scheme);
      sc.family = family_from_string(st_family);
      sc.n = st_n;
      sc.grid = st_grid;
      sc.tau2 = st_tau2;
      std::vector<StudyModel> models;
      for (const auto& label : st_models) {
        ModelOpts mo = st_model;
        if (label == "FRP") mo.model = "frp";
        else if (label == "RRP") mo.model = "rrp";
        else throw UsageError("unknown model label '" + label + "' (FRP or RRP)");
        models.push_back({label, mo.spec(sc.family)});
      }
      StudyOptions so;
      so.replicates = st_reps;
      so.seed = st_seed;
      so.threads = threads;
      so.max_prediction_samples = st_pred_max;
      so.predict = !st_no_predict;
      const StudyTable table = run_replicate_study(sc, models, st_mcmc.config(), so);
      io::write_study_csv(st_out, table);
      if (!st_manifest.empty()) {
        json seeds = json::array();
        for (int r = 0; r < st_reps; ++r) seeds.push_back(substream_seed(st_seed, static_cast<std::uint64_t>(r)));
        io::write_json(st_manifest, json{{"scheme", to_string(sc.scheme)},
                                         {"family", to_string(sc.family)},
                                         {"n", sc.n},
                                         {"study_seed", st_seed},
                                         {"replicate_seeds", seeds},
                                         {"replicates_requested", table.replicates_requested},
                                         {"replicates_ok", table.replicates_ok},
                                         {"replicates_failed", table.replicates_failed},
                                         {"models", st_models},
                                         {"mcmc", io::to_json(st_mcmc.config())},
                                         {"version", SPRP_VERSION}});
      }
      spdlog::info("{} of {} replicates succeeded", table.replicates_ok, table.replicates_requested);
      return 0;
    }

    if (*diag) {
      const std::vector<Chain> chains = load_chains(dg_chains);
      json report;
      json per = json::array();
      for (std::size_t c = 0; c < chains.size(); ++c) {
        const Chain& ch = chains[c];
        per.push_back({{"file", dg_chains[c]},
                       {"samples", ch.size()},
                       {"acceptance", ch.acceptance},
                       {"latent_violations", ch.latent_violations},
                       {"max_abs_delta_cross_correlation", max_abs_cross_correlation(ch.delta)},
                       {"summary", io::to_json(summarize(ch, true))}});
      }
      report["chains"] = per;
      const Chain merged = merge_chains(chains);
      report["se_check"] = io::to_json(mcmc_se_check(merged.scalar_names(false), merged.scalar_samples(false), dg_threshold));
      if (dg_out.empty()) std::cout << report.dump(2) << "\n";
      else io::write_json(dg_out, report);
      return 0;
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return is_usage_error(e) ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
  return 0;
}
