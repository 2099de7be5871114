#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "sprp/errors.hpp"
#include "sprp/io.hpp"
#include "temp_dir.hpp"
#include "test_helpers.hpp"

using namespace sprp;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string error_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 123456789.0, 0.0}) {
    CHECK(std::strtod(io::format_double(v).c_str(), nullptr) == v);
  }
  CHECK(std::isnan(std::strtod(io::format_double(std::nan("")).c_str(), nullptr)));
}

TEST_CASE("point dataset round-trip") {
  test::TempDir dir;
  SimScheme scheme;
  scheme.family = Family::Poisson;
  scheme.n = 30;
  scheme.seed = 1;
  const auto sim = simulate_dataset(scheme);
  io::write_dataset(dir.file("d.csv"), sim.data);
  const auto back = io::read_dataset(dir.file("d.csv"), Family::Poisson);
  CHECK(*back.locations == *sim.data.locations);
  CHECK(back.X == sim.data.X);
  CHECK(back.response == sim.data.response);
  const auto t = io::read_csv(dir.file("d.csv"));
  CHECK(t.header == std::vector<std::string>{"x", "y", "x1", "x2", "z"});
  CHECK(t.rows.size() == 30);
}

TEST_CASE("ingestion errors name the offending column or row") {
  test::TempDir dir;
  write_text(dir.file("nz.csv"), "x,y,x1\n0.1,0.2,1\n0.3,0.4,1\n");
  const std::string missing = error_message([&] { io::read_dataset(dir.file("nz.csv"), Family::Gaussian); });
  CHECK(missing.find("'z'") != std::string::npos);
  CHECK_THROWS_AS(io::read_dataset(dir.file("nz.csv"), Family::Gaussian), IngestionError);

  write_text(dir.file("bad.csv"), "x,y,x1,z\n0.1,0.2,1,3\n0.3,abc,1,2\n");
  const std::string bad = error_message([&] { io::read_dataset(dir.file("bad.csv"), Family::Gaussian); });
  CHECK(bad.find("row 2") != std::string::npos);
  CHECK(bad.find("'y'") != std::string::npos);

  write_text(dir.file("ragged.csv"), "x,y,x1,z\n0.1,0.2,1,3\n0.3,0.4,1\n");
  CHECK_THROWS_AS(io::read_csv(dir.file("ragged.csv")), IngestionError);

  write_text(dir.file("neg.csv"), "x,y,x1,z\n0.1,0.2,1,3\n0.3,0.4,1,-1\n");
  CHECK_THROWS_AS(io::read_dataset(dir.file("neg.csv"), Family::Poisson), IngestionError);
  CHECK_THROWS_AS(io::read_csv(dir.file("absent.csv")), IngestionError);
}

TEST_CASE("areal dataset and adjacency round-trip") {
  test::TempDir dir;
  ArealScheme scheme;
  scheme.rows = 4;
  scheme.cols = 3;
  const auto sim = simulate_areal_dataset(scheme);
  io::write_dataset(dir.file("a.csv"), sim.data);
  io::write_adjacency(dir.file("adj.csv"), *sim.data.graph, sim.data.unit_ids);
  const auto back = io::read_dataset(dir.file("a.csv"), Family::Poisson, dir.file("adj.csv"));
  CHECK(back.graph->adjacency == sim.data.graph->adjacency);
  CHECK(back.X == sim.data.X);
  CHECK(back.response == sim.data.response);
  CHECK(back.unit_ids == sim.data.unit_ids);

  write_text(dir.file("loop.csv"), "from,to\n" + sim.data.unit_ids[0] + "," + sim.data.unit_ids[0] + "\n");
  CHECK_THROWS_AS(io::read_adjacency(dir.file("loop.csv"), sim.data.unit_ids), StructuralError);
  write_text(dir.file("unknown.csv"), "from,to\n" + sim.data.unit_ids[0] + ",nowhere\n");
  CHECK_THROWS_AS(io::read_adjacency(dir.file("unknown.csv"), sim.data.unit_ids), IngestionError);
}

TEST_CASE("chain round-trip") {
  test::TempDir dir;
  SimScheme scheme;
  scheme.family = Family::Poisson;
  scheme.n = 40;
  scheme.grid = 0;
  const auto sim = simulate_dataset(scheme);
  ModelSpec spec;
  spec.sketch.rank = 4;
  spec.restricted = true;
  McmcConfig cfg;
  cfg.iterations = 200;
  cfg.phi_grid = 15;
  const auto chain = run_chain(sim.data, spec, cfg);
  io::write_chain(dir.file("c.csv"), dir.file("c.json"), chain);
  const auto back = io::read_chain(dir.file("c.csv"), dir.file("c.json"));
  CHECK(back.beta == chain.beta);
  CHECK(back.delta == chain.delta);
  CHECK(back.sigma2 == chain.sigma2);
  CHECK(back.phi == chain.phi);
  CHECK(back.tau2.array().isNaN().all());
  CHECK(back.loglik == chain.loglik);
  CHECK(back.iteration == chain.iteration);
  CHECK(back.seed == chain.seed);
  CHECK(back.acceptance == chain.acceptance);
  CHECK(back.model.restricted);
  CHECK(back.model.rank() == 4);
  CHECK(back.config.phi_grid == 15);
  CHECK(back.family == Family::Poisson);
  const auto header = io::read_csv(dir.file("c.csv")).header;
  CHECK(header.front() == "iteration");
  CHECK(header.back() == "loglik");
}

TEST_CASE("truth record round-trip") {
  for (bool areal : {false, true}) {
    SimulatedData sim;
    if (areal) {
      sim = simulate_areal_dataset(ArealScheme{});
    } else {
      SimScheme scheme;
      scheme.scheme = Scheme::Orthogonal;
      scheme.n = 50;
      scheme.grid = 4;
      sim = simulate_dataset(scheme);
    }
    const auto j = io::to_json(sim.truth);
    const auto back = io::truth_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.scheme == sim.truth.scheme);
    CHECK(back.family == sim.truth.family);
    CHECK(back.W == sim.truth.W);
    CHECK(back.eta == sim.truth.eta);
    CHECK(back.beta == sim.truth.beta);
    CHECK(back.grid_locations == sim.truth.grid_locations);
    CHECK(back.grid_response == sim.truth.grid_response);
    CHECK(back.tau2 == sim.truth.tau2);
    CHECK(back.areal == areal);
    CHECK(io::to_json(back) == j);
  }
}

TEST_CASE("config JSON round-trip and unknown keys") {
  ModelSpec spec;
  spec.restricted = true;
  spec.sketch = {30, 10, 2, 77};
  spec.priors.beta_var = 50.0;
  spec.nugget = true;
  spec.nu = 1.5;
  const auto back = io::model_spec_from_json(io::to_json(spec));
  CHECK(back.restricted);
  CHECK(back.sketch.rank == 30);
  CHECK(back.sketch.oversample == 10);
  CHECK(back.sketch.power == 2);
  CHECK(back.sketch.seed == 77);
  CHECK(back.priors.beta_var == 50.0);
  CHECK(back.nu == 1.5);

  McmcConfig cfg;
  cfg.iterations = 1234;
  cfg.omega_policy = OmegaPolicy::PerChain;
  cfg.phi_grid = 40;
  const auto cb = io::mcmc_config_from_json(io::to_json(cfg));
  CHECK(cb.iterations == 1234);
  CHECK(cb.omega_policy == OmegaPolicy::PerChain);
  CHECK(cb.phi_grid == 40);

  auto j = io::to_json(cfg);
  j["bogus"] = 1;
  CHECK_THROWS_AS(io::mcmc_config_from_json(j), ConfigError);
}

TEST_CASE("prediction sites round-trip") {
  test::TempDir dir;
  SimScheme scheme;
  scheme.n = 20;
  scheme.grid = 0;
  const auto sim = simulate_dataset(scheme);
  const Locations grid = lattice_centroids(20, 20);
  io::write_sites(dir.file("s.csv"), grid, grid);
  const auto sites = io::read_sites(dir.file("s.csv"), sim.data);
  CHECK(sites.locations == grid);
  CHECK(sites.X == grid);
}
