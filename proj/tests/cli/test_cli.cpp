#include <doctest.h>
#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>
#include <string>

#include "schema_check.hpp"
#include "sprp/io.hpp"
#include "temp_dir.hpp"

using nlohmann::json;
using sprp::test::TempDir;

namespace {

struct RunResult {
  int code = -1;
  std::string err;
};

RunResult run(const TempDir& dir, const std::string& args) {
  const std::string err = dir.file("stderr.txt");
  const std::string cmd =
      "cd '" + dir.path().string() + "' && '" + SPRP_CLI_PATH + "' " + args + " >stdout.txt 2>'" + err + "'";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  r.err.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json load(const std::string& path) { return json::parse(slurp(path)); }

json schema(const std::string& name) {
  return load(std::string(SPRP_SCHEMA_DIR) + "/" + name + ".schema.json");
}

void check_schema(const std::string& name, const json& doc) {
  const auto errors = sprp::test::SchemaCheck{}(schema(name), doc);
  for (const auto& e : errors) MESSAGE(name << ": " << e);
  CHECK(errors.empty());
}

std::size_t data_rows(const std::string& path) { return sprp::io::read_csv(path).rows.size(); }

}  // namespace

TEST_CASE("schema validator rejects malformed documents") {
  const json s = schema("rank_report");
  json doc = {{"candidates", {10, 20}}, {"bic", {1.0, nullptr}}, {"loglik", {1.0, 2.0}},
              {"converged", {true, false}}, {"chosen_rank", 10}, {"phi0", 0.5},
              {"family", "poisson"}, {"exact_basis", true}};
  CHECK(sprp::test::SchemaCheck{}(s, doc).empty());
  doc["family"] = "gamma";
  CHECK_FALSE(sprp::test::SchemaCheck{}(s, doc).empty());
  doc["family"] = "poisson";
  doc.erase("phi0");
  CHECK_FALSE(sprp::test::SchemaCheck{}(s, doc).empty());
  doc["phi0"] = 0.5;
  doc["extra"] = 1;
  CHECK_FALSE(sprp::test::SchemaCheck{}(s, doc).empty());
}

TEST_CASE("simulate writes the dataset and truth record") {
  TempDir dir;
  REQUIRE(run(dir, "simulate --family gaussian --out d.csv --truth t.json").code == 0);
  CHECK(data_rows(dir.file("d.csv")) == 400);
  check_schema("truth", load(dir.file("t.json")));

  REQUIRE(run(dir, "simulate --family poisson --n 60 --seed 4 --out a.csv --truth a.json").code == 0);
  REQUIRE(run(dir, "simulate --family poisson --n 60 --seed 4 --out b.csv --truth b.json").code == 0);
  CHECK(slurp(dir.file("a.csv")) == slurp(dir.file("b.csv")));
  CHECK(slurp(dir.file("a.json")) == slurp(dir.file("b.json")));

  REQUIRE(run(dir, "simulate --family poisson --n 60 --scheme orthogonal --out o.csv --truth o.json").code == 0);
  CHECK(load(dir.file("o.json"))["scheme"] == "orthogonal");

  REQUIRE(run(dir, "simulate --areal --family poisson --rows 5 --cols 4 --out ar.csv --truth ar.json --adjacency-out adj.csv").code == 0);
  CHECK(data_rows(dir.file("ar.csv")) == 20);
  CHECK(load(dir.file("ar.json"))["areal"] == true);

  const auto bad = run(dir, "simulate --n 20 --out /nonexistent-dir/x.csv --truth t2.json");
  CHECK(bad.code != 0);
  CHECK(bad.err.find("nonexistent-dir") != std::string::npos);
}

TEST_CASE("fit, adjust, predict and diagnose on a small Poisson fixture") {
  TempDir dir;
  REQUIRE(run(dir, "simulate --family poisson --n 50 --seed 3 --grid 20 --out d.csv --truth t.json --sites-out grid.csv").code == 0);

  const auto start = std::chrono::steady_clock::now();
  const auto fit = run(dir, "fit --data d.csv --family poisson --model rrp --rank 5 --iterations 2000 --chains 2 --seed 8 --adjust --out-dir fit");
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  REQUIRE(fit.code == 0);
  CHECK(seconds < 60.0);

  const json summary = load(dir.file("fit/summary.json"));
  check_schema("summary", summary);
  CHECK(summary["blocks"].contains("RRP"));
  CHECK(summary["blocks"].contains("A-RRP"));
  CHECK(summary["blocks"]["A-RRP"]["adjusted"] == true);
  CHECK(summary["chains"] == 2);
  check_schema("chain_sidecar", load(dir.file("fit/chain_1.json")));
  const json se = load(dir.file("fit/se_check.json"));
  CHECK(se["threshold"] == 0.02);
  CHECK_FALSE(se["checks"].empty());

  // Byte-identical outputs for a fixed seed.
  REQUIRE(run(dir, "fit --data d.csv --family poisson --model rrp --rank 5 --iterations 2000 --chains 2 --seed 8 --adjust --out-dir fit2").code == 0);
  CHECK(slurp(dir.file("fit/chain_1.csv")) == slurp(dir.file("fit2/chain_1.csv")));
  CHECK(slurp(dir.file("fit/chain_2.csv")) == slurp(dir.file("fit2/chain_2.csv")));

  REQUIRE(run(dir, "adjust --chain fit/chain_1.csv --chain fit/chain_2.csv --data d.csv --family poisson --out adj.csv").code == 0);
  CHECK(data_rows(dir.file("adj.csv")) == 3200);

  REQUIRE(run(dir, "predict --chain fit/chain_1.csv --chain fit/chain_2.csv --data d.csv --family poisson --sites grid.csv --out pred.csv").code == 0);
  CHECK(data_rows(dir.file("pred.csv")) == 400);
  REQUIRE(run(dir, "predict --chain fit/chain_1.csv --chain fit/chain_2.csv --data d.csv --family poisson --sites grid.csv --out pred2.csv").code == 0);
  CHECK(slurp(dir.file("pred.csv")) == slurp(dir.file("pred2.csv")));

  REQUIRE(run(dir, "diagnose --chain fit/chain_1.csv --chain fit/chain_2.csv --out diag.json").code == 0);
  const json diag = load(dir.file("diag.json"));
  CHECK(diag.contains("se_check"));

  REQUIRE(run(dir, "fit --data d.csv --family poisson --model frp --rank 5 --iterations 500 --out-dir frp").code == 0);
  CHECK(run(dir, "adjust --chain frp/chain_1.csv --data d.csv --family poisson --out bad.csv").code == 2);
  CHECK(run(dir, "fit --data d.csv --family poisson --model frp --rank 5 --iterations 500 --adjust --out-dir frp2").code == 2);
}

TEST_CASE("fit with automatic rank selection records the report") {
  TempDir dir;
  REQUIRE(run(dir, "simulate --family poisson --n 80 --seed 5 --grid 0 --out d.csv --truth t.json").code == 0);
  REQUIRE(run(dir, "fit --data d.csv --family poisson --auto-rank --iterations 500 --out-dir fit").code == 0);
  const json summary = load(dir.file("fit/summary.json"));
  check_schema("summary", summary);
  REQUIRE(summary.contains("rank_selection"));
  CHECK(summary["rank"] == summary["rank_selection"]["chosen_rank"]);

  REQUIRE(run(dir, "rank-select --data d.csv --family poisson --candidates 5,10,20 --out rank.json --csv rank.csv").code == 0);
  check_schema("rank_report", load(dir.file("rank.json")));
  const auto csv = sprp::io::read_csv(dir.file("rank.csv"));
  CHECK(csv.header == std::vector<std::string>{"rank", "bic", "loglik", "converged"});
  CHECK(csv.rows.size() == 3);
}

TEST_CASE("ingestion and usage errors exit with code 2") {
  TempDir dir;
  {
    std::ofstream out(dir.file("noz.csv"));
    out << "x,y,x1\n0.1,0.2,1\n0.3,0.4,2\n0.5,0.1,3\n";
  }
  const auto missing = run(dir, "fit --data noz.csv --family poisson --rank 1 --iterations 100 --out-dir o");
  CHECK(missing.code == 2);
  CHECK(missing.err.find("'z'") != std::string::npos);
  {
    std::ofstream out(dir.file("bad.csv"));
    out << "x,y,x1,z\n0.1,0.2,1,3\n0.3,0.4,oops,2\n0.5,0.1,3,1\n";
  }
  const auto bad = run(dir, "fit --data bad.csv --family poisson --rank 1 --iterations 100 --out-dir o");
  CHECK(bad.code == 2);
  CHECK(bad.err.find("row 2") != std::string::npos);
  CHECK(bad.err.find("'x1'") != std::string::npos);

  CHECK(run(dir, "").code == 2);
  CHECK(run(dir, "fit --family poisson").code == 2);
  CHECK(run(dir, "simulate --out a.csv --truth a.json --scheme mixed").code == 2);
}

TEST_CASE("config file values sit between flags and defaults") {
  TempDir dir;
  {
    std::ofstream out(dir.file("cfg.json"));
    out << R"({"n": 30, "seed": 9, "family": "poisson"})";
  }
  REQUIRE(run(dir, "simulate --config cfg.json --out a.csv --truth a.json").code == 0);
  CHECK(data_rows(dir.file("a.csv")) == 30);
  CHECK(load(dir.file("a.json"))["family"] == "poisson");
  REQUIRE(run(dir, "simulate --config cfg.json --n 25 --out b.csv --truth b.json").code == 0);
  CHECK(data_rows(dir.file("b.csv")) == 25);
  {
    std::ofstream out(dir.file("bad.json"));
    out << R"({"n": 30, "colour": "blue"})";
  }
  const auto r = run(dir, "simulate --config bad.json --out c.csv --truth c.json");
  CHECK(r.code == 2);
  CHECK(r.err.find("colour") != std::string::npos);
}

TEST_CASE("bench-approx emits the fixed schema and is exact at full sampling") {
  TempDir dir;
  REQUIRE(run(dir, "bench-approx --n 60 --ranks 10,30 --seeds 2 --out bench.csv").code == 0);
  const auto t = sprp::io::read_csv(dir.file("bench.csv"));
  CHECK(t.header == std::vector<std::string>{"nu", "method", "alpha", "rank", "seed", "subspace_dist", "eig_err"});
  // 2 nu x 2 ranks x 2 seeds x (deterministic + 3 random powers)
  CHECK(t.rows.size() == 2 * 2 * 2 * 4);
  const auto rank_col = t.column("rank");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string& method = t.rows[r][t.column("method")];
    CHECK((method == "deterministic" || method == "random"));
    CHECK((method == "deterministic") == t.rows[r][t.column("alpha")].empty());
    if (t.number(r, rank_col) == 30.0) {  // k = 2m = n
      CHECK(t.number(r, t.column("subspace_dist")) < 1e-6);
      CHECK(t.number(r, t.column("eig_err")) < 1e-6);
    }
  }
}

TEST_CASE("study smoke run and empty model list") {
  TempDir dir;
  REQUIRE(run(dir, "study --family poisson --n 50 --replicates 5 --grid 4 --rank 5 --iterations 300 --phi-grid 20 --out s.csv --manifest m.json").code == 0);
  const auto t = sprp::io::read_csv(dir.file("s.csv"));
  CHECK(t.header == std::vector<std::string>{"metric", "FRP", "RRP", "A-RRP"});
  std::vector<std::string> metrics;
  for (const auto& row : t.rows) metrics.push_back(row[0]);
  for (const char* m : {"beta1_mean", "beta1_coverage", "beta1_ci_length", "beta1_mse", "beta2_mean",
                        "beta2_coverage", "beta2_ci_length", "beta2_mse", "sigma2_mean", "phi_mean",
                        "tau2_mean", "pmse"}) {
    CHECK(std::find(metrics.begin(), metrics.end(), m) != metrics.end());
  }
  const json manifest = load(dir.file("m.json"));
  CHECK(manifest["replicate_seeds"].size() == 5);
  CHECK(manifest.contains("version"));
  CHECK(run(dir, "study --family poisson --n 50 --replicates 1 --models \"\" --out e.csv").code == 2);
}
