#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>
#include <unistd.h>

#include "ihmm/cli.hpp"
#include "ihmm/error.hpp"
#include "ihmm/simulate.hpp"

using namespace ihmm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("ihmm_test_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Captured {
  int code;
  std::string out, err;
};

Captured cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ihmm");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  int code = run_cli(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("simulate writes T rows and P + 1 columns") {
  auto dir = scratch("sim");
  auto file = (dir / "data.csv").string();
  auto r = cli({"simulate", "--omega", "0.1", "--K", "2", "--T", "500", "--P", "5", "--seed", "3", "--out", file});
  REQUIRE(r.code == 0);
  std::ifstream in(file);
  std::string line;
  int rows = 0;
  std::getline(in, line);
  CHECK(line == "y1,y2,y3,y4,y5,state");
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 5);
  }
  CHECK(rows == 500);
  CHECK(fs::exists(dir / "data.params.json"));

  auto again = (dir / "again.csv").string();
  cli({"simulate", "--omega", "0.1", "--K", "2", "--T", "500", "--P", "5", "--seed", "3", "--out", again});
  CHECK(slurp(file) == slurp(again));
}

TEST_CASE("diagnose on the i.i.d. fixture reports convergence") {
  auto dir = scratch("diag");
  auto out = (dir / "report.json").string();
  auto r = cli({"diagnose", std::string(IHMM_TEST_DATA) + "/iid_trace.csv", "--out", out});
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(slurp(out));
  CHECK(j.at("chains").at(0).at("verdict").get<bool>());
  CHECK(r.out.find("verdict converged") != std::string::npos);
}

TEST_CASE("report on an empty directory fails with a clear message") {
  auto dir = scratch("empty");
  auto r = cli({"report", "--results", dir.string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("no results") != std::string::npos);
}

TEST_CASE("usage errors") {
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"fit"}).code == 2);
  auto r = cli({"fit", "--data", "/nonexistent/file.csv"});
  CHECK(r.code == 3);
}

TEST_CASE("fit is deterministic and writes its artifacts") {
  auto dir = scratch("fit");
  ScenarioSpec spec;
  spec.omega = 0.0;
  spec.length = 150;
  spec.dim = 2;
  spec.seed = 5;
  spec.calibration.search_samples = 20000;
  spec.calibration.check_samples = 20000;
  auto g = simulate_hmm(spec);
  FitConfig cfg;
  cfg.iterations = 120;
  cfg.burn_in = 20;
  cfg.chains = 2;
  cfg.seed = 9;
  cfg.output_dir = dir / "a";
  auto a = fit_dataset(g.data, cfg);
  cfg.output_dir = dir / "b";
  cfg.workers = 1;
  auto b = fit_dataset(g.data, cfg);
  CHECK(a.map_states == b.map_states);
  for (auto f : {"map_states.csv", "chain_1_trace.csv", "chain_2_trace.csv", "chains.csv", "state_summary.csv"}) {
    REQUIRE(fs::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  CHECK(fs::exists(dir / "a" / "fit.json"));
  CHECK(a.map_states.size() == 150);
  CHECK(a.chains.size() == 2);

  long total = 0;
  for (const auto& s : a.states) total += s.size;
  CHECK(total == 150);
}

TEST_CASE("state summaries use the NIW posterior mean") {
  Dataset d;
  d.observations.resize(4, 1);
  d.observations << 1.0, 3.0, 10.0, 12.0;
  Priors p = Priors::defaults(1);
  auto s = summarize_states(d, {0, 0, 1, 1}, p);
  REQUIRE(s.size() == 2);
  CHECK(s[0].label == 1);
  CHECK(s[0].size == 2);
  CHECK(s[0].mean[0] == doctest::Approx(2.0 * 2 / 2.01));
}
