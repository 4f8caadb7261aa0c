#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <unistd.h>

#include "ihmm/error.hpp"
#include "ihmm/model.hpp"

using namespace ihmm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("ihmm_test_model_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

// K = 2, P = 1 toy state with unit variances.
ModelState toy_state() {
  ModelState s;
  s.beta = {0.5, 0.3, 0.2};
  s.trans.resize(2, 3);
  s.trans << 0.6, 0.3, 0.1,
             0.2, 0.7, 0.1;
  s.initial.resize(3);
  s.initial << 0.4, 0.5, 0.1;
  Matrix one = Matrix::Identity(1, 1);
  s.emissions = {Gaussian(Vector::Constant(1, -1.0), one), Gaussian(Vector::Constant(1, 2.0), 2.0 * one)};
  return s;
}

double norm_logpdf(double y, double m, double v) {
  return -0.5 * std::log(2 * std::numbers::pi * v) - 0.5 * (y - m) * (y - m) / v;
}

}  // namespace

TEST_CASE("log-likelihood of a single term") {
  ModelState s;
  s.beta = {0.9, 0.1};
  s.trans = Matrix(1, 2);
  s.trans << 0.9, 0.1;
  s.initial = Vector(2);
  s.initial << 0.8, 0.2;
  s.emissions = {Gaussian(Vector::Constant(2, 1.5), Matrix::Identity(2, 2))};
  s.states = {0};
  Dataset d;
  d.observations = Matrix::Constant(1, 2, 1.5);
  CHECK(log_likelihood(s, d) == doctest::Approx(std::log(0.8) - std::log(2 * std::numbers::pi)).epsilon(1e-14));
}

TEST_CASE("log-likelihood hand expansion, T=3 K=2") {
  ModelState s = toy_state();
  s.states = {0, 1, 1};
  Dataset d;
  d.observations.resize(3, 1);
  d.observations << -0.5, 1.0, 3.0;
  double oracle = std::log(0.4) + norm_logpdf(-0.5, -1, 1) + std::log(0.3) + norm_logpdf(1.0, 2, 2) +
                  std::log(0.7) + norm_logpdf(3.0, 2, 2);
  CHECK(std::abs(log_likelihood(s, d) - oracle) < 1e-12);
}

TEST_CASE("log-likelihood is invariant to relabeling") {
  ModelState s = toy_state();
  s.states = {0, 1, 1, 0};
  Dataset d;
  d.observations.resize(4, 1);
  d.observations << -0.5, 1.0, 3.0, -2.0;
  ModelState r = s;
  r.states = {1, 0, 0, 1};
  r.beta = {0.3, 0.5, 0.2};
  r.trans << 0.7, 0.2, 0.1,
             0.3, 0.6, 0.1;
  r.initial << 0.5, 0.4, 0.1;
  std::swap(r.emissions[0], r.emissions[1]);
  CHECK(log_likelihood(s, d) == doctest::Approx(log_likelihood(r, d)).epsilon(1e-14));
}

TEST_CASE("invariant checker") {
  ModelState s = toy_state();
  s.states = {0, 1, 1};
  CHECK_NOTHROW(s.check_invariants());
  CHECK(s.occupied_count() == 2);

  ModelState bad = s;
  bad.trans(0, 0) += 1e-6;
  CHECK_THROWS_AS(bad.check_invariants(), InternalError);
  bad = s;
  bad.beta[0] = 0.6;
  CHECK_THROWS_AS(bad.check_invariants(), InternalError);
  bad = s;
  bad.states[1] = 2;
  CHECK_THROWS_AS(bad.check_invariants(), InternalError);

  s.slices = {0.3, 0.29, 0.69};
  CHECK_NOTHROW(s.check_invariants(1e-10, true));
  s.slices[2] = 0.71;
  CHECK_THROWS_AS(s.check_invariants(1e-10, true), InternalError);
}

TEST_CASE("dataset validation") {
  Dataset d;
  d.observations = Matrix::Zero(1, 2);
  CHECK_THROWS_AS(d.validate(), ParameterError);
  d.observations = Matrix::Zero(3, 2);
  CHECK_NOTHROW(d.validate());
  d.observations(1, 1) = NAN;
  CHECK_THROWS_AS(d.validate(), ParameterError);
  d.observations(1, 1) = 0;
  d.true_states = Labels{0, 2, 2};
  CHECK_THROWS_AS(d.validate(), ParameterError);
}

TEST_CASE("dataset CSV round trip with and without header") {
  Dataset d;
  d.observations.resize(3, 2);
  d.observations << 0.1, -2.5, 1e-8, 3.0, 4.25, 1.0 / 3.0;
  d.true_states = Labels{0, 1, 0};
  d.column_names = {"a", "b"};
  auto p = scratch("data.csv");
  save_dataset_csv(d, p);
  Dataset r = load_dataset_csv(p);
  CHECK(r.observations == d.observations);
  REQUIRE(r.true_states);
  CHECK(*r.true_states == *d.true_states);
  CHECK(r.column_names == d.column_names);

  auto q = scratch("plain.csv");
  std::ofstream(q) << "1,2\n3,4\n5,6\n";
  Dataset plain = load_dataset_csv(q);
  CHECK(plain.length() == 3);
  CHECK(plain.dim() == 2);
  CHECK_FALSE(plain.true_states);

  std::ofstream(q) << "1,2\n3,x\n";
  CHECK_THROWS_AS(load_dataset_csv(q), IoError);
  std::ofstream(q) << "1,2\n3\n";
  CHECK_THROWS_AS(load_dataset_csv(q), IoError);
  CHECK_THROWS_AS(load_dataset_csv(scratch("missing.csv")), IoError);
}

TEST_CASE("trace CSV and state sidecar round trip") {
  ChainTrace t;
  for (long i = 1; i <= 4; ++i) {
    TraceRecord r;
    r.iteration = i * 2;
    r.log_likelihood = -100.0 - 0.125 * i;
    r.alpha = 1.5 + i;
    r.gamma = 0.75;
    r.occupied = i % 2 ? 2 : 3;
    r.ranked_means = r.occupied == 2 ? std::vector<double>{1.0, -1.0} : std::vector<double>{1.0, -1.0, 5.0};
    t.records.push_back(r);
    t.state_draws.push_back(Labels{0, 1, static_cast<int>(i % 3)});
    t.state_iterations.push_back(i * 2);
  }
  auto p = scratch("trace.csv");
  write_trace_csv(t, p);
  ChainTrace r = read_trace_csv(p);
  REQUIRE(r.records.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(r.records[i].iteration == t.records[i].iteration);
    CHECK(r.records[i].log_likelihood == doctest::Approx(t.records[i].log_likelihood).epsilon(1e-12));
    CHECK(r.records[i].alpha == doctest::Approx(t.records[i].alpha));
    CHECK(r.records[i].occupied == t.records[i].occupied);
    CHECK(r.records[i].ranked_means == t.records[i].ranked_means);
  }

  auto b = scratch("states.bin");
  write_states_binary(t, b);
  ChainTrace s;
  read_states_binary(s, b);
  CHECK(s.state_draws == t.state_draws);
  CHECK(s.state_iterations == t.state_iterations);

  std::ofstream(b, std::ios::binary) << "garbage";
  CHECK_THROWS_AS(read_states_binary(s, b), IoError);
}

TEST_CASE("scalar series uses the smallest occupied count") {
  ChainTrace t;
  TraceRecord a;
  a.iteration = 1;
  a.occupied = 3;
  a.ranked_means = {4.0, -1.0, 9.0};
  TraceRecord b = a;
  b.iteration = 2;
  b.occupied = 2;
  b.ranked_means = {-1.0, 4.0};
  t.records = {a, b};
  auto s = t.scalar_series();
  REQUIRE(s.size() == 6);
  CHECK(s[3].name == "k_occupied");
  CHECK(s[4].name == "mean_1");
  CHECK(s[4].values == std::vector<double>{-1.0, -1.0});
  CHECK(s[5].values == std::vector<double>{4.0, 4.0});

  auto later = t.scalar_series(1);
  CHECK(later[0].values.size() == 1);
}

TEST_CASE("compact_labels relabels by first appearance") {
  Labels l{5, 5, 2, 9, 2, 5};
  CHECK(compact_labels(l) == 3);
  CHECK(l == Labels{0, 0, 1, 2, 1, 0});
  Labels one{7};
  CHECK(compact_labels(one) == 1);
  CHECK(one == Labels{0});
}
