#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ihmm/diagnostics.hpp"
#include "ihmm/error.hpp"

using namespace ihmm;

namespace {

// Pair-counting ARI over all n(n-1)/2 pairs.
double brute_ari(const Labels& a, const Labels& b) {
  double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      bool sa = a[i] == a[j], sb = b[i] == b[j];
      n11 += sa && sb;
      n10 += sa && !sb;
      n01 += !sa && sb;
      n00 += !sa && !sb;
    }
  double den = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11);
  return den == 0 ? 1.0 : 2 * (n00 * n11 - n01 * n10) / den;
}

std::vector<double> iid(RngStream& rng, int n) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

std::vector<double> ar1(RngStream& rng, int n, double phi) {
  std::vector<double> x(n);
  double v = rng.normal() / std::sqrt(1 - phi * phi);
  for (auto& o : x) o = v = phi * v + rng.normal();
  return x;
}

}  // namespace

TEST_CASE("ARI examples") {
  Labels a{1, 1, 2, 2, 3};
  CHECK(adjusted_rand_index(a, a) == 1.0);
  CHECK(adjusted_rand_index({0, 1, 2, 3}, {0, 0, 0, 0}) == doctest::Approx(0.0));
  // Pair counts give -0.5 here (see brute_ari); scikit-learn agrees.
  CHECK(adjusted_rand_index({1, 1, 2, 2}, {1, 2, 1, 2}) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(brute_ari({1, 1, 2, 2}, {1, 2, 1, 2}) == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("ARI agrees with pair counting and its properties hold") {
  RngStream rng(1, 1);
  for (int rep = 0; rep < 300; ++rep) {
    const int n = 2 + static_cast<int>(rng.uniform_index(40));
    const int ka = 1 + static_cast<int>(rng.uniform_index(5)), kb = 1 + static_cast<int>(rng.uniform_index(5));
    Labels a(n), b(n);
    for (auto& v : a) v = static_cast<int>(rng.uniform_index(ka));
    for (auto& v : b) v = static_cast<int>(rng.uniform_index(kb));
    double ari = adjusted_rand_index(a, b);
    CHECK(std::abs(ari - brute_ari(a, b)) < 1e-12);
    CHECK(ari == doctest::Approx(adjusted_rand_index(b, a)).epsilon(1e-14));
    CHECK(ari <= 1.0 + 1e-12);
    Labels relabeled = a;
    for (auto& v : relabeled) v = 10 - 3 * v;
    CHECK(adjusted_rand_index(relabeled, b) == doctest::Approx(ari).epsilon(1e-14));
    Labels c = a;
    compact_labels(c);
    CHECK(adjusted_rand_index(a, c) == 1.0);
  }
  CHECK_THROWS_AS(adjusted_rand_index({1, 2}, {1}), ParameterError);
}

TEST_CASE("contingency table") {
  auto t = contingency_table({5, 5, 7}, {0, 1, 1});
  CHECK(t.counts == std::vector<std::vector<long>>{{1, 1}, {0, 1}});
  CHECK(t.row_sums == std::vector<long>{2, 1});
  CHECK(t.col_sums == std::vector<long>{1, 2});
  CHECK(t.total == 3);
}

TEST_CASE("Geweke on i.i.d. traces is close to standard normal") {
  RngStream rng(2, 1);
  const int traces = 10000;
  std::vector<double> z(traces);
  int inside = 0;
  for (auto& v : z) {
    auto x = iid(rng, 1000);
    v = geweke_z(x);
    inside += std::abs(v) < 2;
  }
  CHECK(std::abs(inside / double(traces) - 0.95) < 0.02);
  std::sort(z.begin(), z.end());
  double d = 0;
  for (int i = 0; i < traces; ++i) {
    double f = 0.5 * std::erfc(-z[i] / std::sqrt(2.0));
    d = std::max({d, std::abs(f - double(i) / traces), std::abs(f - double(i + 1) / traces)});
  }
  CHECK(d < 0.05);
}

TEST_CASE("Geweke edge cases") {
  std::vector<double> flat(1000, 2.0), trend(1000);
  for (int i = 0; i < 1000; ++i) trend[i] = i + 1;
  CHECK_THROWS_AS(geweke_z(flat), UndefinedStatisticError);
  RngStream rng(3, 1);
  for (auto& v : trend) v += rng.normal();
  CHECK(std::abs(geweke_z(trend)) > 10);
  std::vector<double> tiny(20, 1.0);
  CHECK_THROWS_AS(geweke_z(tiny), ParameterError);
}

TEST_CASE("autocorrelation time") {
  RngStream rng(4, 1);
  auto x = iid(rng, 10000);
  CHECK(std::abs(autocorrelation_time(x) - 1.0) < 0.2);
  auto y = ar1(rng, 100000, 0.9);
  CHECK(std::abs(autocorrelation_time(y) / 19.0 - 1.0) < 0.15);
  double last = 0;
  for (double phi : {0.1, 0.5, 0.9}) {
    auto z = ar1(rng, 20000, phi);
    double act = autocorrelation_time(z);
    CHECK(act > last);
    CHECK(act >= 1.0);
    last = act;
  }
  std::vector<double> flat(100, 3.0);
  CHECK(autocorrelation_time(flat) == 1.0);
}

TEST_CASE("Gelman-Rubin") {
  RngStream rng(5, 1);
  std::vector<std::vector<double>> same{iid(rng, 10000), iid(rng, 10000), iid(rng, 10000)};
  double r = gelman_rubin(same);
  CHECK(r < 1.05);
  auto scaled = same;
  for (auto& c : scaled)
    for (auto& v : c) v = 3.0 * v - 7.0;
  CHECK(gelman_rubin(scaled) == doctest::Approx(r).epsilon(1e-10));
  std::vector<std::vector<double>> apart{iid(rng, 1000), iid(rng, 1000)};
  for (auto& v : apart[1]) v += 10;
  CHECK(gelman_rubin(apart) > 1.1);
  CHECK_THROWS_AS(gelman_rubin({iid(rng, 100)}), ParameterError);
}

TEST_CASE("convergence report on i.i.d. and trending parameters") {
  RngStream rng(6, 1);
  const int params = 20;
  double rate = 0, act = 0;
  const int reps = 50;
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<ChainTrace::Series> series;
    for (int p = 0; p < params; ++p) series.push_back({"p" + std::to_string(p), iid(rng, 1000)});
    auto report = convergence_report(series);
    rate += report.geweke_success_rate;
    act += report.median_act;
    CHECK(report.verdict);

    auto drifted = series;
    for (int i = 0; i < 1000; ++i) drifted[0].values[i] = i;
    auto worse = convergence_report(drifted);
    bool was_inside = std::abs(*report.parameters[0].geweke_z) < 2;
    CHECK(report.geweke_success_rate - worse.geweke_success_rate ==
          doctest::Approx(was_inside ? 1.0 / params : 0.0));
  }
  CHECK(std::abs(rate / reps - 0.95) < 0.03);
  CHECK(std::abs(act / reps - 1.0) < 0.2);
}

TEST_CASE("undefined z is excluded from the success denominator") {
  RngStream rng(7, 1);
  std::vector<ChainTrace::Series> series{{"flat", std::vector<double>(500, 1.0)}, {"x", iid(rng, 500)}};
  auto r = convergence_report(series);
  CHECK_FALSE(r.parameters[0].geweke_z);
  CHECK_FALSE(r.parameters[0].note.empty());
}

TEST_CASE("verdict thresholds are strict") {
  CHECK_FALSE(convergence_verdict(0.75, 1.0));
  CHECK(convergence_verdict(0.76, 1.99));
  CHECK_FALSE(convergence_verdict(1.0, 2.0));
}

TEST_CASE("multi-chain report adds R-hat") {
  std::vector<ChainTrace> traces(2);
  RngStream rng(8, 1);
  for (auto& t : traces)
    for (int i = 1; i <= 600; ++i) {
      TraceRecord r;
      r.iteration = i;
      r.log_likelihood = rng.normal();
      r.alpha = 1 + 0.1 * rng.normal();
      r.gamma = 2 + 0.1 * rng.normal();
      r.occupied = 2;
      r.ranked_means = {rng.normal(), 5 + rng.normal()};
      t.records.push_back(r);
    }
  auto rep = convergence_report(std::span<const ChainTrace>(traces), 100);
  REQUIRE(rep.parameters.size() == 6);
  for (const auto& p : rep.parameters) {
    if (p.name == "k_occupied") continue;
    REQUIRE(p.rhat);
    CHECK(*p.rhat < 1.05);
  }
}

TEST_CASE("MAP states") {
  Labels x{0, 0, 1, 1, 2};
  CHECK(map_states({x, x, x}) == x);

  Labels swapped{1, 1, 0, 0, 2};
  auto m = map_states({x, swapped, swapped});
  CHECK(adjusted_rand_index(m, x) == 1.0);
  CHECK(adjusted_rand_index(m, swapped) == 1.0);

  // At t = 1 the two draws disagree; the lower reference label wins.
  Labels a{0, 0, 1}, b{0, 1, 1};
  auto tie = map_states({a, b});
  CHECK(tie == Labels{0, 0, 1});

  std::vector<Labels> draws{{0, 1, 1, 2}, {0, 1, 2, 2}, {0, 1, 1, 2}};
  auto base = map_states(draws);
  for (auto& d : draws)
    for (auto& v : d) v = 2 - v;
  CHECK(adjusted_rand_index(map_states(draws), base) == 1.0);
}

TEST_CASE("assignment finds the maximum weight matching") {
  std::vector<std::vector<double>> w{{1, 5, 0}, {4, 2, 0}, {0, 0, 3}};
  CHECK(max_weight_assignment(w) == std::vector<int>{1, 0, 2});
}

TEST_CASE("quantiles and spread") {
  std::vector<double> v{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  CHECK(median(v) == doctest::Approx(0.55));
  CHECK(quantile(v, 0.025) == doctest::Approx(0.1225));
  CHECK(quantile(v, 0.975) == doctest::Approx(0.9775));
  CHECK_FALSE(sample_sd({1.0}));
  CHECK(*sample_sd({1.0, 3.0}) == doctest::Approx(std::sqrt(2.0)));
}
