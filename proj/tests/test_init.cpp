#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "ihmm/diagnostics.hpp"
#include "ihmm/error.hpp"
#include "ihmm/init.hpp"

using namespace ihmm;

namespace {

// n points per blob around centers spaced `sep` apart on the first axis.
Matrix blobs(int n, int count, int dim, double sep, RngStream& rng, Labels* truth = nullptr) {
  Matrix x(n * count, dim);
  for (int b = 0; b < count; ++b)
    for (int i = 0; i < n; ++i) {
      for (int d = 0; d < dim; ++d) x(b * n + i, d) = rng.normal();
      x(b * n + i, 0) += sep * b;
      if (truth) truth->push_back(b);
    }
  return x;
}

Matrix column(std::initializer_list<double> v) {
  Matrix m(v.size(), 1);
  int i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST_CASE("uniform init") {
  RngStream rng(1, 1);
  std::vector<int> k(6, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    auto a = uniform_init(6, rng);
    const int k0 = a.selection.at(0).k;
    REQUIRE(k0 >= 2);
    REQUIRE(k0 <= 5);
    REQUIRE(a.num_states <= k0);
    ++k[k0];
  }
  for (int v = 2; v <= 5; ++v) CHECK(std::abs(k[v] / double(n) - 0.25) < 0.01);

  InitAssignment a;
  do a = uniform_init(100000, rng); while (a.num_states != 3);
  std::vector<double> f(3, 0.0);
  for (int s : a.labels) f[s] += 1e-5;
  for (double x : f) CHECK(std::abs(x - 1.0 / 3) < 0.01);

  RngStream r1(2, 2), r2(2, 2);
  CHECK(uniform_init(50, r1).labels == uniform_init(50, r2).labels);
}

TEST_CASE("k-means examples") {
  RngStream rng(3, 1);
  auto two = kmeans(column({0.0, 5.0}), 2, rng);
  CHECK(two.wcss == 0.0);
  CHECK(two.labels[0] != two.labels[1]);

  auto four = kmeans(column({0.0, 0.1, 10.0, 10.1}), 2, rng);
  CHECK(four.wcss == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(four.labels[0] == four.labels[1]);
  CHECK(four.labels[2] == four.labels[3]);
  CHECK(four.labels[0] != four.labels[2]);

  Matrix x = blobs(40, 4, 2, 3.0, rng);
  double last = 1e300;
  for (int k = 1; k <= 6; ++k) {
    RngStream r(4, k);
    double w = kmeans(x, k, r).wcss;
    CHECK(w <= last + 1e-9);
    last = w;
  }
  CHECK_THROWS_AS(kmeans(column({1.0, 1.0, 1.0}), 2, rng), DegenerateInputError);
}

TEST_CASE("PAM examples") {
  auto p = pam(column({0.0, 1.0, 10.0}), 2);
  CHECK(p.cost == doctest::Approx(1.0));
  std::set<Eigen::Index> med(p.medoids.begin(), p.medoids.end());
  CHECK(med.count(2) == 1);

  RngStream rng(5, 1);
  Matrix x = blobs(6, 2, 2, 4.0, rng);
  CHECK(pam(x, static_cast<int>(x.rows())).cost == doctest::Approx(0.0));

  Matrix y = blobs(15, 3, 2, 3.0, rng);
  auto best = pam(y, 3);
  for (int trial = 0; trial < 100; ++trial) {
    std::set<Eigen::Index> m;
    while (m.size() < 3) m.insert(static_cast<Eigen::Index>(rng.uniform_index(y.rows())));
    double cost = 0;
    for (Eigen::Index t = 0; t < y.rows(); ++t) {
      double d = 1e300;
      for (auto j : m) d = std::min(d, (y.row(t) - y.row(j)).norm());
      cost += d;
    }
    CHECK(best.cost <= cost + 1e-9);
  }
}

TEST_CASE("GAP finds three separated blobs") {
  int hits = 0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    RngStream rng(6, s);
    Matrix x = blobs(50, 3, 2, 10.0, rng);
    hits += gap_select(x, ClusterAlgorithm::kKMeans, rng).best_k == 3;
  }
  CHECK(hits >= 19);

  RngStream rng(7, 1);
  Matrix x = blobs(30, 3, 2, 10.0, rng);
  auto g = gap_select(x, ClusterAlgorithm::kPam, rng);
  CHECK(g.best_k == 3);
  CHECK(g.scores.size() == 4);
  CHECK(g.best_labels.size() == 90);
  CHECK(GapOptions{}.references == 25);
}

TEST_CASE("GAP with the Tibshirani rule keeps a single blob small") {
  int smallest = 0;
  const int seeds = 20;
  GapOptions opts;
  opts.rule = GapRule::kTibshirani;
  for (int s = 0; s < seeds; ++s) {
    RngStream rng(8, s);
    Matrix x = blobs(100, 1, 2, 0.0, rng);
    smallest += gap_select(x, ClusterAlgorithm::kKMeans, rng, opts).best_k == 2;
  }
  CHECK(smallest >= 16);
}

TEST_CASE("GMM with one component is the Gaussian MLE") {
  RngStream rng(9, 1);
  Matrix x = blobs(200, 1, 3, 0.0, rng);
  x.col(1) += 0.5 * x.col(0);
  auto fit = gmm_em(x, 1, rng);
  Vector mean = x.colwise().mean().transpose();
  Matrix c = x.rowwise() - mean.transpose();
  Matrix cov = c.transpose() * c / double(x.rows());
  double ll = -0.5 * x.rows() * (3 * std::log(2 * std::numbers::pi) + std::log(cov.determinant()) + 3);
  CHECK(std::abs(fit.log_likelihood - ll) < 1e-8);
  CHECK(fit.parameter_count == 0 + 3 + 6);
  CHECK((fit.components[0].mean - mean).norm() < 1e-10);
}

TEST_CASE("EM is monotone and recovers weights") {
  RngStream rng(10, 1);
  Matrix x = blobs(1000, 2, 2, 8.0, rng);
  auto fit = gmm_em(x, 2, rng);
  for (std::size_t i = 1; i < fit.history.size(); ++i) CHECK(fit.history[i] >= fit.history[i - 1] - 1e-9);
  CHECK(std::abs(fit.weights[0] - 0.5) < 0.05);
  CHECK(std::abs(fit.weights[1] - 0.5) < 0.05);
  CHECK((fit.responsibilities.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-10);
}

TEST_CASE("BIC hand computation and selection") {
  RngStream rng(11, 1);
  Matrix x = column({1.0, 2.0, 3.0, 4.0});
  auto fit = gmm_em(x, 1, rng);
  double ll = -2.0 * (std::log(2 * std::numbers::pi * 1.25) + 1.0);
  CHECK(std::abs(bic(fit, 4) - (-2 * ll + 2 * std::log(4.0))) < 1e-8);

  int twos = 0;
  for (int s = 0; s < 20; ++s) {
    RngStream r(12, s);
    Matrix y = blobs(150, 2, 2, 8.0, r);
    twos += bic_select(y, r).best_k == 2;
  }
  CHECK(twos >= 19);

  RngStream r(13, 1);
  Matrix z = blobs(500, 1, 2, 0.0, r);
  auto sel = bic_select(z, r, KRange{1, 5});
  CHECK(sel.best_k == 1);
}

TEST_CASE("initialize dispatch, determinism and fallback") {
  RngStream gen(14, 1);
  Labels truth;
  Dataset d;
  d.observations = blobs(40, 3, 2, 10.0, gen, &truth);
  for (auto m : {InitMethod::kKMeans, InitMethod::kPam, InitMethod::kMixtures}) {
    RngStream a(15, 1), b(15, 1);
    auto x = initialize(d, m, a);
    auto y = initialize(d, m, b);
    CHECK(x.labels == y.labels);
    CHECK(x.num_states == 3);
    CHECK(adjusted_rand_index(x.labels, truth) == doctest::Approx(1.0));
    CHECK_FALSE(x.fallback_reason);
  }

  Dataset flat;
  flat.observations = Matrix::Ones(20, 2);
  RngStream r(16, 1);
  auto f = initialize(flat, InitMethod::kMixtures, r);
  CHECK(f.fallback_reason);
  CHECK(f.method == InitMethod::kMixtures);
  CHECK(f.num_states >= 1);
  CHECK(parse_init_method("k-means") == InitMethod::kKMeans);
  CHECK_THROWS_AS(parse_init_method("spectral"), ParameterError);
}
