#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "ihmm/distributions.hpp"
#include "ihmm/error.hpp"

using namespace ihmm;

namespace {

// Regularized lower incomplete gamma P(a, x) by its power series.
double gamma_p(double a, double x) {
  if (x <= 0) return 0.0;
  double term = 1.0 / a, sum = term;
  for (int n = 1; n < 1000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (term < sum * 1e-16) break;
  }
  return std::exp(a * std::log(x) - x - std::lgamma(a)) * sum;
}

Matrix random_spd(int p, RngStream& rng) {
  Matrix a(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) a(i, j) = rng.normal();
  return a * a.transpose() + 0.5 * Matrix::Identity(p, p);
}

}  // namespace

TEST_CASE("gamma moments") {
  RngStream rng(1, 1);
  const int n = 1000000;
  double s = 0;
  for (int i = 0; i < n; ++i) s += sample_gamma(1.0, 1.0, rng);
  CHECK(std::abs(s / n - 1.0) < 0.01);

  double m = 0, v = 0;
  std::vector<double> xs(n);
  for (auto& x : xs) { x = sample_gamma(2.0, 1.0, rng); m += x; }
  m /= n;
  for (double x : xs) v += (x - m) * (x - m);
  CHECK(std::abs(v / (n - 1) - 2.0) < 0.05);

  double small = 0;
  for (int i = 0; i < n; ++i) small += sample_gamma(0.3, 2.0, rng);
  CHECK(std::abs(small / n - 0.15) < 0.003);
}

TEST_CASE("gamma matches its CDF (KS)") {
  RngStream rng(2, 1);
  const int n = 100000;
  std::vector<double> xs(n);
  for (auto& x : xs) x = sample_gamma(3.5, 2.0, rng);
  std::sort(xs.begin(), xs.end());
  double d = 0;
  for (int i = 0; i < n; ++i) {
    double f = gamma_p(3.5, 2.0 * xs[i]);
    d = std::max({d, std::abs(f - double(i) / n), std::abs(f - double(i + 1) / n)});
  }
  CHECK(d < 0.005);
}

TEST_CASE("gamma rejects bad parameters") {
  RngStream rng;
  CHECK_THROWS_AS(sample_gamma(0.0, 1.0, rng), ParameterError);
  CHECK_THROWS_AS(sample_gamma(1.0, -1.0, rng), ParameterError);
  CHECK_THROWS_AS(sample_gamma(NAN, 1.0, rng), ParameterError);
}

TEST_CASE("dirichlet means and normalization") {
  RngStream rng(3, 1);
  const int n = 1000000;
  auto check_means = [&](std::vector<double> a) {
    double total = 0;
    for (double x : a) total += x;
    Vector mean = Vector::Zero(a.size());
    for (int i = 0; i < n; ++i) {
      Vector d = sample_dirichlet(a, rng);
      REQUIRE(std::abs(d.sum() - 1.0) < 1e-12);
      REQUIRE((d.array() >= 0).all());
      mean += d;
    }
    mean /= n;
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(mean[k] - a[k] / total) < 0.01);
  };
  check_means({1, 1});
  check_means({10, 1});
  check_means({2, 3, 5});
}

TEST_CASE("dirichlet rejects bad input") {
  RngStream rng;
  std::vector<double> empty, bad{1.0, 0.0};
  CHECK_THROWS_AS(sample_dirichlet(empty, rng), ParameterError);
  CHECK_THROWS_AS(sample_dirichlet(bad, rng), ParameterError);
}

TEST_CASE("GEM prefix") {
  RngStream rng(4, 1);
  auto w = sample_gem(1e-6, 0.01, rng);
  CHECK(w.front() > 0.999);

  const int n = 100000;
  double first = 0;
  for (int i = 0; i < n; ++i) {
    auto g = sample_gem(1.0, 0.5, rng);
    double s = 0;
    for (double x : g) { REQUIRE(x > 0); s += x; }
    REQUIRE(std::abs(s - 1.0) < 1e-12);
    REQUIRE(g.back() < 0.5);
    first += g.front();
  }
  CHECK(std::abs(first / n - 0.5) < 0.01);
}

TEST_CASE("GEM stick count agrees with direct stick breaking") {
  RngStream rng(5, 1), oracle(5, 2);
  const int n = 50000;
  double lib = 0, direct = 0;
  for (int i = 0; i < n; ++i) lib += double(sample_gem(2.0, 0.01, rng).size() - 1);
  for (int i = 0; i < n; ++i) {
    double rest = 1.0;
    int k = 0;
    while (rest >= 0.01) {
      double v = 1.0 - std::pow(oracle.uniform(), 1.0 / 2.0);  // Beta(1, 2)
      rest *= 1.0 - v;
      ++k;
    }
    direct += k;
  }
  CHECK(std::abs(lib / direct - 1.0) < 0.02);
}

TEST_CASE("cholesky reconstructs and rejects non-SPD") {
  RngStream rng(6, 1);
  for (int p : {1, 3, 8}) {
    Matrix a = random_spd(p, rng);
    CholeskyFactor c(a);
    CHECK((c.reconstruct() - a).norm() / a.norm() < 1e-10);
    CHECK(c.log_det() == doctest::Approx(std::log(a.determinant())).epsilon(1e-10));
  }
  Matrix bad(2, 2);
  bad << 1, 2, 2, 1;
  CHECK_THROWS_AS(CholeskyFactor{bad}, ParameterError);
  CHECK_FALSE(is_spd(bad));
}

TEST_CASE("NIW prior moments") {
  RngStream rng(7, 1);
  const int n = 1000000;
  NiwPrior p1{Vector::Zero(1), 1.0, 5.0, Matrix::Identity(1, 1)};
  double s = 0;
  for (int i = 0; i < n; ++i) s += sample_niw(p1, rng).cov(0, 0);
  CHECK(std::abs(s / n - 1.0 / 3.0) < 0.01);

  NiwPrior p2{Vector::Zero(2), 1.0, 6.0, Matrix::Identity(2, 2)};
  Matrix acc = Matrix::Zero(2, 2);
  for (int i = 0; i < n / 4; ++i) {
    auto g = sample_niw(p2, rng);
    REQUIRE(is_spd(g.cov));
    acc += g.cov;
  }
  acc /= n / 4;
  CHECK(std::abs(acc(0, 0) - 1.0 / 3.0) < 0.01);
  CHECK(std::abs(acc(1, 1) - 1.0 / 3.0) < 0.01);
  CHECK(std::abs(acc(0, 1)) < 0.01);
}

TEST_CASE("mean given covariance has covariance Sigma / kappa") {
  RngStream rng(8, 1);
  Matrix sigma(2, 2);
  sigma << 2.0, 0.6, 0.6, 1.0;
  const double kappa = 0.25;
  CholeskyFactor c(sigma / kappa);
  const int n = 400000;
  Matrix acc = Matrix::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    Vector x = sample_mvn(Vector::Zero(2), c, rng);
    acc += x * x.transpose();
  }
  acc /= n;
  CHECK(((acc - sigma / kappa).array().abs() < 0.05).all());
}

TEST_CASE("NIW validation") {
  NiwPrior p = NiwPrior::vague(3);
  CHECK(p.kappa == 0.01);
  CHECK(p.dof == 5.0);
  CHECK_NOTHROW(p.validate());
  p.scale(0, 0) = -1.0;
  CHECK_THROWS_AS(p.validate(), ParameterError);
}

TEST_CASE("mvn log density closed forms") {
  CholeskyFactor i1(Matrix::Identity(1, 1));
  CHECK(mvn_logpdf(Vector::Zero(1), Vector::Zero(1), i1) == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi)));
  CholeskyFactor i2(Matrix::Identity(2, 2));
  CHECK(mvn_logpdf(Vector::Ones(2), Vector::Zero(2), i2) ==
        doctest::Approx(-std::log(2 * std::numbers::pi) - 1.0).epsilon(1e-14));

  RngStream rng(9, 1);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix s = random_spd(5, rng);
    Vector y(5), m(5);
    for (int i = 0; i < 5; ++i) { y[i] = rng.normal(); m[i] = rng.normal(); }
    Vector d = y - m;
    double oracle = -2.5 * std::log(2 * std::numbers::pi) - 0.5 * std::log(s.determinant()) -
                    0.5 * d.dot(s.inverse() * d);
    CHECK(std::abs(mvn_logpdf(y, m, CholeskyFactor(s)) - oracle) < 1e-9);
  }
  CHECK_THROWS_AS(mvn_logpdf(Vector::Zero(3), Vector::Zero(2), i2), ParameterError);
}

TEST_CASE("mvt log density, 1-D closed form") {
  CholeskyFactor one(Matrix::Identity(1, 1));
  const double nu = 5, x = 1.3;
  double oracle = std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2) - 0.5 * std::log(nu * std::numbers::pi) -
                  (nu + 1) / 2 * std::log1p(x * x / nu);
  Vector y(1);
  y << x;
  CHECK(mvt_logpdf(y, Vector::Zero(1), one, nu) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("student-t variance, kurtosis and Mahalanobis tail") {
  RngStream rng(10, 1);
  const int n = 1000000;
  CholeskyFactor one(Matrix::Identity(1, 1));
  double s = 0, ss = 0;
  for (int i = 0; i < n; ++i) {
    double x = sample_mvt(Vector::Zero(1), one, 5.0, rng)[0];
    s += x; ss += x * x;
  }
  CHECK(std::abs(ss / n - (s / n) * (s / n) - 5.0 / 3.0) < 0.02);

  double m2 = 0, m4 = 0;
  for (int i = 0; i < n; ++i) {
    double x = sample_mvt(Vector::Zero(1), one, 1e6, rng)[0];
    m2 += x * x; m4 += x * x * x * x;
  }
  m2 /= n; m4 /= n;
  CHECK(std::abs(m4 / (m2 * m2) - 3.0) < 0.1);

  // d^2 / 2 ~ F(2, nu); its CDF is 1 - (1 + 2x/nu)^(-nu/2).
  const double nu = 5;
  double q99 = 2.0 * (nu / 2.0) * (std::pow(0.01, -2.0 / nu) - 1.0);
  CholeskyFactor i2(Matrix::Identity(2, 2));
  std::vector<double> d2(n);
  for (auto& d : d2) d = sample_mvt(Vector::Zero(2), i2, nu, rng).squaredNorm();
  std::nth_element(d2.begin(), d2.begin() + n * 99 / 100, d2.end());
  CHECK(std::abs(d2[n * 99 / 100] / q99 - 1.0) < 0.03);
}

TEST_CASE("sampling is a pure function of the stream") {
  NiwPrior p = NiwPrior::vague(3);
  RngStream a(12, 3), b(12, 3);
  for (int i = 0; i < 50; ++i) {
    auto ga = sample_niw(p, a), gb = sample_niw(p, b);
    CHECK(ga.mean == gb.mean);
    CHECK(ga.cov == gb.cov);
  }
}

TEST_CASE("gaussian_log_densities matches per-point evaluation") {
  RngStream rng(13, 1);
  std::vector<Gaussian> comps;
  for (int k = 0; k < 3; ++k) comps.push_back(Gaussian(Vector::Constant(2, k), random_spd(2, rng)));
  Matrix y(4, 2);
  for (int i = 0; i < 8; ++i) y.data()[i] = rng.normal();
  Matrix ll = gaussian_log_densities(y, comps);
  for (int k = 0; k < 3; ++k)
    for (int t = 0; t < 4; ++t)
      CHECK(ll(k, t) == doctest::Approx(mvn_logpdf(y.row(t).transpose(), comps[k].mean, comps[k].chol)));
}
