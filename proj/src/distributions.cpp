#include "ihmm/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ihmm/error.hpp"

namespace ihmm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ParameterError(std::string(what) + " must be positive and finite, got " + std::to_string(v));
  }
}

// Marsaglia & Tsang (2000), shape >= 1, unit rate; returns log of the draw.
double log_gamma_mt(double shape, RngStream& rng) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return std::log(d * v);
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return std::log(d * v);
  }
}

}  // namespace

CholeskyFactor::CholeskyFactor(const Matrix& spd) {
  if (spd.rows() != spd.cols() || spd.rows() == 0) {
    throw ParameterError("Cholesky factorization needs a non-empty square matrix");
  }
  if (!spd.allFinite()) throw ParameterError("matrix has non-finite entries");
  Eigen::LLT<Matrix> llt(spd);
  if (llt.info() != Eigen::Success) throw ParameterError("matrix is not symmetric positive definite");
  lower_ = llt.matrixL();
  const Vector diag = lower_.diagonal();
  if ((diag.array() <= 0.0).any() || !diag.allFinite()) {
    throw ParameterError("matrix is not symmetric positive definite");
  }
  log_det_ = 2.0 * diag.array().log().sum();
}

CholeskyFactor CholeskyFactor::from_lower(Matrix lower) {
  if (lower.rows() != lower.cols()) throw ParameterError("Cholesky factor must be square");
  if ((lower.diagonal().array() <= 0.0).any()) throw ParameterError("Cholesky diagonal must be positive");
  CholeskyFactor f;
  f.lower_ = lower.triangularView<Eigen::Lower>();
  f.log_det_ = 2.0 * f.lower_.diagonal().array().log().sum();
  return f;
}

Vector CholeskyFactor::solve_lower(const Vector& b) const {
  return lower_.triangularView<Eigen::Lower>().solve(b);
}

Matrix CholeskyFactor::solve_lower(const Matrix& b) const {
  return lower_.triangularView<Eigen::Lower>().solve(b);
}

bool is_spd(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0 || !a.allFinite()) return false;
  Eigen::LLT<Matrix> llt(a);
  return llt.info() == Eigen::Success && (Matrix(llt.matrixL()).diagonal().array() > 0.0).all();
}

NiwPrior NiwPrior::vague(Eigen::Index dim) {
  NiwPrior p;
  p.mean = Vector::Zero(dim);
  p.kappa = 0.01;
  p.dof = static_cast<double>(dim) + 2.0;
  p.scale = Matrix::Identity(dim, dim);
  return p;
}

void NiwPrior::validate() const {
  const auto p = mean.size();
  if (p == 0) throw ParameterError("NIW prior has zero dimension");
  if (scale.rows() != p || scale.cols() != p) throw ParameterError("NIW scale dimension mismatch");
  require_positive(kappa, "kappa_0");
  if (!(dof > static_cast<double>(p) - 1.0)) throw ParameterError("nu_0 must exceed P - 1");
  if (!is_spd(scale)) throw ParameterError("Lambda_0 is not SPD");
}

double sample_log_gamma(double shape, RngStream& rng) {
  require_positive(shape, "gamma shape");
  if (shape >= 1.0) return log_gamma_mt(shape, rng);
  // G(a) = G(a + 1) * U^(1/a)
  const double boost = std::log(rng.uniform()) / shape;
  return log_gamma_mt(shape + 1.0, rng) + boost;
}

double sample_gamma(double shape, double rate, RngStream& rng) {
  require_positive(shape, "gamma shape");
  require_positive(rate, "gamma rate");
  const double x = std::exp(sample_log_gamma(shape, rng)) / rate;
  return std::max(x, std::numeric_limits<double>::min());
}

double sample_beta(double a, double b, RngStream& rng) {
  const double la = sample_log_gamma(a, rng);
  const double lb = sample_log_gamma(b, rng);
  // a / (a + b) evaluated in log space
  return 1.0 / (1.0 + std::exp(lb - la));
}

double sample_chi_squared(double dof, RngStream& rng) {
  return 2.0 * sample_gamma(0.5 * dof, 1.0, rng);
}

Vector sample_dirichlet(std::span<const double> concentration, RngStream& rng) {
  if (concentration.empty()) throw ParameterError("Dirichlet needs at least one concentration");
  Vector logs(static_cast<Eigen::Index>(concentration.size()));
  for (std::size_t i = 0; i < concentration.size(); ++i) {
    logs[static_cast<Eigen::Index>(i)] = sample_log_gamma(concentration[i], rng);
  }
  const double m = logs.maxCoeff();
  Vector x = (logs.array() - m).exp();
  return x / x.sum();
}

std::vector<double> sample_gem(double gamma, double truncation_mass, RngStream& rng) {
  require_positive(gamma, "GEM concentration");
  if (!(truncation_mass > 0.0 && truncation_mass < 1.0)) {
    throw ParameterError("truncation mass must lie in (0, 1)");
  }
  std::vector<double> sticks;
  double rest = 1.0;
  while (rest >= truncation_mass) {
    const double v = sample_beta(1.0, gamma, rng);
    double stick = rest * v;
    // Keep every broken stick strictly positive.
    stick = std::max(stick, std::numeric_limits<double>::min());
    sticks.push_back(stick);
    rest -= stick;
    if (rest <= 0.0) rest = std::numeric_limits<double>::min();
  }
  sticks.push_back(rest);
  return sticks;
}

Matrix sample_inverse_wishart(double dof, const CholeskyFactor& scale, RngStream& rng) {
  const Eigen::Index p = scale.dim();
  if (!(dof > static_cast<double>(p) - 1.0)) throw ParameterError("inverse-Wishart dof must exceed P - 1");
  // Bartlett: W = A A^T ~ Wishart(dof, I), A lower triangular.
  Matrix a = Matrix::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    a(i, i) = std::sqrt(sample_chi_squared(dof - static_cast<double>(i), rng));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  // Sigma = C A^{-T} A^{-1} C^T with Lambda = C C^T; A^{-T} via a triangular solve.
  const Matrix a_inv_t =
      a.transpose().triangularView<Eigen::Upper>().solve(Matrix::Identity(p, p));
  const Matrix m = scale.lower().triangularView<Eigen::Lower>() * a_inv_t;
  Matrix sigma = m * m.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

Gaussian sample_niw(const NiwPrior& prior, RngStream& rng) {
  prior.validate();
  const CholeskyFactor scale(prior.scale);
  Matrix sigma = sample_inverse_wishart(prior.dof, scale, rng);
  Gaussian g;
  g.chol = CholeskyFactor(sigma);
  g.cov = std::move(sigma);
  const CholeskyFactor mean_chol = CholeskyFactor::from_lower(g.chol.lower() / std::sqrt(prior.kappa));
  g.mean = sample_mvn(prior.mean, mean_chol, rng);
  return g;
}

double mvn_logpdf(const Vector& y, const Vector& mean, const CholeskyFactor& chol) {
  if (y.size() != mean.size() || y.size() != chol.dim()) {
    throw ParameterError("mvn_logpdf dimension mismatch");
  }
  const Vector z = chol.solve_lower(Vector(y - mean));
  return -0.5 * (static_cast<double>(y.size()) * kLog2Pi + chol.log_det() + z.squaredNorm());
}

double mvt_logpdf(const Vector& y, const Vector& location, const CholeskyFactor& scale, double dof) {
  require_positive(dof, "Student-t dof");
  if (y.size() != location.size() || y.size() != scale.dim()) {
    throw ParameterError("mvt_logpdf dimension mismatch");
  }
  const double p = static_cast<double>(y.size());
  const double d2 = scale.solve_lower(Vector(y - location)).squaredNorm();
  return std::lgamma(0.5 * (dof + p)) - std::lgamma(0.5 * dof) -
         0.5 * p * std::log(dof * std::numbers::pi) - 0.5 * scale.log_det() -
         0.5 * (dof + p) * std::log1p(d2 / dof);
}

Matrix gaussian_log_densities(const Matrix& observations, const std::vector<Gaussian>& components) {
  const Eigen::Index p = observations.cols();
  const Matrix yt = observations.transpose();
  Matrix out(static_cast<Eigen::Index>(components.size()), observations.rows());
  for (std::size_t k = 0; k < components.size(); ++k) {
    const auto& g = components[k];
    if (g.mean.size() != p) throw ParameterError("component dimension differs from the observations");
    Matrix centered = yt.colwise() - g.mean;
    g.chol.lower().triangularView<Eigen::Lower>().solveInPlace(centered);
    const double c = -0.5 * (static_cast<double>(p) * kLog2Pi + g.chol.log_det());
    out.row(static_cast<Eigen::Index>(k)) = (c - 0.5 * centered.colwise().squaredNorm().array()).matrix();
  }
  return out;
}

Vector sample_mvn(const Vector& mean, const CholeskyFactor& chol, RngStream& rng) {
  if (mean.size() != chol.dim()) throw ParameterError("sample_mvn dimension mismatch");
  Vector z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + chol.lower().triangularView<Eigen::Lower>() * z;
}

Vector sample_mvt(const Vector& location, const CholeskyFactor& scale, double dof, RngStream& rng) {
  require_positive(dof, "Student-t dof");
  const Vector z = sample_mvn(Vector::Zero(location.size()), scale, rng);
  const double w = sample_gamma(0.5 * dof, 0.5 * dof, rng);
  return location + z / std::sqrt(w);
}

}  // namespace ihmm
