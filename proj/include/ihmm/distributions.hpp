#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ihmm/rng.hpp"

namespace ihmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Lower Cholesky factor L of an SPD matrix, L * L^T = A.
class CholeskyFactor {
 public:
  CholeskyFactor() = default;
  /// Throws ParameterError when `spd` is not symmetric positive definite.
  explicit CholeskyFactor(const Matrix& spd);
  /// Wraps an existing lower-triangular factor with positive diagonal.
  static CholeskyFactor from_lower(Matrix lower);

  const Matrix& lower() const { return lower_; }
  Eigen::Index dim() const { return lower_.rows(); }
  Matrix reconstruct() const { return lower_ * lower_.transpose(); }
  /// log det(A) = 2 * sum log L_ii.
  double log_det() const { return log_det_; }
  /// Solves L x = b.
  Vector solve_lower(const Vector& b) const;
  /// Solves L X = B column-wise.
  Matrix solve_lower(const Matrix& b) const;

 private:
  Matrix lower_;
  double log_det_ = 0.0;
};

/// Returns true when `a` admits a Cholesky factorization.
bool is_spd(const Matrix& a);

/// Normal-Inverse-Wishart hyperparameters.
struct NiwPrior {
  Vector mean;      // mu_0
  double kappa = 0.01;
  double dof = 0.0;  // nu_0, must exceed P - 1
  Matrix scale;      // Lambda_0

  /// Vague defaults: mu_0 = 0, Lambda_0 = I, kappa_0 = 0.01, nu_0 = P + 2.
  static NiwPrior vague(Eigen::Index dim);
  Eigen::Index dim() const { return mean.size(); }
  /// Throws ParameterError on inconsistent or invalid hyperparameters.
  void validate() const;
};

/// A multivariate Gaussian with its covariance factorization.
struct Gaussian {
  Vector mean;
  Matrix cov;
  CholeskyFactor chol;

  Gaussian() = default;
  Gaussian(Vector m, Matrix c) : mean(std::move(m)), cov(std::move(c)), chol(cov) {}
};

/// Gamma(shape, rate) draw. Marsaglia-Tsang; shapes below one use the U^(1/a) boost.
double sample_gamma(double shape, double rate, RngStream& rng);
/// log of a Gamma(shape, 1) draw; stays finite for tiny shapes where the draw underflows.
double sample_log_gamma(double shape, RngStream& rng);
double sample_beta(double a, double b, RngStream& rng);
double sample_chi_squared(double dof, RngStream& rng);

/// Dirichlet draw; entries may underflow to exactly zero for tiny concentrations.
Vector sample_dirichlet(std::span<const double> concentration, RngStream& rng);

/// Stick-breaking prefix (beta_1, ..., beta_K, beta_rest) of a GEM(gamma) draw,
/// broken until beta_rest < truncation_mass. Last entry is the unbroken remainder.
std::vector<double> sample_gem(double gamma, double truncation_mass, RngStream& rng);

/// Inverse-Wishart(dof, scale) via the Bartlett decomposition.
Matrix sample_inverse_wishart(double dof, const CholeskyFactor& scale, RngStream& rng);

/// Sigma ~ IW(nu_0, Lambda_0), mu | Sigma ~ N(mu_0, Sigma / kappa_0).
Gaussian sample_niw(const NiwPrior& prior, RngStream& rng);

double mvn_logpdf(const Vector& y, const Vector& mean, const CholeskyFactor& chol);
/// Multivariate Student-t log density with location, scale factor and dof.
double mvt_logpdf(const Vector& y, const Vector& location, const CholeskyFactor& scale, double dof);

/// Row-wise log densities: result(k, t) = log N(observations.row(t) | components[k]).
Matrix gaussian_log_densities(const Matrix& observations, const std::vector<Gaussian>& components);

Vector sample_mvn(const Vector& mean, const CholeskyFactor& chol, RngStream& rng);
/// Gaussian scale mixture: location + z / sqrt(w), z ~ N(0, Sigma), w ~ Gamma(dof/2, dof/2).
Vector sample_mvt(const Vector& location, const CholeskyFactor& scale, double dof, RngStream& rng);

}  // namespace ihmm
