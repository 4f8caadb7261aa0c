#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "ihmm/distributions.hpp"
#include "ihmm/model.hpp"

namespace ihmm {

enum class FamilyKind { kGaussian, kStudentT };

struct EmissionFamily {
  FamilyKind kind = FamilyKind::kGaussian;
  double dof = 5.0;  // Student-t only

  static EmissionFamily gaussian() { return {}; }
  static EmissionFamily student_t(double dof) { return {FamilyKind::kStudentT, dof}; }
};

/// "gaussian", "student_t" or "student_t:<dof>".
EmissionFamily parse_family(std::string_view text);
std::string to_string(const EmissionFamily& family);

/// Which pairwise summary the calibration targets.
enum class OverlapSummary { kMax, kAverage };

struct CalibrationOptions {
  OverlapSummary summary = OverlapSummary::kMax;
  /// Draws per ordered pair used during the separation search.
  long search_samples = 200000;
  /// Fresh draws per ordered pair for the final check.
  long check_samples = 200000;
  double tolerance = 0.01;
  /// Target for omega = 0; the check requires overlap <= zero_ceiling.
  double zero_target = 1e-4;
  double zero_ceiling = 1e-3;
  int max_bisections = 60;
};

struct ScenarioSpec {
  double omega = 0.0;
  int num_states = 2;
  long length = 500;
  int dim = 5;
  EmissionFamily family{};
  std::uint64_t seed = 0;
  CalibrationOptions calibration{};

  void validate() const;
};

struct OverlapEstimate {
  Matrix overlap;     // symmetric, zero diagonal
  Matrix std_error;
  double max = 0.0;
  double average = 0.0;

  double summary(OverlapSummary which) const { return which == OverlapSummary::kMax ? max : average; }
};

/// Component parameters: location and scale matrix. For the Gaussian family the
/// scale is the covariance.
struct Components {
  std::vector<Vector> means;
  std::vector<Matrix> scales;
};

struct GeneratedDataset {
  Dataset data;
  Components components;
  Matrix transition;
  double separation = 0.0;
  double achieved_overlap = 0.0;
  OverlapEstimate overlap;
};

/// Diagonal 0.95, off-diagonal 0.05/(K-1). K = 1 gives [[1]].
Matrix persistent_transition_matrix(int num_states);

/// Overlap of i and j is P_i(f_j > f_i) + P_j(f_i > f_j), with density ties split evenly.
OverlapEstimate estimate_pairwise_overlap(const Components& components, const EmissionFamily& family,
                                          long samples, RngStream& rng);

struct Calibration {
  Components components;
  double separation = 0.0;
  OverlapEstimate check;
};

/// Random shapes (rotated diagonals with eigenvalues in [0.5, 2]) and random mean
/// directions, with a global separation chosen by bisection so that the overlap
/// summary meets omega. Throws CalibrationError when no separation achieves it.
Calibration calibrate_components(int num_states, int dim, double omega, const EmissionFamily& family,
                                 RngStream& rng, const CalibrationOptions& options = {});

/// A pure function of the spec.
GeneratedDataset simulate_hmm(const ScenarioSpec& spec);

/// Means, scales, transition matrix, family, separation and overlap as JSON.
void write_params_json(const GeneratedDataset& generated, const ScenarioSpec& spec, const std::filesystem::path& path);

}  // namespace ihmm
