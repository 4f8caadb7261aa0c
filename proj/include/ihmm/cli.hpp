#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ihmm/diagnostics.hpp"
#include "ihmm/init.hpp"
#include "ihmm/model.hpp"

namespace ihmm {

struct FitConfig {
  std::filesystem::path data;
  std::filesystem::path output_dir = "fit";
  InitMethod init = InitMethod::kKMeans;
  long iterations = 1500;
  long burn_in = 500;
  long thinning = 1;
  int chains = 1;
  std::uint64_t seed = 1;
  KRange k_range{};
  std::optional<Priors> priors;  // vague defaults when unset
  int workers = 0;
  bool write_files = true;

  void validate() const;
};

struct ChainSummary {
  int index = 0;
  bool ok = false;
  std::string failure;
  InitAssignment init;
  ConvergenceReport report;
  int k_hat = 0;  // modal occupied count after burn-in
  ChainTrace trace;
};

struct StateSummary {
  int label = 0;  // 1-based
  long size = 0;
  Vector mean;
  Matrix covariance;
  double covariance_trace = 0.0;
};

struct FitResult {
  std::vector<ChainSummary> chains;
  std::vector<int> converged;  // indices into chains
  /// Per-parameter R-hat over converged chains (empty with fewer than two).
  std::vector<ParameterDiagnostic> rhat;
  Labels map_states;  // 0-based
  std::vector<StateSummary> states;
  bool pooled_all = false;  // no chain converged; MAP used every chain
  int failures = 0;
};

/// Runs the chains, diagnoses them and summarizes the pooled MAP partition.
/// Writes artifacts to `output_dir` when `write_files` is set.
FitResult fit_dataset(const Dataset& data, const FitConfig& config);

/// Posterior mean of each state's mean and covariance given the partition.
std::vector<StateSummary> summarize_states(const Dataset& data, const Labels& labels, const Priors& priors);

/// Entry point of the `ihmm` executable. Returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace ihmm
