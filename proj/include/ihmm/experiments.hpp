#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ihmm/diagnostics.hpp"
#include "ihmm/init.hpp"
#include "ihmm/simulate.hpp"

namespace ihmm {

enum class Profile { kDesk, kFull };
Profile parse_profile(std::string_view name);

struct GridSpec {
  std::vector<double> omegas{0.0, 0.1};
  std::vector<int> num_states{2, 4};
  std::vector<long> lengths{500, 1000};
  std::vector<int> dims{5, 20};
  std::vector<EmissionFamily> families{EmissionFamily::gaussian()};
  std::vector<InitMethod> methods{InitMethod::kKMeans, InitMethod::kPam, InitMethod::kMixtures, InitMethod::kUniform};
  int replications = 5;
  long iterations = 1500;
  long burn_in = 500;
  /// ARI at convergence and K-hat use this many final iterations.
  long final_window = 100;
  std::uint64_t seed = 1;
  InitOptions init{};
  CalibrationOptions calibration{};
  std::filesystem::path output_dir = "results";
  /// Zero means IHMM_WORKERS or the hardware concurrency.
  int workers = 0;
  bool write_traces = true;

  /// Desk: 5 replications per cell. Full: 50.
  static GridSpec profile(Profile p);
  void validate() const;
};

/// Reads a grid from JSON; missing keys keep the values of `base`.
GridSpec grid_from_json(const std::string& text, GridSpec base = {});
std::string grid_to_json(const GridSpec& grid);

struct CellKey {
  double omega = 0.0;
  int num_states = 2;
  long length = 500;
  int dim = 5;
  EmissionFamily family{};

  std::string id() const;
  friend bool operator<(const CellKey& a, const CellKey& b);
};

struct RunResult {
  CellKey cell;
  int replication = 0;
  InitMethod method = InitMethod::kUniform;
  bool ok = false;
  std::string failure;
  int initial_states = 0;
  std::vector<double> ari_trajectory;  // one entry per iteration
  std::vector<int> k_trajectory;
  double ari_final = 0.0;      // last iteration
  double ari_converged = 0.0;  // median over the final window
  int k_hat = 0;               // modal occupied count over the final window
  double log_likelihood = 0.0; // last iteration
  double geweke_success = 0.0;
  double median_act = 0.0;
  double act_q975 = 0.0;
  bool converged = false;
  double achieved_overlap = 0.0;
  double seconds = 0.0;

  std::string id() const;
};

std::string run_to_json(const RunResult& run);
RunResult run_from_json(const std::string& text);

/// Deterministic seed of the dataset for (cell, replication); shared by all methods.
std::uint64_t dataset_seed(const GridSpec& grid, const CellKey& cell, int replication);

/// Simulates, initializes, samples and scores one run.
RunResult execute_run(const GridSpec& grid, const CellKey& cell, int replication, InitMethod method,
                      const GeneratedDataset& data);

using ProgressCallback = std::function<void(const RunResult&, std::size_t done, std::size_t total)>;

/// Runs every (cell, replication, method). Finished runs found under
/// output_dir/runs are loaded instead of recomputed.
std::vector<RunResult> run_grid(const GridSpec& grid, const ProgressCallback& progress = {});

/// Loads every run file under dir/runs.
std::vector<RunResult> load_runs(const std::filesystem::path& dir);

struct CellResult {
  CellKey cell;
  InitMethod method = InitMethod::kUniform;
  int runs = 0;
  int failures = 0;
  double ari_median = 0.0;
  double ari_q025 = 0.0;
  double ari_q975 = 0.0;
  std::optional<double> ari_sd;
  double k_hat_median = 0.0;
  double geweke_mean = 0.0;
  std::optional<double> geweke_sd;
  /// Per-run ACT median and 97.5% quantile, averaged over runs.
  double act_median = 0.0;
  double act_q975 = 0.0;
};

/// One result per (cell, method) with at least one successful run.
std::vector<CellResult> aggregate(const std::vector<RunResult>& runs);

/// Writes aggregate.csv, tables.md, trajectories.csv and failures.csv into `dir`.
/// Throws IoError("no results ...") when `runs` is empty.
void aggregate_tables(const std::vector<RunResult>& runs, const std::filesystem::path& dir);

int resolve_workers(int requested);

}  // namespace ihmm
