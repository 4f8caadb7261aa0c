#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ihmm/distributions.hpp"

namespace ihmm {

/// State labels are 0-based everywhere inside the library. Files use 1-based labels.
using Labels = std::vector<int>;

/// T x P observations plus optional ground-truth states.
struct Dataset {
  Matrix observations;  // one row per time point
  std::optional<Labels> true_states;
  std::vector<std::string> column_names;

  Eigen::Index length() const { return observations.rows(); }
  Eigen::Index dim() const { return observations.cols(); }
  /// T >= 2, P >= 1, finite entries, contiguous truth labels.
  void validate() const;
};

/// Reads a CSV dataset. The header row is optional; a final header column named
/// `state` holds 1-based ground-truth labels.
Dataset load_dataset_csv(const std::filesystem::path& path);
void save_dataset_csv(const Dataset& data, const std::filesystem::path& path);

/// Gamma hyperpriors on the concentrations, alpha ~ Gamma(a_alpha, b_alpha) (rate form).
struct ConcentrationPrior {
  double a_alpha = 1.0;
  double b_alpha = 1.0;
  double a_gamma = 2.0;
  double b_gamma = 1.0;

  void validate() const;
};

struct Priors {
  NiwPrior niw;
  ConcentrationPrior concentration;

  static Priors defaults(Eigen::Index dim) { return {NiwPrior::vague(dim), {}}; }
};

/// Full beam-sampler state over K represented states.
///
/// `beta` and every row of `trans` carry K + 1 entries: the last one is the
/// unbroken remainder mass of the stick. `initial` is the distribution of s_1,
/// drawn from DP(alpha, beta) like any transition row.
struct ModelState {
  Labels states;
  std::vector<double> beta;
  Matrix trans;     // K x (K + 1)
  Vector initial;   // K + 1
  std::vector<Gaussian> emissions;
  double alpha = 1.0;
  double gamma = 1.0;
  std::vector<double> slices;

  int num_states() const { return static_cast<int>(emissions.size()); }
  /// Probability of entering s_t: initial[s_0] for t = 0, trans(s_{t-1}, s_t) after.
  double entry_probability(std::size_t t) const;
  /// Number of distinct labels in `states`.
  int occupied_count() const;
  /// Throws InternalError naming the first violated invariant. Slice bounds only
  /// hold between slice sampling and the transition update, hence the flag.
  void check_invariants(double tol = 1e-10, bool check_slices = false) const;
};

/// Complete-data log joint log p(s, y | pi, theta).
double log_likelihood(const ModelState& state, const Dataset& data);

struct TraceRecord {
  long iteration = 0;
  double log_likelihood = 0.0;
  double alpha = 0.0;
  double gamma = 0.0;
  int occupied = 0;
  /// First coordinate of each occupied state's mean, most occupied state first
  /// (ties by smaller coordinate).
  std::vector<double> ranked_means;
};

struct ChainTrace {
  std::uint64_t seed = 0;
  std::string init_method;
  long burn_in = 0;
  long iterations = 0;
  long thinning = 1;
  std::vector<TraceRecord> records;
  /// Recorded state sequences and the iteration each belongs to.
  std::vector<Labels> state_draws;
  std::vector<long> state_iterations;

  /// One scalar column per convergence parameter; see `scalar_series`.
  struct Series {
    std::string name;
    std::vector<double> values;
  };
  /// log-likelihood, alpha, gamma, occupied count, and mean_1..mean_m: the ascending
  /// first coordinates of the m most occupied states, where m is the smallest occupied
  /// count seen among records with iteration > `after`.
  std::vector<Series> scalar_series(long after = 0) const;
};

/// One row per record: iteration, log_likelihood, alpha, gamma, k_occupied, mean_1..mean_M.
void write_trace_csv(const ChainTrace& trace, const std::filesystem::path& path);
ChainTrace read_trace_csv(const std::filesystem::path& path);

/// Binary sidecar: "IHMMSTS1", u64 T, u64 count, then per draw u64 iteration and T u32 labels
/// (little endian, 0-based).
void write_states_binary(const ChainTrace& trace, const std::filesystem::path& path);
void read_states_binary(ChainTrace& trace, const std::filesystem::path& path);

/// Relabels by order of first appearance. Returns the number of distinct labels.
int compact_labels(Labels& labels);

}  // namespace ihmm
