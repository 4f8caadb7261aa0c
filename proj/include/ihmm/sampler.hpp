#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "ihmm/init.hpp"
#include "ihmm/model.hpp"
#include "ihmm/rng.hpp"

namespace ihmm {

struct SamplerConfig {
  long iterations = 1500;
  long burn_in = 0;
  long thinning = 1;
  bool record_states = true;
  /// Keep every `state_stride`-th recorded state sequence.
  long state_stride = 1;
  std::optional<int> max_active_states = 1000;
  /// Auxiliary-variable passes per concentration update.
  int concentration_iterations = 20;
  /// Passes over (table counts, concentrations, beta) per sweep.
  int hyper_cycles = 10;
  bool check_invariants = false;
  RngStream rng{};

  void validate() const;
};

/// Transition counts n_jk (or table counts m_jk) plus the pseudo-row for s_1.
struct CountMatrix {
  Eigen::ArrayXXi transitions;  // K x K
  Eigen::ArrayXi initial;       // K

  static CountMatrix zeros(int k);
  /// Tallies s_{t-1} -> s_t and the one-hot count of s_1.
  static CountMatrix tally(const Labels& states, int k);
  int num_states() const { return static_cast<int>(initial.size()); }
  /// Column sums over all rows including the initial pseudo-row.
  Eigen::ArrayXi column_totals() const;
  long total() const;
};

/// u_t ~ U(0, pi_{s_{t-1}, s_t}); u_1 uses the initial row.
void sample_slices(ModelState& state, RngStream& rng);

/// Breaks new sticks until every row's remainder mass is below min_t u_t. New
/// states get a transition row from DP(alpha, beta) and NIW-prior emissions.
/// Returns the number of states added.
int extend_truncation(ModelState& state, const NiwPrior& prior, RngStream& rng,
                      std::optional<int> max_states = std::nullopt);

/// K x T matrix of log N(y_t | mu_k, Sigma_k).
Matrix emission_log_likelihoods(const Matrix& observations, const std::vector<Gaussian>& emissions);

/// Draws s_{1:T} given slices: transition (i, j) at step t is admissible iff pi_ij > u_t.
Labels ffbs_restricted(const Matrix& log_lik, const ModelState& state, RngStream& rng);
Labels ffbs_restricted(const Dataset& data, const ModelState& state, RngStream& rng);

/// Drops unoccupied states and relabels by first appearance. Their beta and
/// transition mass moves into the remainder entries.
void compact_states(ModelState& state);

/// Row j ~ Dir(alpha beta_1 + n_j1, ..., alpha beta_K + n_jK, alpha beta_rest).
void sample_transition_rows(ModelState& state, const CountMatrix& counts, RngStream& rng);

/// Chinese-restaurant seating: customer i opens a table w.p. a / (a + i - 1), a = alpha beta_k.
CountMatrix sample_table_counts(const CountMatrix& counts, double alpha, const std::vector<double>& beta,
                                RngStream& rng);

/// (beta_1, ..., beta_K, beta_rest) ~ Dir(m_.1, ..., m_.K, gamma). Zero-count states get zero weight.
std::vector<double> sample_beta(const CountMatrix& tables, double gamma, RngStream& rng);

/// Conjugate NIW update from the rows of `points`.
NiwPrior niw_posterior(const NiwPrior& prior, const Matrix& points);

/// Occupied states from their NIW posterior, unoccupied ones from the prior.
std::vector<Gaussian> sample_emissions(const Matrix& observations, const Labels& states, int num_states,
                                       const NiwPrior& prior, RngStream& rng);

/// Auxiliary-variable Gibbs: HDP scheme for alpha, Escobar-West for gamma.
std::pair<double, double> sample_concentrations(const CountMatrix& counts, const CountMatrix& tables,
                                                double alpha, double gamma, const ConcentrationPrior& prior,
                                                RngStream& rng, int iterations = 20);

/// Single-chain beam sampler. Each `sweep` runs slices, truncation, FFBS,
/// compaction, table counts, concentrations, beta, transition rows and emissions.
class BeamSampler {
 public:
  BeamSampler(const Dataset& data, const Labels& initial_labels, Priors priors, SamplerConfig config);

  void sweep();
  long iteration() const { return iteration_; }
  const ModelState& state() const { return state_; }
  const SamplerConfig& config() const { return config_; }
  const Priors& priors() const { return priors_; }
  TraceRecord record() const;

  /// Structured-text (JSON) checkpoint with the full state and RNG counter.
  void save_checkpoint(const std::filesystem::path& path) const;
  static BeamSampler load_checkpoint(const Dataset& data, const std::filesystem::path& path);

 private:
  BeamSampler(const Dataset& data, Priors priors, SamplerConfig config);
  void update_parameters(bool update_concentrations);

  const Dataset* data_;
  Priors priors_;
  SamplerConfig config_;
  RngStream rng_;
  ModelState state_;
  long iteration_ = 0;
};

using SweepObserver = std::function<void(long iteration, const ModelState& state)>;

/// Runs `config.iterations` sweeps and records the trace after burn-in with thinning.
ChainTrace run_chain(const Dataset& data, const InitAssignment& init, const Priors& priors,
                     const SamplerConfig& config, const SweepObserver& observer = {});

}  // namespace ihmm
