#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ihmm/model.hpp"

namespace ihmm {

struct ContingencyTable {
  std::vector<std::vector<long>> counts;  // rows: labels of a, columns: labels of b
  std::vector<long> row_sums;
  std::vector<long> col_sums;
  long total = 0;
};

/// Labels may be arbitrary integers; rows and columns follow ascending label order.
ContingencyTable contingency_table(const Labels& a, const Labels& b);

/// Hubert-Arabie adjusted Rand index. Returns 1 when both partitions are trivial
/// in the same way (the index is 0/0 there).
double adjusted_rand_index(const Labels& a, const Labels& b);

/// Geweke diagnostic comparing the first and last windows. Variances are batch-means
/// spectral estimates at frequency zero with floor(sqrt(n)) batches per window.
/// Throws UndefinedStatisticError when both windows have zero variance.
double geweke_z(std::span<const double> trace, double first_fraction = 0.1, double last_fraction = 0.5);

/// Integrated autocorrelation time with Geyer's initial positive sequence, floored at 1.
/// A constant trace returns 1.
double autocorrelation_time(std::span<const double> trace);

/// Classic potential scale reduction factor. Chains are truncated to the shortest one.
double gelman_rubin(const std::vector<std::vector<double>>& chains);

struct ParameterDiagnostic {
  std::string name;
  std::optional<double> geweke_z;  // missing when undefined
  std::optional<double> act;
  std::optional<double> rhat;
  std::string note;  // reason for a missing value
};

struct ConvergenceReport {
  std::vector<ParameterDiagnostic> parameters;
  /// Share of parameters with a defined z-score whose |z| < 2.
  double geweke_success_rate = 0.0;
  double median_act = 0.0;
  double act_q975 = 0.0;
  bool verdict = false;
};

/// success > 0.75 and median ACT < 2, both strict.
bool convergence_verdict(double geweke_success_rate, double median_act);

/// Diagnostics over the trace scalars with iteration > burn_in.
ConvergenceReport convergence_report(const ChainTrace& trace, long burn_in);
/// Per-chain Geweke and ACT are pooled by averaging z-success and taking the median and
/// 97.5% quantile over all chain-parameter ACTs; R-hat is added per parameter.
ConvergenceReport convergence_report(std::span<const ChainTrace> traces, long burn_in);
/// Same, on named series directly.
ConvergenceReport convergence_report(const std::vector<ChainTrace::Series>& series);

/// Aligns every draw to `reference` by optimal label matching, then takes the
/// per-time-point mode (ties to the lowest label). Output labels are the reference's
/// labels relabeled by first appearance.
Labels map_states(const std::vector<Labels>& draws, std::size_t reference = 0);

/// Maximum-weight perfect matching on a square weight matrix; result[row] = column.
std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weights);

/// Linear interpolation between order statistics: h = (n-1)p.
double quantile(std::vector<double> values, double p);
double median(std::vector<double> values);
/// Sample standard deviation (n-1); missing for fewer than two values.
std::optional<double> sample_sd(const std::vector<double>& values);

}  // namespace ihmm
