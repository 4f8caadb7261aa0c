#include "ihmm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "ihmm/error.hpp"
#include "ihmm/log.hpp"

namespace ihmm {

namespace {

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double choose2(long n) { return 0.5 * static_cast<double>(n) * static_cast<double>(n - 1); }

// Spectral density at zero via non-overlapping batch means; trailing remainder dropped.
double batch_means_spectrum(std::span<const double> x, std::size_t batches) {
  batches = std::clamp<std::size_t>(batches, 2, x.size());
  const std::size_t size = x.size() / batches;
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) means[b] = mean_of(x.subspan(b * size, size));
  const double m = mean_of(means);
  double ss = 0.0;
  for (double v : means) ss += (v - m) * (v - m);
  return static_cast<double>(size) * ss / static_cast<double>(batches - 1);
}

bool is_constant(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

void summarize(ConvergenceReport& report, const std::vector<double>& z_values, std::vector<double> acts) {
  std::size_t ok = 0;
  for (double z : z_values) ok += std::abs(z) < 2.0 ? 1 : 0;
  report.geweke_success_rate = z_values.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(z_values.size());
  report.median_act = acts.empty() ? std::numeric_limits<double>::quiet_NaN() : median(acts);
  report.act_q975 = acts.empty() ? std::numeric_limits<double>::quiet_NaN() : quantile(std::move(acts), 0.975);
  report.verdict = !z_values.empty() && convergence_verdict(report.geweke_success_rate, report.median_act);
}

ParameterDiagnostic diagnose_series(const ChainTrace::Series& s) {
  ParameterDiagnostic d;
  d.name = s.name;
  try {
    d.geweke_z = geweke_z(s.values);
  } catch (const Error& e) {
    d.note = e.what();
  }
  try {
    d.act = autocorrelation_time(s.values);
  } catch (const Error& e) {
    d.note += d.note.empty() ? e.what() : std::string("; ") + e.what();
  }
  return d;
}

}  // namespace

ContingencyTable contingency_table(const Labels& a, const Labels& b) {
  if (a.size() != b.size()) throw ParameterError("label vectors differ in length");
  std::map<int, std::size_t> ra, rb;
  for (int v : a) ra.emplace(v, 0);
  for (int v : b) rb.emplace(v, 0);
  std::size_t i = 0;
  for (auto& [k, v] : ra) v = i++;
  i = 0;
  for (auto& [k, v] : rb) v = i++;
  ContingencyTable t;
  t.counts.assign(ra.size(), std::vector<long>(rb.size(), 0));
  t.row_sums.assign(ra.size(), 0);
  t.col_sums.assign(rb.size(), 0);
  for (std::size_t n = 0; n < a.size(); ++n) {
    const std::size_t r = ra[a[n]], c = rb[b[n]];
    ++t.counts[r][c];
    ++t.row_sums[r];
    ++t.col_sums[c];
  }
  t.total = static_cast<long>(a.size());
  return t;
}

double adjusted_rand_index(const Labels& a, const Labels& b) {
  if (a.size() != b.size()) throw ParameterError("label vectors differ in length");
  if (a.size() < 2) throw ParameterError("ARI needs at least two observations");
  const ContingencyTable t = contingency_table(a, b);
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& row : t.counts) {
    for (long n : row) index += choose2(n);
  }
  for (long n : t.row_sums) sa += choose2(n);
  for (long n : t.col_sums) sb += choose2(n);
  const double expected = sa * sb / choose2(t.total);
  const double denom = 0.5 * (sa + sb) - expected;
  if (denom == 0.0) return 1.0;
  return (index - expected) / denom;
}

double geweke_z(std::span<const double> trace, double first_fraction, double last_fraction) {
  const std::size_t n = trace.size();
  if (n < 100) throw ParameterError("Geweke diagnostic needs at least 100 values");
  if (!(first_fraction > 0.0) || !(last_fraction > 0.0) || first_fraction + last_fraction > 1.0) {
    throw ParameterError("Geweke window fractions must be positive and sum to at most 1");
  }
  const auto na = static_cast<std::size_t>(std::floor(first_fraction * static_cast<double>(n)));
  const auto nb = static_cast<std::size_t>(std::floor(last_fraction * static_cast<double>(n)));
  const auto first = trace.subspan(0, na);
  const auto last = trace.subspan(n - nb, nb);
  const auto batches = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  const double sa = batch_means_spectrum(first, batches);
  const double sb = batch_means_spectrum(last, batches);
  const double var = sa / static_cast<double>(na) + sb / static_cast<double>(nb);
  if (!(var > 0.0)) throw UndefinedStatisticError("Geweke statistic undefined: both windows have zero variance");
  return (mean_of(first) - mean_of(last)) / std::sqrt(var);
}

double autocorrelation_time(std::span<const double> trace) {
  const std::size_t n = trace.size();
  if (n < 50) throw ParameterError("autocorrelation time needs at least 50 values");
  if (is_constant(trace)) {
    log_warning("autocorrelation time of a constant trace set to 1");
    return 1.0;
  }
  const double m = mean_of(trace);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = trace[i] - m;
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += x[i] * x[i + lag];
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return 1.0;
  // Pairs Gamma_k = rho_2k + rho_2k+1, summed while positive and made monotone.
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double rho0 = k == 0 ? 1.0 : autocov(2 * k) / c0;
    double g = rho0 + autocov(2 * k + 1) / c0;
    if (g <= 0.0) break;
    g = std::min(g, prev);
    prev = g;
    sum += g;
  }
  return std::max(1.0, 2.0 * sum - 1.0);
}

double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw ParameterError("R-hat needs at least two chains");
  std::size_t n = chains.front().size();
  for (const auto& c : chains) n = std::min(n, c.size());
  if (n < 2) throw ParameterError("R-hat needs chains of length at least 2");
  const double m = static_cast<double>(chains.size());
  std::vector<double> means;
  double w = 0.0;
  for (const auto& c : chains) {
    const std::span<const double> s(c.data(), n);
    const double mu = mean_of(s);
    double ss = 0.0;
    for (double v : s) ss += (v - mu) * (v - mu);
    w += ss / static_cast<double>(n - 1);
    means.push_back(mu);
  }
  w /= m;
  const double grand = mean_of(means);
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= static_cast<double>(n) / (m - 1.0);
  if (!(w > 0.0)) {
    if (b == 0.0) return 1.0;
    throw UndefinedStatisticError("R-hat undefined: zero within-chain variance");
  }
  const double nd = static_cast<double>(n);
  return std::sqrt(((nd - 1.0) / nd * w + b / nd) / w);
}

bool convergence_verdict(double geweke_success_rate, double median_act) {
  return geweke_success_rate > 0.75 && median_act < 2.0;
}

ConvergenceReport convergence_report(const std::vector<ChainTrace::Series>& series) {
  ConvergenceReport report;
  std::vector<double> zs, acts;
  for (const auto& s : series) {
    auto d = diagnose_series(s);
    if (d.geweke_z) zs.push_back(*d.geweke_z);
    if (d.act) acts.push_back(*d.act);
    report.parameters.push_back(std::move(d));
  }
  summarize(report, zs, std::move(acts));
  return report;
}

ConvergenceReport convergence_report(const ChainTrace& trace, long burn_in) {
  return convergence_report(trace.scalar_series(burn_in));
}

ConvergenceReport convergence_report(std::span<const ChainTrace> traces, long burn_in) {
  if (traces.empty()) throw ParameterError("no chains to diagnose");
  if (traces.size() == 1) return convergence_report(traces.front(), burn_in);
  std::vector<std::vector<ChainTrace::Series>> per_chain;
  for (const auto& t : traces) per_chain.push_back(t.scalar_series(burn_in));
  ConvergenceReport report;
  std::vector<double> zs, acts;
  for (const auto& s : per_chain.front()) {
    ParameterDiagnostic pooled;
    pooled.name = s.name;
    std::vector<std::vector<double>> values;
    for (const auto& chain : per_chain) {
      auto it = std::find_if(chain.begin(), chain.end(), [&](const auto& c) { return c.name == s.name; });
      if (it == chain.end()) continue;
      values.push_back(it->values);
      auto d = diagnose_series(*it);
      if (d.geweke_z) zs.push_back(*d.geweke_z);
      if (d.act) acts.push_back(*d.act);
    }
    if (values.size() == traces.size()) {
      try {
        pooled.rhat = gelman_rubin(values);
      } catch (const Error& e) {
        pooled.note = e.what();
      }
    } else {
      pooled.note = "parameter missing in some chains";
    }
    report.parameters.push_back(std::move(pooled));
  }
  summarize(report, zs, std::move(acts));
  return report;
}

std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weights) {
  // Hungarian algorithm (potentials form) on cost = -weight.
  const std::size_t n = weights.size();
  if (n == 0) return {};
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -weights[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> result(n, -1);
  for (std::size_t j = 1; j <= n; ++j) result[p[j] - 1] = static_cast<int>(j - 1);
  return result;
}

Labels map_states(const std::vector<Labels>& draws, std::size_t reference) {
  if (draws.empty()) throw ParameterError("no state draws to summarize");
  if (reference >= draws.size()) throw ParameterError("reference draw out of range");
  Labels ref = draws[reference];
  const int kr = compact_labels(ref);
  const std::size_t t_len = ref.size();

  std::vector<std::vector<long>> votes(t_len);
  for (const auto& raw : draws) {
    if (raw.size() != t_len) throw ParameterError("state draws differ in length");
    Labels d = raw;
    const int kd = compact_labels(d);
    const auto n = static_cast<std::size_t>(std::max(kr, kd));
    std::vector<std::vector<double>> agree(n, std::vector<double>(n, 0.0));
    for (std::size_t t = 0; t < t_len; ++t) agree[static_cast<std::size_t>(d[t])][static_cast<std::size_t>(ref[t])] += 1.0;
    const auto match = max_weight_assignment(agree);
    for (std::size_t t = 0; t < t_len; ++t) {
      const auto label = static_cast<std::size_t>(match[static_cast<std::size_t>(d[t])]);
      if (votes[t].size() <= label) votes[t].resize(label + 1, 0);
      ++votes[t][label];
    }
  }
  Labels out(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    out[t] = static_cast<int>(std::max_element(votes[t].begin(), votes[t].end()) - votes[t].begin());
  }
  compact_labels(out);
  return out;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ParameterError("quantile of an empty set");
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

std::optional<double> sample_sd(const std::vector<double>& values) {
  if (values.size() < 2) return std::nullopt;
  const double m = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace ihmm
