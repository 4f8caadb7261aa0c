#include "ihmm/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include "csv.hpp"
#include "ihmm/error.hpp"

namespace ihmm {

void Dataset::validate() const {
  if (length() < 2) throw ParameterError("dataset needs at least two observations");
  if (dim() < 1) throw ParameterError("dataset needs at least one column");
  if (!observations.allFinite()) throw ParameterError("dataset contains non-finite values");
  if (true_states) {
    if (static_cast<Eigen::Index>(true_states->size()) != length()) {
      throw ParameterError("true-state column length differs from observations");
    }
    std::set<int> seen(true_states->begin(), true_states->end());
    if (*seen.begin() != 0 || *seen.rbegin() != static_cast<int>(seen.size()) - 1) {
      throw ParameterError("true-state labels must be contiguous 1..K");
    }
  }
}

Dataset load_dataset_csv(const std::filesystem::path& path) {
  const auto rows = detail::read_csv(path);
  if (rows.empty()) throw IoError(path.string() + ": empty file");
  Dataset data;
  std::size_t first = 0;
  bool has_state = false;
  double tmp;
  const bool header = std::any_of(rows[0].begin(), rows[0].end(),
                                  [&](const std::string& c) { return !detail::parse_double(c, tmp); });
  if (header) {
    data.column_names = rows[0];
    first = 1;
    if (!data.column_names.empty() && data.column_names.back() == "state") {
      has_state = true;
      data.column_names.pop_back();
    }
  }
  if (rows.size() <= first) throw IoError(path.string() + ": no data rows");
  const std::size_t width = rows[first].size();
  const std::size_t p = has_state ? width - 1 : width;
  if (p == 0) throw IoError(path.string() + ": no observation columns");
  if (header && rows[0].size() != width) throw IoError(path.string() + ": header width differs from data");
  data.observations.resize(static_cast<Eigen::Index>(rows.size() - first), static_cast<Eigen::Index>(p));
  Labels truth;
  for (std::size_t r = first; r < rows.size(); ++r) {
    if (rows[r].size() != width) {
      throw IoError(path.string() + ": row " + std::to_string(r + 1) + " has " +
                    std::to_string(rows[r].size()) + " columns, expected " + std::to_string(width));
    }
    for (std::size_t c = 0; c < p; ++c) {
      double v;
      if (!detail::parse_double(rows[r][c], v)) {
        throw IoError(path.string() + ": row " + std::to_string(r + 1) + " column " +
                      std::to_string(c + 1) + " is not numeric: '" + rows[r][c] + "'");
      }
      data.observations(static_cast<Eigen::Index>(r - first), static_cast<Eigen::Index>(c)) = v;
    }
    if (has_state) {
      double v;
      if (!detail::parse_double(rows[r][p], v) || v != std::floor(v) || v < 1) {
        throw IoError(path.string() + ": row " + std::to_string(r + 1) + " has an invalid state label");
      }
      truth.push_back(static_cast<int>(v) - 1);
    }
  }
  if (has_state) data.true_states = std::move(truth);
  data.validate();
  return data;
}

void save_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ostringstream out;
  out << std::setprecision(17);
  const auto p = data.dim();
  for (Eigen::Index c = 0; c < p; ++c) {
    if (c) out << ',';
    if (static_cast<Eigen::Index>(data.column_names.size()) == p) {
      out << data.column_names[static_cast<std::size_t>(c)];
    } else {
      out << 'y' << (c + 1);
    }
  }
  if (data.true_states) out << ",state";
  out << '\n';
  for (Eigen::Index t = 0; t < data.length(); ++t) {
    for (Eigen::Index c = 0; c < p; ++c) {
      if (c) out << ',';
      out << data.observations(t, c);
    }
    if (data.true_states) out << ',' << (*data.true_states)[static_cast<std::size_t>(t)] + 1;
    out << '\n';
  }
  detail::write_file_atomic(path, out.str());
}

void ConcentrationPrior::validate() const {
  for (double v : {a_alpha, b_alpha, a_gamma, b_gamma}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ParameterError("concentration hyperparameters must be positive");
  }
}

double ModelState::entry_probability(std::size_t t) const {
  const int to = states[t];
  return t == 0 ? initial[to] : trans(states[t - 1], to);
}

int ModelState::occupied_count() const {
  std::vector<char> seen(static_cast<std::size_t>(num_states()), 0);
  int n = 0;
  for (int s : states) {
    if (!seen[static_cast<std::size_t>(s)]) {
      seen[static_cast<std::size_t>(s)] = 1;
      ++n;
    }
  }
  return n;
}

void ModelState::check_invariants(double tol, bool check_slices) const {
  const int k = num_states();
  if (k < 1) throw InternalError("no represented states");
  if (static_cast<int>(beta.size()) != k + 1) throw InternalError("beta length differs from K + 1");
  if (trans.rows() != k || trans.cols() != k + 1) throw InternalError("transition matrix shape differs from K x (K + 1)");
  if (initial.size() != k + 1) throw InternalError("initial row length differs from K + 1");
  double bsum = 0.0;
  for (int i = 0; i < k; ++i) {
    if (!(beta[static_cast<std::size_t>(i)] > 0.0)) throw InternalError("non-positive beta entry");
    bsum += beta[static_cast<std::size_t>(i)];
  }
  bsum += beta.back();
  if (!(beta.back() >= 0.0) || std::abs(bsum - 1.0) > tol) throw InternalError("beta does not sum to one");
  for (int i = 0; i < k; ++i) {
    if ((trans.row(i).array() < 0.0).any() || std::abs(trans.row(i).sum() - 1.0) > tol) {
      throw InternalError("transition row " + std::to_string(i) + " does not sum to one");
    }
  }
  if ((initial.array() < 0.0).any() || std::abs(initial.sum() - 1.0) > tol) {
    throw InternalError("initial row does not sum to one");
  }
  for (int s : states) {
    if (s < 0 || s >= k) throw InternalError("state label outside 0..K-1");
  }
  for (const auto& e : emissions) {
    if (!is_spd(e.cov)) throw InternalError("emission covariance is not SPD");
  }
  if (check_slices) {
    if (slices.size() != states.size()) throw InternalError("slice count differs from T");
    for (std::size_t t = 0; t < states.size(); ++t) {
      if (!(slices[t] > 0.0 && slices[t] < entry_probability(t))) {
        throw InternalError("slice u_" + std::to_string(t) + " outside (0, pi)");
      }
    }
  }
}

double log_likelihood(const ModelState& state, const Dataset& data) {
  if (static_cast<Eigen::Index>(state.states.size()) != data.length()) {
    throw ParameterError("state sequence length differs from T");
  }
  double ll = 0.0;
  for (std::size_t t = 0; t < state.states.size(); ++t) {
    const auto& e = state.emissions[static_cast<std::size_t>(state.states[t])];
    ll += std::log(state.entry_probability(t));
    ll += mvn_logpdf(data.observations.row(static_cast<Eigen::Index>(t)).transpose(), e.mean, e.chol);
  }
  return ll;
}

std::vector<ChainTrace::Series> ChainTrace::scalar_series(long after) const {
  std::vector<const TraceRecord*> kept;
  for (const auto& r : records) {
    if (r.iteration > after) kept.push_back(&r);
  }
  std::vector<Series> out(4);
  out[0].name = "log_likelihood";
  out[1].name = "alpha";
  out[2].name = "gamma";
  out[3].name = "k_occupied";
  std::size_t min_k = std::numeric_limits<std::size_t>::max();
  for (const auto* r : kept) {
    out[0].values.push_back(r->log_likelihood);
    out[1].values.push_back(r->alpha);
    out[2].values.push_back(r->gamma);
    out[3].values.push_back(r->occupied);
    min_k = std::min(min_k, r->ranked_means.size());
  }
  if (kept.empty()) return out;
  std::vector<Series> means(min_k);
  for (std::size_t j = 0; j < min_k; ++j) means[j].name = "mean_" + std::to_string(j + 1);
  std::vector<double> top(min_k);
  for (const auto* r : kept) {
    std::copy_n(r->ranked_means.begin(), min_k, top.begin());
    std::sort(top.begin(), top.end());
    for (std::size_t j = 0; j < min_k; ++j) means[j].values.push_back(top[j]);
  }
  for (auto& s : means) out.push_back(std::move(s));
  return out;
}

void write_trace_csv(const ChainTrace& trace, const std::filesystem::path& path) {
  std::size_t max_k = 0;
  for (const auto& r : trace.records) max_k = std::max(max_k, r.ranked_means.size());
  std::ostringstream out;
  out << std::setprecision(17);
  out << "iteration,log_likelihood,alpha,gamma,k_occupied";
  for (std::size_t j = 0; j < max_k; ++j) out << ",mean_" << j + 1;
  out << '\n';
  for (const auto& r : trace.records) {
    out << r.iteration << ',' << r.log_likelihood << ',' << r.alpha << ',' << r.gamma << ',' << r.occupied;
    for (std::size_t j = 0; j < max_k; ++j) {
      out << ',';
      if (j < r.ranked_means.size()) out << r.ranked_means[j];
    }
    out << '\n';
  }
  detail::write_file_atomic(path, out.str());
}

ChainTrace read_trace_csv(const std::filesystem::path& path) {
  const auto rows = detail::read_csv(path);
  if (rows.empty() || rows[0].size() < 5 || rows[0][0] != "iteration") {
    throw IoError(path.string() + ": not a trace CSV (expected header starting with 'iteration')");
  }
  ChainTrace trace;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() < 5) throw IoError(path.string() + ": short row " + std::to_string(r + 1));
    TraceRecord rec;
    double v[5];
    for (int c = 0; c < 5; ++c) {
      if (!detail::parse_double(row[static_cast<std::size_t>(c)], v[c])) {
        throw IoError(path.string() + ": non-numeric cell in row " + std::to_string(r + 1));
      }
    }
    rec.iteration = static_cast<long>(v[0]);
    rec.log_likelihood = v[1];
    rec.alpha = v[2];
    rec.gamma = v[3];
    rec.occupied = static_cast<int>(v[4]);
    for (std::size_t c = 5; c < row.size(); ++c) {
      double m;
      if (row[c].empty()) break;
      if (!detail::parse_double(row[c], m)) throw IoError(path.string() + ": bad mean cell");
      rec.ranked_means.push_back(m);
    }
    if (!trace.records.empty() && rec.iteration <= trace.records.back().iteration) {
      throw IoError(path.string() + ": iteration indices must increase");
    }
    trace.records.push_back(std::move(rec));
  }
  if (!trace.records.empty()) trace.iterations = trace.records.back().iteration;
  return trace;
}

namespace {
constexpr char kStatesMagic[8] = {'I', 'H', 'M', 'M', 'S', 'T', 'S', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}
void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}
std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw IoError("truncated state file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated state file");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
}  // namespace

void write_states_binary(const ChainTrace& trace, const std::filesystem::path& path) {
  std::ostringstream out(std::ios::binary);
  out.write(kStatesMagic, 8);
  const std::uint64_t t = trace.state_draws.empty() ? 0 : trace.state_draws.front().size();
  put_u64(out, t);
  put_u64(out, trace.state_draws.size());
  for (std::size_t d = 0; d < trace.state_draws.size(); ++d) {
    put_u64(out, static_cast<std::uint64_t>(trace.state_iterations[d]));
    for (int s : trace.state_draws[d]) put_u32(out, static_cast<std::uint32_t>(s));
  }
  detail::write_file_atomic(path, out.str());
}

void read_states_binary(ChainTrace& trace, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kStatesMagic, 8) != 0) {
    throw IoError(path.string() + ": bad state file magic");
  }
  const std::uint64_t t = get_u64(in);
  const std::uint64_t n = get_u64(in);
  trace.state_draws.assign(n, Labels(t));
  trace.state_iterations.assign(n, 0);
  for (std::uint64_t d = 0; d < n; ++d) {
    trace.state_iterations[d] = static_cast<long>(get_u64(in));
    for (std::uint64_t i = 0; i < t; ++i) trace.state_draws[d][i] = static_cast<int>(get_u32(in));
  }
}

int compact_labels(Labels& labels) {
  std::unordered_map<int, int> remap;
  for (int& s : labels) {
    auto [it, inserted] = remap.try_emplace(s, static_cast<int>(remap.size()));
    s = it->second;
  }
  return static_cast<int>(remap.size());
}

}  // namespace ihmm
