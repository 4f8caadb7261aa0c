#include "ihmm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "csv.hpp"
#include "ihmm/error.hpp"

namespace ihmm {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dirichlet concentrations must stay positive; alpha * beta_rest can underflow.
constexpr double kMinConcentration = 1e-300;

int sample_categorical(const double* weights, int n, double total, RngStream& rng) {
  double target = rng.uniform() * total;
  int last_positive = -1;
  for (int i = 0; i < n; ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    target -= weights[i];
    if (target < 0.0) return i;
  }
  return last_positive;
}

Vector posterior_dirichlet_row(const std::vector<double>& beta, double alpha, const int* counts, int k,
                               RngStream& rng) {
  std::vector<double> conc(static_cast<std::size_t>(k) + 1);
  for (int i = 0; i < k; ++i) {
    conc[static_cast<std::size_t>(i)] =
        std::max(alpha * beta[static_cast<std::size_t>(i)] + (counts ? counts[i] : 0), kMinConcentration);
  }
  conc.back() = std::max(alpha * beta.back(), kMinConcentration);
  return sample_dirichlet(conc, rng);
}

}  // namespace

void SamplerConfig::validate() const {
  if (iterations < 1) throw ParameterError("iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations) throw ParameterError("burn-in must satisfy 0 <= burn-in < iterations");
  if (thinning < 1) throw ParameterError("thinning must be positive");
  if (state_stride < 1) throw ParameterError("state stride must be positive");
  if (max_active_states && *max_active_states < 1) throw ParameterError("state cap must be positive");
  if (concentration_iterations < 1) throw ParameterError("concentration iterations must be positive");
  if (hyper_cycles < 1) throw ParameterError("hyperparameter cycles must be positive");
}

CountMatrix CountMatrix::zeros(int k) {
  return {Eigen::ArrayXXi::Zero(k, k), Eigen::ArrayXi::Zero(k)};
}

CountMatrix CountMatrix::tally(const Labels& states, int k) {
  CountMatrix c = zeros(k);
  if (states.empty()) return c;
  c.initial[states.front()] += 1;
  for (std::size_t t = 1; t < states.size(); ++t) c.transitions(states[t - 1], states[t]) += 1;
  return c;
}

Eigen::ArrayXi CountMatrix::column_totals() const {
  return transitions.colwise().sum().transpose() + initial;
}

long CountMatrix::total() const { return transitions.sum() + initial.sum(); }

void sample_slices(ModelState& state, RngStream& rng) {
  const std::size_t t_len = state.states.size();
  state.slices.resize(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    const double p = state.entry_probability(t);
    if (!(p > 0.0)) {
      throw InternalError("zero transition probability at the current assignment, t = " + std::to_string(t));
    }
    state.slices[t] = rng.uniform() * p;
  }
}

int extend_truncation(ModelState& state, const NiwPrior& prior, RngStream& rng, std::optional<int> max_states) {
  if (state.slices.empty()) throw InternalError("extend_truncation called before slice sampling");
  const double min_u = *std::min_element(state.slices.begin(), state.slices.end());
  auto max_remainder = [&] {
    const int k = state.num_states();
    return std::max(state.initial[k], state.trans.col(k).maxCoeff());
  };
  int added = 0;
  while (max_remainder() > min_u) {
    const int k = state.num_states();
    if (max_states && k >= *max_states) {
      throw TruncationError("truncation needs more than " + std::to_string(*max_states) +
                            " states (min slice " + std::to_string(min_u) + ")");
    }
    // Row for the new state, drawn over the current sticks before breaking.
    const Vector new_row = posterior_dirichlet_row(state.beta, state.alpha, nullptr, k, rng);

    const double stick = sample_beta(1.0, state.gamma, rng);
    const double rest = state.beta.back();
    state.beta.back() = stick * rest;
    state.beta.push_back((1.0 - stick) * rest);
    const double a = std::max(state.alpha * state.beta[static_cast<std::size_t>(k)], kMinConcentration);
    const double b = std::max(state.alpha * state.beta.back(), kMinConcentration);

    state.trans.conservativeResize(k + 1, k + 2);
    state.trans.row(k).head(k + 1) = new_row.transpose();
    for (int i = 0; i <= k; ++i) {
      const double remainder = state.trans(i, k);
      const double split = sample_beta(a, b, rng);
      state.trans(i, k) = remainder * split;
      state.trans(i, k + 1) = remainder * (1.0 - split);
    }
    state.initial.conservativeResize(k + 2);
    {
      const double remainder = state.initial[k];
      const double split = sample_beta(a, b, rng);
      state.initial[k] = remainder * split;
      state.initial[k + 1] = remainder * (1.0 - split);
    }
    state.emissions.push_back(sample_niw(prior, rng));
    ++added;
  }
  return added;
}

Matrix emission_log_likelihoods(const Matrix& observations, const std::vector<Gaussian>& emissions) {
  return gaussian_log_densities(observations, emissions);
}

Labels ffbs_restricted(const Matrix& log_lik, const ModelState& state, RngStream& rng) {
  const int k = state.num_states();
  const Eigen::Index t_len = log_lik.cols();
  if (log_lik.rows() != k) throw ParameterError("log-likelihood rows differ from K");
  if (static_cast<Eigen::Index>(state.slices.size()) != t_len) throw ParameterError("slice count differs from T");
  const RowMajorMatrix trans = state.trans.leftCols(k);
  const auto& u = state.slices;

  Matrix filtered = Matrix::Zero(k, t_len);
  std::vector<double> pred(static_cast<std::size_t>(k));
  for (Eigen::Index t = 0; t < t_len; ++t) {
    std::fill(pred.begin(), pred.end(), 0.0);
    const double ut = u[static_cast<std::size_t>(t)];
    if (t == 0) {
      for (int j = 0; j < k; ++j) pred[static_cast<std::size_t>(j)] = state.initial[j] > ut ? 1.0 : 0.0;
    } else {
      for (int i = 0; i < k; ++i) {
        const double f = filtered(i, t - 1);
        if (f == 0.0) continue;
        const double* row = trans.data() + static_cast<Eigen::Index>(i) * k;
        for (int j = 0; j < k; ++j) {
          if (row[j] > ut) pred[static_cast<std::size_t>(j)] += f;
        }
      }
    }
    double m = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) {
      if (pred[static_cast<std::size_t>(j)] > 0.0) m = std::max(m, log_lik(j, t));
    }
    if (!std::isfinite(m)) {
      throw InternalError("no admissible state at t = " + std::to_string(t));
    }
    double total = 0.0;
    for (int j = 0; j < k; ++j) {
      const double pj = pred[static_cast<std::size_t>(j)];
      if (pj > 0.0) {
        const double v = pj * std::exp(log_lik(j, t) - m);
        filtered(j, t) = v;
        total += v;
      }
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw InternalError("forward pass lost all mass at t = " + std::to_string(t));
    }
    filtered.col(t) /= total;
  }

  Labels s(static_cast<std::size_t>(t_len));
  std::vector<double> w(static_cast<std::size_t>(k));
  s.back() = sample_categorical(filtered.col(t_len - 1).data(), k, 1.0, rng);
  for (Eigen::Index t = t_len - 2; t >= 0; --t) {
    const int next = s[static_cast<std::size_t>(t + 1)];
    const double un = u[static_cast<std::size_t>(t + 1)];
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
      const double v = trans(i, next) > un ? filtered(i, t) : 0.0;
      w[static_cast<std::size_t>(i)] = v;
      total += v;
    }
    if (!(total > 0.0)) throw InternalError("backward pass found no admissible predecessor");
    s[static_cast<std::size_t>(t)] = sample_categorical(w.data(), k, total, rng);
  }
  return s;
}

Labels ffbs_restricted(const Dataset& data, const ModelState& state, RngStream& rng) {
  return ffbs_restricted(emission_log_likelihoods(data.observations, state.emissions), state, rng);
}

void compact_states(ModelState& state) {
  const int k = state.num_states();
  std::vector<int> remap(static_cast<std::size_t>(k), -1);
  std::vector<int> kept;
  for (int& s : state.states) {
    auto& r = remap[static_cast<std::size_t>(s)];
    if (r < 0) {
      r = static_cast<int>(kept.size());
      kept.push_back(s);
    }
    s = r;
  }
  const int nk = static_cast<int>(kept.size());
  bool identity = nk == k;
  for (int i = 0; identity && i < nk; ++i) identity = kept[static_cast<std::size_t>(i)] == i;
  if (identity) return;

  std::vector<double> beta(static_cast<std::size_t>(nk) + 1);
  double kept_mass = 0.0;
  for (int i = 0; i < nk; ++i) {
    beta[static_cast<std::size_t>(i)] = state.beta[static_cast<std::size_t>(kept[static_cast<std::size_t>(i)])];
    kept_mass += beta[static_cast<std::size_t>(i)];
  }
  beta.back() = std::max(0.0, 1.0 - kept_mass);

  auto remap_row = [&](const auto& row) {
    Vector out(nk + 1);
    double mass = 0.0;
    for (int j = 0; j < nk; ++j) {
      out[j] = row(kept[static_cast<std::size_t>(j)]);
      mass += out[j];
    }
    out[nk] = std::max(0.0, 1.0 - mass);
    return out;
  };
  Matrix trans(nk, nk + 1);
  for (int i = 0; i < nk; ++i) trans.row(i) = remap_row(state.trans.row(kept[static_cast<std::size_t>(i)])).transpose();
  Vector initial = remap_row(state.initial);

  std::vector<Gaussian> emissions;
  emissions.reserve(static_cast<std::size_t>(nk));
  for (int old : kept) emissions.push_back(std::move(state.emissions[static_cast<std::size_t>(old)]));

  state.beta = std::move(beta);
  state.trans = std::move(trans);
  state.initial = std::move(initial);
  state.emissions = std::move(emissions);
}

void sample_transition_rows(ModelState& state, const CountMatrix& counts, RngStream& rng) {
  const int k = state.num_states();
  if (counts.num_states() != k) throw ParameterError("count matrix size differs from K");
  state.trans.resize(k, k + 1);
  for (int j = 0; j < k; ++j) {
    const Eigen::ArrayXi row = counts.transitions.row(j).transpose();
    state.trans.row(j) = posterior_dirichlet_row(state.beta, state.alpha, row.data(), k, rng).transpose();
  }
  state.initial = posterior_dirichlet_row(state.beta, state.alpha, counts.initial.data(), k, rng);
}

CountMatrix sample_table_counts(const CountMatrix& counts, double alpha, const std::vector<double>& beta,
                                RngStream& rng) {
  const int k = counts.num_states();
  if (static_cast<int>(beta.size()) < k) throw ParameterError("beta shorter than the count matrix");
  auto seat = [&](int n, double a) {
    int tables = 0;
    for (int i = 1; i <= n; ++i) {
      if (i == 1 || rng.uniform() < a / (a + static_cast<double>(i - 1))) ++tables;
    }
    return tables;
  };
  CountMatrix m = CountMatrix::zeros(k);
  for (int j = 0; j < k; ++j) {
    for (int c = 0; c < k; ++c) {
      m.transitions(j, c) = seat(counts.transitions(j, c), alpha * beta[static_cast<std::size_t>(c)]);
    }
  }
  for (int c = 0; c < k; ++c) m.initial[c] = seat(counts.initial[c], alpha * beta[static_cast<std::size_t>(c)]);
  return m;
}

std::vector<double> sample_beta(const CountMatrix& tables, double gamma, RngStream& rng) {
  if (!(gamma > 0.0)) throw ParameterError("gamma must be positive");
  const Eigen::ArrayXi totals = tables.column_totals();
  const int k = tables.num_states();
  std::vector<double> logs(static_cast<std::size_t>(k) + 1, -std::numeric_limits<double>::infinity());
  for (int c = 0; c < k; ++c) {
    if (totals[c] > 0) logs[static_cast<std::size_t>(c)] = sample_log_gamma(totals[c], rng);
  }
  logs.back() = sample_log_gamma(gamma, rng);
  const double m = *std::max_element(logs.begin(), logs.end());
  std::vector<double> beta(logs.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    beta[i] = std::exp(logs[i] - m);
    sum += beta[i];
  }
  for (double& b : beta) b /= sum;
  return beta;
}

NiwPrior niw_posterior(const NiwPrior& prior, const Matrix& points) {
  const double n = static_cast<double>(points.rows());
  if (points.rows() == 0) return prior;
  if (points.cols() != prior.dim()) throw ParameterError("NIW posterior dimension mismatch");
  const Vector mean = points.colwise().mean().transpose();
  const Matrix centered = points.rowwise() - mean.transpose();
  const Matrix scatter = centered.transpose() * centered;
  NiwPrior post;
  post.kappa = prior.kappa + n;
  post.dof = prior.dof + n;
  post.mean = (prior.kappa * prior.mean + n * mean) / post.kappa;
  const Vector diff = mean - prior.mean;
  post.scale = prior.scale + scatter + (prior.kappa * n / post.kappa) * diff * diff.transpose();
  post.scale = 0.5 * (post.scale + post.scale.transpose());
  return post;
}

std::vector<Gaussian> sample_emissions(const Matrix& observations, const Labels& states, int num_states,
                                       const NiwPrior& prior, RngStream& rng) {
  if (static_cast<Eigen::Index>(states.size()) != observations.rows()) {
    throw ParameterError("state sequence length differs from T");
  }
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(num_states));
  for (std::size_t t = 0; t < states.size(); ++t) {
    const int s = states[t];
    if (s < 0 || s >= num_states) throw ParameterError("state label out of range");
    members[static_cast<std::size_t>(s)].push_back(static_cast<Eigen::Index>(t));
  }
  std::vector<Gaussian> out;
  out.reserve(static_cast<std::size_t>(num_states));
  for (const auto& idx : members) {
    if (idx.empty()) {
      out.push_back(sample_niw(prior, rng));
      continue;
    }
    Matrix pts(static_cast<Eigen::Index>(idx.size()), observations.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) pts.row(static_cast<Eigen::Index>(r)) = observations.row(idx[r]);
    out.push_back(sample_niw(niw_posterior(prior, pts), rng));
  }
  return out;
}

std::pair<double, double> sample_concentrations(const CountMatrix& counts, const CountMatrix& tables, double alpha,
                                                double gamma, const ConcentrationPrior& prior, RngStream& rng,
                                                int iterations) {
  prior.validate();
  // Groups are the transition rows plus the initial pseudo-row.
  std::vector<int> group_n;
  const int k = counts.num_states();
  for (int j = 0; j < k; ++j) group_n.push_back(counts.transitions.row(j).sum());
  group_n.push_back(counts.initial.sum());
  const long m_total = tables.total();
  const Eigen::ArrayXi dish_totals = tables.column_totals();
  const int k_occ = static_cast<int>((dish_totals > 0).count());

  for (int it = 0; it < iterations; ++it) {
    double sum_log_w = 0.0;
    int sum_s = 0;
    for (int n : group_n) {
      if (n == 0) continue;
      sum_log_w += std::log(sample_beta(alpha + 1.0, n, rng));
      if (rng.uniform() < n / (n + alpha)) ++sum_s;
    }
    alpha = sample_gamma(prior.a_alpha + static_cast<double>(m_total - sum_s), prior.b_alpha - sum_log_w, rng);
  }

  if (m_total == 0) {
    gamma = sample_gamma(prior.a_gamma, prior.b_gamma, rng);
  } else {
    for (int it = 0; it < iterations; ++it) {
      const double eta = sample_beta(gamma + 1.0, static_cast<double>(m_total), rng);
      const double rate = prior.b_gamma - std::log(eta);
      const double odds = (prior.a_gamma + k_occ - 1.0) / (static_cast<double>(m_total) * rate);
      const double shape =
          rng.uniform() < odds / (1.0 + odds) ? prior.a_gamma + k_occ : prior.a_gamma + k_occ - 1.0;
      gamma = sample_gamma(shape, rate, rng);
    }
  }
  return {alpha, gamma};
}

BeamSampler::BeamSampler(const Dataset& data, Priors priors, SamplerConfig config)
    : data_(&data), priors_(std::move(priors)), config_(std::move(config)), rng_(config_.rng) {
  data.validate();
  config_.validate();
  priors_.niw.validate();
  priors_.concentration.validate();
  if (priors_.niw.dim() != data.dim()) throw ParameterError("NIW prior dimension differs from the data");
}

BeamSampler::BeamSampler(const Dataset& data, const Labels& initial_labels, Priors priors, SamplerConfig config)
    : BeamSampler(data, std::move(priors), std::move(config)) {
  if (static_cast<Eigen::Index>(initial_labels.size()) != data.length()) {
    throw ParameterError("initial labels length differs from T");
  }
  state_.states = initial_labels;
  for (int s : state_.states) {
    if (s < 0) throw ParameterError("initial labels must be non-negative");
  }
  const int k = compact_labels(state_.states);
  state_.beta.assign(static_cast<std::size_t>(k) + 1, 1.0 / (k + 1));
  state_.alpha = priors_.concentration.a_alpha / priors_.concentration.b_alpha;
  state_.gamma = priors_.concentration.a_gamma / priors_.concentration.b_gamma;
  state_.emissions.resize(static_cast<std::size_t>(k));
  state_.trans = Matrix::Zero(k, k + 1);
  state_.initial = Vector::Zero(k + 1);
  update_parameters(false);
}

void BeamSampler::update_parameters(bool update_concentrations) {
  const int k = state_.num_states();
  const CountMatrix counts = CountMatrix::tally(state_.states, k);
  // Tables, concentrations and beta are cycled with the rows integrated out; the
  // rows are then drawn from their full conditional.
  const int cycles = update_concentrations ? config_.hyper_cycles : 1;
  for (int c = 0; c < cycles; ++c) {
    const CountMatrix tables = sample_table_counts(counts, state_.alpha, state_.beta, rng_);
    if (update_concentrations) {
      std::tie(state_.alpha, state_.gamma) =
          sample_concentrations(counts, tables, state_.alpha, state_.gamma, priors_.concentration, rng_,
                                config_.concentration_iterations);
    }
    state_.beta = sample_beta(tables, state_.gamma, rng_);
  }
  sample_transition_rows(state_, counts, rng_);
  state_.emissions = sample_emissions(data_->observations, state_.states, k, priors_.niw, rng_);
}

void BeamSampler::sweep() {
  ++iteration_;
  sample_slices(state_, rng_);
  if (config_.check_invariants) state_.check_invariants(1e-10, true);
  extend_truncation(state_, priors_.niw, rng_, config_.max_active_states);
  const Matrix log_lik = emission_log_likelihoods(data_->observations, state_.emissions);
  if (log_lik.array().isNaN().any() || (log_lik.array() == std::numeric_limits<double>::infinity()).any()) {
    throw NumericalError("non-finite emission likelihood", iteration_);
  }
  state_.states = ffbs_restricted(log_lik, state_, rng_);
  compact_states(state_);
  update_parameters(true);
  if (config_.check_invariants) state_.check_invariants();
}

TraceRecord BeamSampler::record() const {
  TraceRecord r;
  r.iteration = iteration_;
  r.log_likelihood = log_likelihood(state_, *data_);
  if (!std::isfinite(r.log_likelihood)) throw NumericalError("non-finite log-likelihood", iteration_);
  r.alpha = state_.alpha;
  r.gamma = state_.gamma;
  std::vector<int> size(static_cast<std::size_t>(state_.num_states()), 0);
  for (int s : state_.states) ++size[static_cast<std::size_t>(s)];
  std::vector<std::pair<int, double>> occupied;
  for (std::size_t k = 0; k < size.size(); ++k) {
    if (size[k] > 0) occupied.emplace_back(-size[k], state_.emissions[k].mean[0]);
  }
  std::sort(occupied.begin(), occupied.end());
  for (const auto& [neg_size, m] : occupied) r.ranked_means.push_back(m);
  r.occupied = static_cast<int>(r.ranked_means.size());
  return r;
}

namespace {
using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}
}  // namespace

void BeamSampler::save_checkpoint(const std::filesystem::path& path) const {
  json j;
  j["format"] = "ihmm-checkpoint-1";
  j["iteration"] = iteration_;
  j["rng"] = {{"seed", rng_.seed()}, {"stream", rng_.stream_id()}, {"counter", rng_.counter()}};
  j["config"] = {{"iterations", config_.iterations},
                 {"burn_in", config_.burn_in},
                 {"thinning", config_.thinning},
                 {"record_states", config_.record_states},
                 {"state_stride", config_.state_stride},
                 {"max_active_states", config_.max_active_states ? *config_.max_active_states : -1},
                 {"concentration_iterations", config_.concentration_iterations},
                 {"hyper_cycles", config_.hyper_cycles},
                 {"check_invariants", config_.check_invariants}};
  j["priors"] = {{"mu0", vector_to_json(priors_.niw.mean)},
                 {"kappa0", priors_.niw.kappa},
                 {"nu0", priors_.niw.dof},
                 {"lambda0", matrix_to_json(priors_.niw.scale)},
                 {"a_alpha", priors_.concentration.a_alpha},
                 {"b_alpha", priors_.concentration.b_alpha},
                 {"a_gamma", priors_.concentration.a_gamma},
                 {"b_gamma", priors_.concentration.b_gamma}};
  json emissions = json::array();
  for (const auto& e : state_.emissions) {
    emissions.push_back({{"mean", vector_to_json(e.mean)}, {"cov", matrix_to_json(e.cov)}});
  }
  j["state"] = {{"states", state_.states},
                {"beta", state_.beta},
                {"trans", matrix_to_json(state_.trans)},
                {"initial", vector_to_json(state_.initial)},
                {"emissions", std::move(emissions)},
                {"alpha", state_.alpha},
                {"gamma", state_.gamma},
                {"slices", state_.slices}};
  // max_digits10 output keeps every double exact.
  detail::write_file_atomic(path, j.dump());
}

BeamSampler BeamSampler::load_checkpoint(const Dataset& data, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  json j;
  try {
    in >> j;
    if (j.at("format") != "ihmm-checkpoint-1") throw IoError(path.string() + ": unknown checkpoint format");
    Priors priors;
    const auto& p = j.at("priors");
    priors.niw.mean = vector_from_json(p.at("mu0"));
    priors.niw.kappa = p.at("kappa0").get<double>();
    priors.niw.dof = p.at("nu0").get<double>();
    priors.niw.scale = matrix_from_json(p.at("lambda0"));
    priors.concentration = {p.at("a_alpha").get<double>(), p.at("b_alpha").get<double>(),
                            p.at("a_gamma").get<double>(), p.at("b_gamma").get<double>()};
    SamplerConfig config;
    const auto& c = j.at("config");
    config.iterations = c.at("iterations").get<long>();
    config.burn_in = c.at("burn_in").get<long>();
    config.thinning = c.at("thinning").get<long>();
    config.record_states = c.at("record_states").get<bool>();
    config.state_stride = c.at("state_stride").get<long>();
    const int cap = c.at("max_active_states").get<int>();
    config.max_active_states = cap > 0 ? std::optional<int>(cap) : std::nullopt;
    config.concentration_iterations = c.at("concentration_iterations").get<int>();
    config.hyper_cycles = c.at("hyper_cycles").get<int>();
    config.check_invariants = c.at("check_invariants").get<bool>();
    const auto& r = j.at("rng");
    config.rng = RngStream(r.at("seed").get<std::uint64_t>(), r.at("stream").get<std::uint64_t>(),
                           r.at("counter").get<std::uint64_t>());

    BeamSampler s(data, std::move(priors), std::move(config));
    s.iteration_ = j.at("iteration").get<long>();
    const auto& st = j.at("state");
    s.state_.states = st.at("states").get<Labels>();
    s.state_.beta = st.at("beta").get<std::vector<double>>();
    s.state_.trans = matrix_from_json(st.at("trans"));
    s.state_.initial = vector_from_json(st.at("initial"));
    for (const auto& e : st.at("emissions")) {
      s.state_.emissions.emplace_back(vector_from_json(e.at("mean")), matrix_from_json(e.at("cov")));
    }
    s.state_.alpha = st.at("alpha").get<double>();
    s.state_.gamma = st.at("gamma").get<double>();
    s.state_.slices = st.at("slices").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(s.state_.states.size()) != data.length()) {
      throw IoError(path.string() + ": checkpoint length differs from the dataset");
    }
    s.state_.check_invariants(1e-9);
    return s;
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": malformed checkpoint: " + e.what());
  }
}

ChainTrace run_chain(const Dataset& data, const InitAssignment& init, const Priors& priors,
                     const SamplerConfig& config, const SweepObserver& observer) {
  config.validate();
  BeamSampler sampler(data, init.labels, priors, config);
  ChainTrace trace;
  trace.seed = config.rng.seed();
  trace.init_method = std::string(to_string(init.method));
  trace.burn_in = config.burn_in;
  trace.iterations = config.iterations;
  trace.thinning = config.thinning;
  long kept = 0;
  for (long i = 1; i <= config.iterations; ++i) {
    sampler.sweep();
    if (observer) observer(i, sampler.state());
    if (i <= config.burn_in || (i - config.burn_in) % config.thinning != 0) continue;
    trace.records.push_back(sampler.record());
    if (config.record_states && kept % config.state_stride == 0) {
      trace.state_draws.push_back(sampler.state().states);
      trace.state_iterations.push_back(i);
    }
    ++kept;
  }
  return trace;
}

}  // namespace ihmm
