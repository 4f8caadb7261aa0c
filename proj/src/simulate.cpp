#include "ihmm/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <json.hpp>

#include "csv.hpp"
#include "ihmm/error.hpp"
#include "ihmm/log.hpp"

namespace ihmm {

namespace {

// Per-draw terms of the ordered pair (i, j): draws come from component i and the
// squared Mahalanobis distance to j at separation c is c^2 bb + 2 c q1 + q0.
// The draw is assigned to j when that distance is below thr.
struct Direction {
  int from = 0;
  int to = 0;
  double bb = 0.0;
  std::vector<double> q0, q1, thr;
};

Direction make_direction(const Components& comp, const std::vector<CholeskyFactor>& chol, int i, int j,
                         const EmissionFamily& family, long samples, RngStream& rng) {
  const auto p = static_cast<Eigen::Index>(comp.means.front().size());
  Direction d;
  d.from = i;
  d.to = j;
  const Vector b = chol[static_cast<std::size_t>(j)].solve_lower(Vector(comp.means[static_cast<std::size_t>(i)] -
                                                                       comp.means[static_cast<std::size_t>(j)]));
  d.bb = b.squaredNorm();
  const double ld_diff = chol[static_cast<std::size_t>(i)].log_det() - chol[static_cast<std::size_t>(j)].log_det();
  const double pd = static_cast<double>(p);
  d.q0.resize(static_cast<std::size_t>(samples));
  d.q1.resize(static_cast<std::size_t>(samples));
  d.thr.resize(static_cast<std::size_t>(samples));

  constexpr long kBlock = 4096;
  for (long start = 0; start < samples; start += kBlock) {
    const long n = std::min(kBlock, samples - start);
    Matrix z(p, n);
    for (long s = 0; s < n; ++s) {
      for (Eigen::Index r = 0; r < p; ++r) z(r, s) = rng.normal();
      if (family.kind == FamilyKind::kStudentT) z.col(s) *= std::sqrt(family.dof / sample_chi_squared(family.dof, rng));
    }
    const Matrix az = chol[static_cast<std::size_t>(j)].solve_lower(Matrix(chol[static_cast<std::size_t>(i)].lower() * z));
    for (long s = 0; s < n; ++s) {
      const auto k = static_cast<std::size_t>(start + s);
      d.q0[k] = az.col(s).squaredNorm();
      d.q1[k] = b.dot(az.col(s));
      const double zz = z.col(s).squaredNorm();
      if (family.kind == FamilyKind::kGaussian) {
        d.thr[k] = zz + ld_diff;
      } else {
        const double nu = family.dof;
        d.thr[k] = nu * ((1.0 + zz / nu) * std::exp(ld_diff / (nu + pd)) - 1.0);
      }
    }
  }
  return d;
}

double misclassification(const Direction& d, double c) {
  double count = 0.0;
  const double cc = c * c * d.bb;
  for (std::size_t s = 0; s < d.q0.size(); ++s) {
    const double q = cc + 2.0 * c * d.q1[s] + d.q0[s];
    const double eps = 1e-9 * std::max(1.0, std::abs(d.thr[s]));
    if (q < d.thr[s] - eps) {
      count += 1.0;
    } else if (q <= d.thr[s] + eps) {
      count += 0.5;
    }
  }
  return count / static_cast<double>(d.q0.size());
}

OverlapEstimate summarize(const std::vector<Direction>& dirs, int k, double c) {
  OverlapEstimate e;
  e.overlap = Matrix::Zero(k, k);
  e.std_error = Matrix::Zero(k, k);
  for (const auto& d : dirs) {
    const double p = misclassification(d, c);
    e.overlap(d.from, d.to) += p;
    e.overlap(d.to, d.from) += p;
    const double var = p * (1.0 - p) / static_cast<double>(d.q0.size());
    e.std_error(d.from, d.to) += var;
    e.std_error(d.to, d.from) += var;
  }
  e.std_error = e.std_error.cwiseSqrt();
  double sum = 0.0;
  int pairs = 0;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      e.max = std::max(e.max, e.overlap(i, j));
      sum += e.overlap(i, j);
      ++pairs;
    }
  }
  e.average = pairs > 0 ? sum / pairs : 0.0;
  return e;
}

std::vector<Direction> all_directions(const Components& comp, const EmissionFamily& family, long samples,
                                      RngStream& rng) {
  std::vector<CholeskyFactor> chol;
  for (const auto& s : comp.scales) chol.emplace_back(s);
  std::vector<Direction> dirs;
  const auto k = static_cast<int>(comp.means.size());
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      RngStream sub = rng.split(static_cast<std::uint64_t>(i * k + j));
      dirs.push_back(make_direction(comp, chol, i, j, family, samples, sub));
    }
  }
  rng();
  return dirs;
}

Matrix random_rotation(int dim, RngStream& rng) {
  Matrix g(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) g(r, c) = rng.normal();
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(dim, dim);
  const Matrix rr = qr.matrixQR();
  for (int c = 0; c < dim; ++c) {
    if (rr(c, c) < 0.0) q.col(c) *= -1.0;
  }
  return q;
}

void validate_family(const EmissionFamily& family) {
  if (family.kind == FamilyKind::kStudentT && !(family.dof > 2.0)) {
    throw ParameterError("Student-t degrees of freedom must exceed 2");
  }
}

}  // namespace

EmissionFamily parse_family(std::string_view text) {
  if (text == "gaussian") return EmissionFamily::gaussian();
  if (text == "student_t" || text == "t") return EmissionFamily::student_t(5.0);
  const std::string_view prefix = "student_t:";
  if (text.substr(0, prefix.size()) == prefix) {
    double dof = 0.0;
    if (detail::parse_double(std::string(text.substr(prefix.size())), dof)) return EmissionFamily::student_t(dof);
  }
  throw ParameterError("unknown emission family '" + std::string(text) + "'");
}

std::string to_string(const EmissionFamily& family) {
  if (family.kind == FamilyKind::kGaussian) return "gaussian";
  std::string dof = std::to_string(family.dof);
  dof.erase(dof.find_last_not_of('0') + 1);
  if (dof.back() == '.') dof.pop_back();
  return "student_t:" + dof;
}

void ScenarioSpec::validate() const {
  if (num_states < 1) throw ParameterError("K must be positive");
  if (length < 2) throw ParameterError("T must be at least 2");
  if (dim < 1) throw ParameterError("P must be positive");
  if (!(omega >= 0.0 && omega < 0.5)) throw ParameterError("omega must lie in [0, 0.5)");
  if (omega > 0.0 && num_states < 2) throw ParameterError("omega > 0 needs K >= 2");
  validate_family(family);
}

Matrix persistent_transition_matrix(int num_states) {
  if (num_states < 1) throw ParameterError("K must be positive");
  if (num_states == 1) return Matrix::Ones(1, 1);
  const double off = 0.05 / static_cast<double>(num_states - 1);
  Matrix m = Matrix::Constant(num_states, num_states, off);
  m.diagonal().setConstant(0.95);
  return m;
}

OverlapEstimate estimate_pairwise_overlap(const Components& components, const EmissionFamily& family,
                                          long samples, RngStream& rng) {
  validate_family(family);
  const auto k = static_cast<int>(components.means.size());
  if (k < 2) throw ParameterError("overlap needs at least two components");
  if (components.scales.size() != components.means.size()) throw ParameterError("means and scales differ in count");
  if (samples < 1) throw ParameterError("sample count must be positive");
  return summarize(all_directions(components, family, samples, rng), k, 1.0);
}

Calibration calibrate_components(int num_states, int dim, double omega, const EmissionFamily& family,
                                 RngStream& rng, const CalibrationOptions& options) {
  if (num_states < 1 || dim < 1) throw ParameterError("K and P must be positive");
  if (!(omega >= 0.0 && omega < 0.5)) throw ParameterError("omega must lie in [0, 0.5)");
  validate_family(family);

  Calibration cal;
  RngStream shape_rng = rng.split(1);
  Components directions;
  for (int k = 0; k < num_states; ++k) {
    Vector d(dim);
    for (int r = 0; r < dim; ++r) d(r) = shape_rng.normal();
    directions.means.push_back(d);
    Vector eig(dim);
    for (int r = 0; r < dim; ++r) eig(r) = 0.5 + 1.5 * shape_rng.uniform();
    const Matrix q = random_rotation(dim, shape_rng);
    Matrix s = q * eig.asDiagonal() * q.transpose();
    directions.scales.push_back(0.5 * (s + s.transpose()));
  }
  if (num_states == 1) {
    cal.components = directions;
    cal.components.means[0].setZero();
    cal.check.overlap = Matrix::Zero(1, 1);
    cal.check.std_error = Matrix::Zero(1, 1);
    return cal;
  }

  RngStream search_rng = rng.split(2);
  const auto dirs = all_directions(directions, family, options.search_samples, search_rng);
  const double target = omega > 0.0 ? omega : options.zero_target;
  auto f = [&](double c) { return summarize(dirs, num_states, c).summary(options.summary); };

  if (f(0.0) <= target) throw CalibrationError("component shapes alone already overlap less than the target");
  double lo = 0.0, hi = 1.0;
  int doublings = 0;
  while (f(hi) > target) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > options.max_bisections) throw CalibrationError("could not bracket the separation scale");
  }
  for (int it = 0; it < options.max_bisections && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > target ? lo : hi) = mid;
  }
  double c = hi;
  if (omega > 0.0 && std::abs(f(lo) - target) < std::abs(f(hi) - target)) c = lo;

  cal.separation = c;
  cal.components = directions;
  for (auto& m : cal.components.means) m *= c;
  RngStream check_rng = rng.split(3);
  cal.check = estimate_pairwise_overlap(cal.components, family, options.check_samples, check_rng);
  rng();
  const double achieved = cal.check.summary(options.summary);
  const bool ok = omega > 0.0 ? std::abs(achieved - omega) <= options.tolerance : achieved <= options.zero_ceiling;
  if (!ok) {
    throw CalibrationError("calibrated overlap " + std::to_string(achieved) + " misses the target " +
                           std::to_string(omega));
  }
  return cal;
}

GeneratedDataset simulate_hmm(const ScenarioSpec& spec) {
  spec.validate();
  const RngStream root(spec.seed, derive_stream_id({0x51u, static_cast<std::uint64_t>(spec.num_states),
                                                    static_cast<std::uint64_t>(spec.dim),
                                                    static_cast<std::uint64_t>(spec.length)}));
  RngStream cal_rng = root.split(1);
  Calibration cal = calibrate_components(spec.num_states, spec.dim, spec.omega, spec.family, cal_rng, spec.calibration);

  GeneratedDataset out;
  out.transition = persistent_transition_matrix(spec.num_states);
  const auto t_len = static_cast<std::size_t>(spec.length);
  const auto k = static_cast<std::uint64_t>(spec.num_states);
  Labels states(t_len);
  constexpr int kMaxAttempts = 1000;
  for (int attempt = 0;; ++attempt) {
    RngStream s_rng = root.split(100 + static_cast<std::uint64_t>(attempt));
    states[0] = static_cast<int>(s_rng.uniform_index(k));
    for (std::size_t t = 1; t < t_len; ++t) {
      const int prev = states[t - 1];
      double u = s_rng.uniform();
      int next = spec.num_states - 1;
      for (int j = 0; j < spec.num_states; ++j) {
        u -= out.transition(prev, j);
        if (u < 0.0) {
          next = j;
          break;
        }
      }
      states[t] = next;
    }
    std::vector<char> seen(k, 0);
    for (int s : states) seen[static_cast<std::size_t>(s)] = 1;
    const bool all = std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
    if (all || spec.length < 100) break;
    if (attempt + 1 >= kMaxAttempts) throw CalibrationError("state path never visited every state");
    log_warning("simulated path missed a state; redrawing");
  }

  RngStream y_rng = root.split(2);
  std::vector<CholeskyFactor> chol;
  for (const auto& s : cal.components.scales) chol.emplace_back(s);
  Matrix y(spec.length, spec.dim);
  for (std::size_t t = 0; t < t_len; ++t) {
    const auto s = static_cast<std::size_t>(states[t]);
    const Vector draw = spec.family.kind == FamilyKind::kGaussian
                            ? sample_mvn(cal.components.means[s], chol[s], y_rng)
                            : sample_mvt(cal.components.means[s], chol[s], spec.family.dof, y_rng);
    y.row(static_cast<Eigen::Index>(t)) = draw.transpose();
  }
  out.data.observations = std::move(y);
  out.data.true_states = std::move(states);
  out.components = std::move(cal.components);
  out.separation = cal.separation;
  out.overlap = std::move(cal.check);
  out.achieved_overlap = out.overlap.summary(spec.calibration.summary);
  return out;
}

void write_params_json(const GeneratedDataset& generated, const ScenarioSpec& spec, const std::filesystem::path& path) {
  using nlohmann::json;
  auto matrix_json = [](const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      rows.push_back(row);
    }
    return rows;
  };
  json j;
  j["omega"] = spec.omega;
  j["K"] = spec.num_states;
  j["T"] = spec.length;
  j["P"] = spec.dim;
  j["family"] = to_string(spec.family);
  j["seed"] = spec.seed;
  j["overlap_summary"] = spec.calibration.summary == OverlapSummary::kMax ? "max" : "average";
  j["separation"] = generated.separation;
  j["achieved_overlap"] = generated.achieved_overlap;
  j["pairwise_overlap"] = matrix_json(generated.overlap.overlap);
  j["transition"] = matrix_json(generated.transition);
  json means = json::array(), scales = json::array();
  for (const auto& m : generated.components.means) means.push_back(std::vector<double>(m.data(), m.data() + m.size()));
  for (const auto& s : generated.components.scales) scales.push_back(matrix_json(s));
  j["means"] = means;
  j[spec.family.kind == FamilyKind::kGaussian ? "covariances" : "scale_matrices"] = scales;
  detail::write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace ihmm
