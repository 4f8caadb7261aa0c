#include "ihmm/init.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ihmm/error.hpp"
#include "ihmm/log.hpp"

namespace ihmm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::Index count_distinct_rows(const Matrix& points) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(points.rows()));
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
      if (points(a, c) != points(b, c)) return points(a, c) < points(b, c);
    }
    return false;
  };
  std::sort(order.begin(), order.end(), less);
  Eigen::Index n = order.empty() ? 0 : 1;
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (less(order[i - 1], order[i])) ++n;
  }
  return n;
}

void check_cluster_count(const Matrix& points, int k) {
  if (k < 1) throw ParameterError("number of clusters must be positive");
  if (k > points.rows()) throw DegenerateInputError("K exceeds the number of points");
  if (k > count_distinct_rows(points)) throw DegenerateInputError("K exceeds the number of distinct points");
}

// Nearest centroid with ties to the lowest index.
int nearest(const Matrix& centroids, const Eigen::RowVectorXd& y, double& best) {
  best = kInf;
  int arg = 0;
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - y).squaredNorm();
    if (d < best) {
      best = d;
      arg = static_cast<int>(c);
    }
  }
  return arg;
}

KMeansResult kmeans_once(const Matrix& points, int k, RngStream& rng, int max_iterations) {
  const Eigen::Index n = points.rows();
  Matrix centroids(k, points.cols());
  // k-means++ seeding
  centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n))));
  std::vector<double> d2(static_cast<std::size_t>(n), kInf);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = (points.row(i) - centroids.row(c - 1)).squaredNorm();
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], d);
      total += d2[static_cast<std::size_t>(i)];
    }
    double target = rng.uniform() * total;
    Eigen::Index pick = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d2[static_cast<std::size_t>(i)] <= 0.0) continue;
      pick = i;
      target -= d2[static_cast<std::size_t>(i)];
      if (target < 0.0) break;
    }
    centroids.row(c) = points.row(pick);
  }

  KMeansResult r;
  r.labels.assign(static_cast<std::size_t>(n), -1);
  std::vector<double> dist(static_cast<std::size_t>(n));
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = nearest(centroids, points.row(i), dist[static_cast<std::size_t>(i)]);
      if (c != r.labels[static_cast<std::size_t>(i)]) {
        r.labels[static_cast<std::size_t>(i)] = c;
        changed = true;
      }
    }
    r.iterations = it + 1;
    if (!changed && it > 0) break;
    // Empty clusters take the point farthest from its centroid.
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (int l : r.labels) ++sizes[static_cast<std::size_t>(l)];
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (sizes[static_cast<std::size_t>(r.labels[static_cast<std::size_t>(i)])] > 1 &&
            dist[static_cast<std::size_t>(i)] > far_d) {
          far_d = dist[static_cast<std::size_t>(i)];
          far = i;
        }
      }
      --sizes[static_cast<std::size_t>(r.labels[static_cast<std::size_t>(far)])];
      r.labels[static_cast<std::size_t>(far)] = c;
      sizes[static_cast<std::size_t>(c)] = 1;
      dist[static_cast<std::size_t>(far)] = 0.0;
    }
    centroids.setZero();
    for (Eigen::Index i = 0; i < n; ++i) centroids.row(r.labels[static_cast<std::size_t>(i)]) += points.row(i);
    for (int c = 0; c < k; ++c) centroids.row(c) /= sizes[static_cast<std::size_t>(c)];
  }
  // Final assignment against the returned centroids.
  r.wcss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double d;
    r.labels[static_cast<std::size_t>(i)] = nearest(centroids, points.row(i), d);
    r.wcss += d;
  }
  r.centroids = std::move(centroids);
  return r;
}

Matrix euclidean_distances(const Matrix& points) {
  const Eigen::Index n = points.rows();
  Matrix d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (points.row(i) - points.row(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

Matrix reference_dataset(const Matrix& points, GapReference kind, RngStream& rng) {
  Matrix ref(points.rows(), points.cols());
  for (Eigen::Index c = 0; c < points.cols(); ++c) {
    if (kind == GapReference::kUniformRange) {
      const double lo = points.col(c).minCoeff();
      const double hi = points.col(c).maxCoeff();
      for (Eigen::Index i = 0; i < points.rows(); ++i) ref(i, c) = lo + (hi - lo) * rng.uniform();
    } else {
      ref.col(c) = points.col(c);
      // Fisher-Yates per column
      for (Eigen::Index i = points.rows() - 1; i > 0; --i) {
        const auto j = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(i + 1)));
        std::swap(ref(i, c), ref(j, c));
      }
    }
  }
  return ref;
}

double safe_log(double w) { return std::log(std::max(w, std::numeric_limits<double>::min())); }

struct Dispersion {
  double log_w;
  Labels labels;
};

Dispersion cluster_dispersion(const Matrix& points, int k, ClusterAlgorithm algorithm, RngStream& rng,
                              const KMeansOptions& options) {
  if (algorithm == ClusterAlgorithm::kKMeans) {
    auto r = kmeans(points, k, rng, options);
    return {safe_log(r.wcss), std::move(r.labels)};
  }
  auto r = pam(points, k);
  return {safe_log(r.squared_cost), std::move(r.labels)};
}

Matrix responsibilities_from_labels(const Labels& labels, int k) {
  Matrix r = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), k);
  for (std::size_t t = 0; t < labels.size(); ++t) r(static_cast<Eigen::Index>(t), labels[t]) = 1.0;
  return r;
}

// M-step; throws DegenerateFitError when a component collapses.
void gmm_m_step(const Matrix& points, const Matrix& resp, double ridge, GmmFit& fit) {
  const Eigen::Index n = points.rows();
  const Eigen::Index p = points.cols();
  const auto k = resp.cols();
  fit.weights.assign(static_cast<std::size_t>(k), 0.0);
  fit.components.clear();
  for (Eigen::Index c = 0; c < k; ++c) {
    const double nk = resp.col(c).sum();
    if (!(nk > 1e-8)) throw DegenerateFitError("mixture component " + std::to_string(c + 1) + " lost all mass");
    fit.weights[static_cast<std::size_t>(c)] = nk / static_cast<double>(n);
    const Vector mean = (points.transpose() * resp.col(c)) / nk;
    const Matrix centered = points.rowwise() - mean.transpose();
    Matrix cov = (centered.transpose() * resp.col(c).asDiagonal() * centered) / nk;
    cov = 0.5 * (cov + cov.transpose());
    if (!is_spd(cov)) {
      cov += ridge * Matrix::Identity(p, p);
      if (!is_spd(cov)) throw DegenerateFitError("mixture component " + std::to_string(c + 1) + " is singular");
    }
    fit.components.emplace_back(mean, cov);
  }
}

// E-step; returns the log-likelihood and fills responsibilities.
double gmm_e_step(const Matrix& points, const GmmFit& fit, Matrix& resp) {
  Matrix logd = gaussian_log_densities(points, fit.components);  // K x T
  for (Eigen::Index c = 0; c < logd.rows(); ++c) logd.row(c).array() += std::log(fit.weights[static_cast<std::size_t>(c)]);
  resp.resize(points.rows(), logd.rows());
  double ll = 0.0;
  for (Eigen::Index t = 0; t < logd.cols(); ++t) {
    const double m = logd.col(t).maxCoeff();
    const Vector w = (logd.col(t).array() - m).exp();
    const double s = w.sum();
    ll += m + std::log(s);
    resp.row(t) = (w / s).transpose();
  }
  return ll;
}

GmmFit gmm_em_once(const Matrix& points, int k, RngStream& rng, const GmmOptions& options) {
  const auto start = kmeans(points, k, rng);
  Matrix resp = responsibilities_from_labels(start.labels, k);
  GmmFit fit;
  double prev = -kInf;
  for (int it = 0; it < options.max_iterations; ++it) {
    gmm_m_step(points, resp, options.ridge, fit);
    const double ll = gmm_e_step(points, fit, resp);
    if (!std::isfinite(ll)) throw DegenerateFitError("mixture log-likelihood is not finite");
    fit.history.push_back(ll);
    fit.iterations = it + 1;
    const bool converged = std::isfinite(prev) && std::abs(ll - prev) < options.tolerance * std::abs(prev);
    prev = ll;
    if (converged) break;
  }
  fit.log_likelihood = prev;
  fit.responsibilities = resp;
  fit.labels.resize(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index t = 0; t < points.rows(); ++t) {
    Eigen::Index arg;
    resp.row(t).maxCoeff(&arg);  // first maximum on ties
    fit.labels[static_cast<std::size_t>(t)] = static_cast<int>(arg);
  }
  const int p = static_cast<int>(points.cols());
  fit.parameter_count = (k - 1) + k * p + k * p * (p + 1) / 2;
  return fit;
}

}  // namespace

std::string_view to_string(InitMethod method) {
  switch (method) {
    case InitMethod::kUniform: return "uniform";
    case InitMethod::kKMeans: return "kmeans";
    case InitMethod::kPam: return "pam";
    case InitMethod::kMixtures: return "mixtures";
  }
  return "unknown";
}

InitMethod parse_init_method(std::string_view name) {
  if (name == "uniform") return InitMethod::kUniform;
  if (name == "kmeans" || name == "k-means") return InitMethod::kKMeans;
  if (name == "pam") return InitMethod::kPam;
  if (name == "mixtures" || name == "gmm") return InitMethod::kMixtures;
  throw ParameterError("unknown initialization method '" + std::string(name) + "'");
}

InitAssignment uniform_init(Eigen::Index length, RngStream& rng) {
  if (length < 2) throw ParameterError("uniform initialization needs T >= 2");
  InitAssignment a;
  a.method = InitMethod::kUniform;
  const int k0 = 2 + static_cast<int>(rng.uniform_index(4));
  a.labels.resize(static_cast<std::size_t>(length));
  for (auto& l : a.labels) l = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(k0)));
  a.num_states = compact_labels(a.labels);
  a.selection.push_back({k0, 0.0, 0.0});
  return a;
}

KMeansResult kmeans(const Matrix& points, int k, RngStream& rng, const KMeansOptions& options) {
  check_cluster_count(points, k);
  if (options.restarts < 1 || options.max_iterations < 1) throw ParameterError("k-means options must be positive");
  KMeansResult best;
  best.wcss = kInf;
  for (int r = 0; r < options.restarts; ++r) {
    RngStream sub = rng.split(static_cast<std::uint64_t>(r));
    auto res = kmeans_once(points, k, sub, options.max_iterations);
    if (res.wcss < best.wcss) best = std::move(res);
  }
  rng();  // advance the parent so consecutive calls differ
  return best;
}

PamResult pam_dissimilarity(const Matrix& d, int k) {
  const Eigen::Index n = d.rows();
  if (d.cols() != n) throw ParameterError("dissimilarity matrix must be square");
  if (k < 1 || k > n) throw DegenerateInputError("K must lie in 1..T for PAM");

  std::vector<Eigen::Index> medoids;
  std::vector<char> is_medoid(static_cast<std::size_t>(n), 0);
  std::vector<double> near(static_cast<std::size_t>(n), kInf);
  // BUILD
  {
    Eigen::Index first;
    d.colwise().sum().minCoeff(&first);
    medoids.push_back(first);
    is_medoid[static_cast<std::size_t>(first)] = 1;
    for (Eigen::Index j = 0; j < n; ++j) near[static_cast<std::size_t>(j)] = d(j, first);
  }
  while (static_cast<int>(medoids.size()) < k) {
    Eigen::Index best = -1;
    double best_gain = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (is_medoid[static_cast<std::size_t>(i)]) continue;
      double gain = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) gain += std::max(near[static_cast<std::size_t>(j)] - d(j, i), 0.0);
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    medoids.push_back(best);
    is_medoid[static_cast<std::size_t>(best)] = 1;
    for (Eigen::Index j = 0; j < n; ++j) near[static_cast<std::size_t>(j)] = std::min(near[static_cast<std::size_t>(j)], d(j, best));
  }

  // SWAP: evaluate every (medoid, candidate) pair per pass, apply the best improving one.
  std::vector<int> near_idx(static_cast<std::size_t>(n));
  std::vector<double> second(static_cast<std::size_t>(n));
  std::vector<double> delta(static_cast<std::size_t>(k));
  auto refresh = [&] {
    for (Eigen::Index j = 0; j < n; ++j) {
      double a = kInf, b = kInf;
      int ia = 0;
      for (int m = 0; m < k; ++m) {
        const double v = d(j, medoids[static_cast<std::size_t>(m)]);
        if (v < a) {
          b = a;
          a = v;
          ia = m;
        } else if (v < b) {
          b = v;
        }
      }
      near[static_cast<std::size_t>(j)] = a;
      second[static_cast<std::size_t>(j)] = b;
      near_idx[static_cast<std::size_t>(j)] = ia;
    }
  };
  refresh();
  for (int pass = 0; pass < 10000; ++pass) {
    double best_delta = 0.0;
    int best_m = -1;
    Eigen::Index best_h = -1;
    const double current = std::accumulate(near.begin(), near.end(), 0.0);
    for (Eigen::Index h = 0; h < n; ++h) {
      if (is_medoid[static_cast<std::size_t>(h)]) continue;
      double shared = 0.0;
      std::fill(delta.begin(), delta.end(), 0.0);
      for (Eigen::Index j = 0; j < n; ++j) {
        const double dj = near[static_cast<std::size_t>(j)];
        const double djh = d(j, h);
        const double gain = std::min(djh - dj, 0.0);
        shared += gain;
        delta[static_cast<std::size_t>(near_idx[static_cast<std::size_t>(j)])] +=
            std::min(djh, second[static_cast<std::size_t>(j)]) - dj - gain;
      }
      for (int m = 0; m < k; ++m) {
        const double total = shared + delta[static_cast<std::size_t>(m)];
        if (total < best_delta) {
          best_delta = total;
          best_m = m;
          best_h = h;
        }
      }
    }
    if (best_m < 0 || best_delta > -1e-12 * std::max(1.0, current)) break;
    is_medoid[static_cast<std::size_t>(medoids[static_cast<std::size_t>(best_m)])] = 0;
    medoids[static_cast<std::size_t>(best_m)] = best_h;
    is_medoid[static_cast<std::size_t>(best_h)] = 1;
    refresh();
  }

  PamResult r;
  r.medoids = medoids;
  r.labels.resize(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    r.labels[static_cast<std::size_t>(j)] = near_idx[static_cast<std::size_t>(j)];
    r.cost += near[static_cast<std::size_t>(j)];
    r.squared_cost += near[static_cast<std::size_t>(j)] * near[static_cast<std::size_t>(j)];
  }
  return r;
}

PamResult pam(const Matrix& points, int k) {
  check_cluster_count(points, k);
  return pam_dissimilarity(euclidean_distances(points), k);
}

GapResult gap_select(const Matrix& points, ClusterAlgorithm algorithm, RngStream& rng, const GapOptions& options) {
  const int kmin = options.k_range.min;
  const int kmax = options.k_range.max;
  if (options.references < 2) throw ParameterError("GAP needs at least two reference datasets");
  if (kmin < 1 || kmax < kmin || kmax >= points.rows()) throw ParameterError("GAP K range must lie within [1, T)");

  GapResult result;
  std::vector<Labels> data_labels;
  for (int k = kmin; k <= kmax; ++k) {
    RngStream sub = rng.split(static_cast<std::uint64_t>(k));
    auto disp = cluster_dispersion(points, k, algorithm, sub, options.kmeans);
    result.log_w.push_back(disp.log_w);
    data_labels.push_back(std::move(disp.labels));
  }
  const auto nk = static_cast<std::size_t>(kmax - kmin + 1);
  const auto b_count = static_cast<std::size_t>(options.references);
  std::vector<std::vector<double>> ref_log_w(nk, std::vector<double>(b_count));
  for (std::size_t b = 0; b < b_count; ++b) {
    RngStream sub = rng.split(1000 + b);
    const Matrix ref = reference_dataset(points, options.reference, sub);
    for (int k = kmin; k <= kmax; ++k) {
      ref_log_w[static_cast<std::size_t>(k - kmin)][b] = cluster_dispersion(ref, k, algorithm, sub, options.kmeans).log_w;
    }
  }
  for (std::size_t i = 0; i < nk; ++i) {
    const auto& v = ref_log_w[i];
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(b_count);
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(b_count - 1));
    result.scores.push_back({kmin + static_cast<int>(i), mean - result.log_w[i],
                             sd * std::sqrt(1.0 + 1.0 / static_cast<double>(b_count))});
  }
  std::size_t pick = 0;
  if (options.rule == GapRule::kGlobalMax) {
    for (std::size_t i = 1; i < nk; ++i) {
      if (result.scores[i].score > result.scores[pick].score) pick = i;
    }
  } else {
    pick = nk - 1;
    for (std::size_t i = 0; i + 1 < nk; ++i) {
      if (result.scores[i].score >= result.scores[i + 1].score - result.scores[i + 1].std_error) {
        pick = i;
        break;
      }
    }
  }
  rng();
  result.best_k = result.scores[pick].k;
  result.best_labels = std::move(data_labels[pick]);
  return result;
}

GmmFit gmm_em(const Matrix& points, int k, RngStream& rng, const GmmOptions& options) {
  check_cluster_count(points, k);
  if (options.restarts < 1) throw ParameterError("GMM restarts must be positive");
  std::optional<GmmFit> best;
  std::string last_error;
  for (int r = 0; r < options.restarts; ++r) {
    RngStream sub = rng.split(static_cast<std::uint64_t>(r));
    try {
      GmmFit fit = gmm_em_once(points, k, sub, options);
      if (!best || fit.log_likelihood > best->log_likelihood) best = std::move(fit);
    } catch (const DegenerateFitError& e) {
      last_error = e.what();
    }
  }
  rng();
  if (!best) throw DegenerateFitError("every EM restart degenerated: " + last_error);
  return std::move(*best);
}

double bic(const GmmFit& fit, Eigen::Index length) {
  return -2.0 * fit.log_likelihood + fit.parameter_count * std::log(static_cast<double>(length));
}

BicResult bic_select(const Matrix& points, RngStream& rng, KRange k_range, const GmmOptions& options) {
  if (k_range.min < 1 || k_range.max < k_range.min) throw ParameterError("invalid K range for BIC");
  BicResult result;
  double best = kInf;
  for (int k = k_range.min; k <= k_range.max; ++k) {
    RngStream sub = rng.split(static_cast<std::uint64_t>(k));
    try {
      GmmFit fit = gmm_em(points, k, sub, options);
      const double score = bic(fit, points.rows());
      result.scores.push_back({k, score, 0.0});
      if (score < best) {
        best = score;
        result.best_k = k;
        result.best_fit = std::move(fit);
      }
    } catch (const DegenerateFitError&) {
    } catch (const DegenerateInputError&) {
    }
  }
  if (result.scores.empty()) throw DegenerateFitError("no mixture order in the K range could be fitted");
  return result;
}

InitAssignment initialize(const Dataset& data, InitMethod method, RngStream& rng, const InitOptions& options) {
  data.validate();
  InitAssignment a;
  a.method = method;
  try {
    switch (method) {
      case InitMethod::kUniform:
        return uniform_init(data.length(), rng);
      case InitMethod::kKMeans:
      case InitMethod::kPam: {
        GapOptions gap = options.gap;
        gap.k_range = options.k_range;
        auto res = gap_select(data.observations,
                              method == InitMethod::kKMeans ? ClusterAlgorithm::kKMeans : ClusterAlgorithm::kPam,
                              rng, gap);
        a.labels = std::move(res.best_labels);
        a.selection = std::move(res.scores);
        break;
      }
      case InitMethod::kMixtures: {
        auto res = bic_select(data.observations, rng, options.k_range, options.gmm);
        a.labels = std::move(res.best_fit.labels);
        a.selection = std::move(res.scores);
        break;
      }
    }
  } catch (const DegenerateFitError& e) {
    a.fallback_reason = e.what();
  } catch (const DegenerateInputError& e) {
    a.fallback_reason = e.what();
  }
  if (a.fallback_reason) {
    log_warning(std::string(to_string(method)) + " initialization failed (" + *a.fallback_reason +
                "); falling back to uniform");
    InitAssignment u = uniform_init(data.length(), rng);
    u.method = method;
    u.fallback_reason = a.fallback_reason;
    return u;
  }
  a.num_states = compact_labels(a.labels);
  return a;
}

}  // namespace ihmm
