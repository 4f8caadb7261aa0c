#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ihmm/distributions.hpp"
#include "ihmm/model.hpp"

namespace ihmm {

enum class InitMethod { kUniform, kKMeans, kPam, kMixtures };

std::string_view to_string(InitMethod method);
/// Accepts "uniform", "kmeans" (or "k-means"), "pam", "mixtures".
InitMethod parse_init_method(std::string_view name);

/// Score of one candidate K during model selection.
struct SelectionScore {
  int k = 0;
  double score = 0.0;     // GAP value or BIC
  double std_error = 0.0; // GAP standard error s_K; zero for BIC
};

struct InitAssignment {
  Labels labels;  // 0-based, compacted
  int num_states = 0;
  InitMethod method = InitMethod::kUniform;
  std::vector<SelectionScore> selection;
  /// Set when a model-based strategy fell back to uniform.
  std::optional<std::string> fallback_reason;
};

struct KRange {
  int min = 2;
  int max = 5;
};

/// s_t ~ U{1..K0}, K0 ~ U{2,3,4,5}.
InitAssignment uniform_init(Eigen::Index length, RngStream& rng);

struct KMeansResult {
  Labels labels;
  Matrix centroids;  // K x P
  double wcss = 0.0;
  int iterations = 0;
};

struct KMeansOptions {
  int restarts = 10;
  int max_iterations = 100;
};

/// Lloyd iterations from k-means++ seeding; best of `restarts` by WCSS.
/// Rows of `points` are observations.
KMeansResult kmeans(const Matrix& points, int k, RngStream& rng, const KMeansOptions& options = {});

struct PamResult {
  Labels labels;
  std::vector<Eigen::Index> medoids;
  double cost = 0.0;  // sum of Euclidean distances to the assigned medoid
  /// Sum of squared Euclidean distances to the assigned medoid.
  double squared_cost = 0.0;
};

/// Partitioning around medoids: BUILD then SWAP until no swap lowers the cost.
PamResult pam(const Matrix& points, int k);
/// Same, on a precomputed symmetric dissimilarity matrix.
PamResult pam_dissimilarity(const Matrix& dissimilarity, int k);

enum class ClusterAlgorithm { kKMeans, kPam };
enum class GapRule { kGlobalMax, kTibshirani };
enum class GapReference { kUniformRange, kPermutation };

struct GapOptions {
  KRange k_range{};
  int references = 25;
  GapRule rule = GapRule::kGlobalMax;
  GapReference reference = GapReference::kUniformRange;
  KMeansOptions kmeans{};
};

struct GapResult {
  int best_k = 0;
  std::vector<SelectionScore> scores;  // per K: GAP(K) and s_K
  std::vector<double> log_w;           // log W_K on the data
  Labels best_labels;                  // clustering of the data at best_k
};

/// GAP(K) = E[log W*_K] - log W_K over `references` reference datasets.
GapResult gap_select(const Matrix& points, ClusterAlgorithm algorithm, RngStream& rng,
                     const GapOptions& options = {});

struct GmmFit {
  Labels labels;
  Matrix responsibilities;  // T x K
  std::vector<double> weights;
  std::vector<Gaussian> components;
  double log_likelihood = 0.0;
  int parameter_count = 0;
  int iterations = 0;
  /// Log-likelihood after every EM iteration.
  std::vector<double> history;
};

struct GmmOptions {
  int restarts = 3;
  int max_iterations = 200;
  double tolerance = 1e-6;  // relative log-likelihood change
  double ridge = 1e-6;
};

/// Full-covariance EM from a k-means start.
GmmFit gmm_em(const Matrix& points, int k, RngStream& rng, const GmmOptions& options = {});

/// -2 loglik + q log T.
double bic(const GmmFit& fit, Eigen::Index length);

struct BicResult {
  int best_k = 0;
  std::vector<SelectionScore> scores;  // successful fits only
  GmmFit best_fit;
};

BicResult bic_select(const Matrix& points, RngStream& rng, KRange k_range = {}, const GmmOptions& options = {});

struct InitOptions {
  KRange k_range{};
  GapOptions gap{};
  GmmOptions gmm{};
};

/// Dispatches to the strategy. Falls back to uniform on a degenerate fit and
/// records the reason in `fallback_reason`.
InitAssignment initialize(const Dataset& data, InitMethod method, RngStream& rng, const InitOptions& options = {});

}  // namespace ihmm
