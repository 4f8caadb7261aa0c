#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace ihmm {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Combines a list of integers (scenario, replicate, chain, ...) into one stream id.
std::uint64_t derive_stream_id(std::initializer_list<std::uint64_t> parts);

/// Counter-based random stream.
///
/// The n-th output is a pure function of (seed, stream id, n), so a stream can be
/// checkpointed as three integers and replayed bit-for-bit on any platform. All
/// variate generation in the library goes through `uniform()` and `normal()`,
/// never through the implementation-defined std:: distributions.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream_id = 0, std::uint64_t counter = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Standard normal (Box-Muller, one output per pair of uniforms).
  double normal();
  /// Uniform integer on [0, n).
  std::uint64_t uniform_index(std::uint64_t n);

  /// Independent child stream, e.g. one per chain or per GAP reference draw.
  RngStream split(std::uint64_t child) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace ihmm
