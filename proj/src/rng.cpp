#include "ihmm/rng.hpp"

#include <cmath>
#include <numbers>

namespace ihmm {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t derive_stream_id(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6A09E667F3BCC909ULL;
  for (std::uint64_t p : parts) h = mix64(h ^ mix64(p + kGolden));
  return h;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t counter)
    : seed_(seed),
      stream_id_(stream_id),
      key_(mix64(seed ^ mix64(stream_id ^ 0xD1B54A32D192ED03ULL))),
      counter_(counter) {}

RngStream::result_type RngStream::operator()() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RngStream::uniform() {
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  // Rejection keeps the result exactly uniform.
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t x;
  do {
    x = (*this)();
  } while (x >= limit);
  return x % n;
}

RngStream RngStream::split(std::uint64_t child) const {
  return RngStream(seed_, derive_stream_id({stream_id_, child}));
}

}  // namespace ihmm
