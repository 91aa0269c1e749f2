#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace specfield {

/// SplitMix64: seedable 64-bit generator with a one-word state.
///
/// Stream discipline: sample j of a batch draws from an independent
/// substream seeded with substream_seed(seed, j), so batches are
/// reproducible under any parallel partitioning of the samples.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1), 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream_index) {
  SplitMix64 mix(seed);
  std::uint64_t base = mix.next_u64();
  return base ^ (0x9E3779B97F4A7C15ULL * (stream_index + 1));
}

/// Standard normals by Box-Muller over SplitMix64 uniforms.
/// Pairs are generated together and the second value cached, so a stream
/// yields a fixed sequence independent of call grouping.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = 1.0 - rng_.next_double();  // (0, 1], keeps the log finite
    const double u2 = rng_.next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

 private:
  SplitMix64 rng_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace specfield
