#pragma once

#include <cstdint>
#include <numbers>
#include <cmath>

namespace lvm {

/// Seeded random stream with a reproducibility contract: the same seed and
/// the same call sequence produce bit-identical output on every platform.
///
/// The generator is splitmix64 driven by an advancing counter, so streams are
/// cheap to split: derive(k) yields an independent stream keyed by (seed, k),
/// which lets replicate runs and parallel shards replay deterministically
/// without sharing state.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), counter_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Independent stream for substream k of this stream's seed.
  RngStream derive(std::uint64_t k) const {
    return RngStream(mix(seed_ ^ mix(k + 0x632be59bd9b4e019ull)));
  }

  std::uint64_t next_u64() {
    counter_ += 0x9e3779b97f4a7c15ull;
    return mix(counter_);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; draws come in cached pairs.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(theta);
    have_cached_ = true;
    return r * std::cos(theta);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t seed_;
  std::uint64_t counter_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace lvm
