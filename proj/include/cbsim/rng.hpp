#pragma once

#include <cstdint>
#include <random>

namespace cbsim {

double normal_quantile(double p);  // stats.hpp owns the definition

/// Deterministic random stream. Gaussian draws go through the inverse CDF so
/// that a seeded stream reproduces bit-for-bit across runs; `child` derives
/// independent substreams (one per end user, never shared between workers).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), eng_(mix(seed)) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform on the open interval (0, 1).
  double uniform01() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double gaussian() { return normal_quantile(uniform01()); }

  Rng child(std::uint64_t tag) const { return Rng(mix(seed_ ^ mix(tag))); }

  std::uint64_t seed() const { return seed_; }

 private:
  // splitmix64 finalizer; decorrelates nearby seeds.
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 eng_;
};

}  // namespace cbsim
