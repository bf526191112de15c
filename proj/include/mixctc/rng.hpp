#pragma once

#include <cstdint>
#include <string>

namespace mixctc {

/// Deterministic splitmix64 generator.  Used everywhere randomness is
/// needed so that runs are reproducible across platforms and compilers
/// (std::uniform_real_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 bits of mantissa.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Inclusive integer range.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
  }

  /// Box-Muller with a cached spare.
  double normal(double mean = 0.0, double stddev = 1.0);

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// FNV-1a over a string, mixed with a seed; stable sub-stream derivation.
uint64_t hash_seed(uint64_t seed, const std::string& tag);

}  // namespace mixctc
