#pragma once

#include <cstdint>
#include <random>

namespace ntssl {

/// Mixes an arbitrary number of integers into a well-spread 64-bit seed
/// (splitmix64 finalizer chained over the inputs).
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a = 0, std::uint64_t b = 0, std::uint64_t c = 0);

/// Seeded generator with platform-independent transforms.
///
/// The standard distributions are implementation-defined, so uniform and
/// normal draws are computed here directly from mt19937_64 output. Results
/// are bit-identical across standard libraries for the same seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Unbiased integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal (Box-Muller, no cached second variate).
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ntssl
