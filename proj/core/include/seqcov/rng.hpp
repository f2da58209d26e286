#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace seqcov {

/// splitmix64 finalizer; used to decorrelate seeds.
std::uint64_t mix_seed(std::uint64_t x) noexcept;

/// Sub-seed for pipeline stage `stage` under `master`. Stage ids are listed in harness.hpp.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stage) noexcept;

/// Seeded random source with platform-independent distributions.
///
/// std::mt19937_64 has a fully specified output sequence, but the standard
/// distributions do not, so every draw is mapped to the target distribution here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform01();
  /// Uniform on the open interval (0, 1).
  double open01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::size_t index(std::size_t n);
  double normal();
  bool bernoulli(double p) { return uniform01() < p; }
  /// Samples an index proportionally to non-negative weights; falls back to uniform when all are 0.
  std::size_t categorical(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
};

}  // namespace seqcov
