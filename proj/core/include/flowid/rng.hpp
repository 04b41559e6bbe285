#pragma once

#include <cstdint>
#include <random>

namespace flowid {

/// Deterministic random source used by every stochastic operation.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Distributions are implemented here rather than through <random>
/// distribution classes, whose algorithms are implementation-defined, so a
/// given seed yields the same draws with any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [lo, hi] (inclusive).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller (the cached second variate is kept).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Independent generator derived from this one's seed and a stream id.
  /// Does not advance this generator.
  Rng substream(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// splitmix64 finalizer; used for seed derivation.
std::uint64_t mix_seed(std::uint64_t x) noexcept;

}  // namespace flowid
