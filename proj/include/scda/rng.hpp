#pragma once

#include <cstdint>
#include <vector>

namespace scda {

/// Deterministic pseudo-random generator, SplitMix64 family.
///
/// The raw stream is pure 64-bit integer arithmetic: state advances by the
/// golden-ratio increment 0x9E3779B97F4A7C15 and each output is the
/// finalizer mix
///
///   z = state; z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
///   z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31;
///
/// so equal seeds give equal streams on every platform. Doubles take the
/// top 53 bits (`next_double` is in [0,1)); `next_gaussian` layers the polar
/// Box-Muller method on top and caches the second deviate.
///
/// There is no global generator: every stochastic operation takes an
/// explicit Rng. Independent child streams come from `fork(salt)`, which
/// hashes (seed, salt) and is a pure function of the *construction* seed, so
/// derived streams do not depend on how much of the parent was consumed.
/// Callers that need several children fork with distinct salts.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  /// Uniform in [0,1), 53-bit resolution.
  double next_double();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n), n >= 1. Lemire multiply-shift reduction.
  std::uint64_t next_below(std::uint64_t n);
  /// Standard normal deviate (polar Box-Muller).
  double next_gaussian();

  /// Independent child stream derived from (construction seed, salt).
  Rng fork(std::uint64_t salt) const;

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t state_ = 0;
  bool has_cached_gaussian_ = false;
  double cached_gaussian_ = 0.0;
};

}  // namespace scda
