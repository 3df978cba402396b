#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mapfusion {

/// Portable pseudo-random source.
///
/// Raw bits come from std::mt19937_64, whose output sequence is fixed by the
/// C++ standard. Distributions are implemented here rather than taken from
/// <random>, because the standard distributions are implementation-defined:
///
///   uniform01()  = (next() >> 11) * 2^-53                      in [0, 1)
///   uniform(a,b) = a + (b - a) * uniform01()
///   normal()     = Box-Muller, sqrt(-2 ln(1 - u1)) * cos(2 pi u2), one
///                  draw of (u1, u2) per call (the sine branch is discarded)
///   index(n)     = floor(uniform01() * n)
///   bernoulli(p) = uniform01() < p
///
/// Independent streams are derived from a base seed with SplitMix64, see
/// derive_seed().
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  std::size_t index(std::size_t n);
  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed for stream `stream` of base seed `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Seed for a named stream (FNV-1a of the name mixed into the base seed).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);

}  // namespace mapfusion
