#pragma once

#include <cstdint>

namespace gps {

// Counter-based deterministic generator (SplitMix64). The state advances by a
// fixed odd increment and the output is a bijective mix of the counter, so the
// k-th draw depends only on (seed, k). Same seed => same sequence, on every
// platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform draw in [0, 1) with 53 random mantissa bits.
  double next_unit();

  // Standard normal via Box-Muller; consumes two uniforms per call.
  double next_normal();

  bool next_bernoulli(double p) { return next_unit() < p; }

  // Uniform integer in [0, n), bias-free (rejection sampling). n must be > 0.
  std::uint64_t next_below(std::uint64_t n);

 private:
  std::uint64_t state_;
};

// Stream derivation for independent substreams: stream(seed, a, b) feeds the
// tuple through the SplitMix64 finalizer so that distinct (seed, a, b) tuples
// yield decorrelated generator seeds. Used as stream(seed, trial, role).
std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

}  // namespace gps
