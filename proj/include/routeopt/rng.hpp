#pragma once

#include <cstdint>
#include <string_view>

namespace routeopt {

// SplitMix64: the project-wide random number generator. Chosen because it
// is a well-known 64-bit generator with a trivial, fully portable update
// rule, so seeded runs reproduce bit-identically on any platform. Every
// stochastic operation in the library takes an explicit seed and derives
// independent sub-streams with derive_seed(); no global RNG state exists.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [0, n) without modulo bias (rejection sampling).
  std::uint64_t next_below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t threshold = (0ULL - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller. Consumes two uniforms per pair; the
  // spare is cached so draw order stays deterministic.
  double next_normal();

  // Independent child generator; advances this stream by one draw.
  SplitMix64 split() { return SplitMix64(next_u64()); }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Derives the seed of a named sub-stream from (master seed, stage label,
// index). Labels are hashed with FNV-1a and the triple is mixed through
// SplitMix64 steps, so distinct stages and indices get decorrelated
// streams and results never depend on execution order.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index = 0);

}  // namespace routeopt
