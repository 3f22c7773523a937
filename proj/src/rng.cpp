#include "routeopt/rng.hpp"

#include <cmath>

namespace routeopt {

double SplitMix64::next_normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // u1 in (0,1] so log() is finite.
  double u1 = 1.0 - next_double();
  double u2 = next_double();
  double mag = std::sqrt(-2.0 * std::log(u1));
  double ang = 2.0 * 3.14159265358979323846 * u2;
  spare_ = mag * std::sin(ang);
  have_spare_ = true;
  return mag * std::cos(ang);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index) {
  // FNV-1a over the label bytes.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  SplitMix64 mix(master ^ h);
  std::uint64_t a = mix.next_u64();
  SplitMix64 mix2(a ^ (index * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL));
  return mix2.next_u64();
}

}  // namespace routeopt
