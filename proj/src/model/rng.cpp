#include "vbitn/rng.hpp"

#include <cmath>
#include <numbers>

namespace vbitn {

std::uint64_t Rng::hash(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

Rng Rng::keyed(std::uint64_t seed, std::uint64_t step, std::string_view role) {
  return Rng(mix(seed) ^ mix(step + 0x5851F42D4C957F2DULL) ^ hash(role));
}

Rng Rng::split(std::uint64_t tag) const {
  return Rng(key_ ^ mix(tag + 0x2545F4914F6CDD1DULL) ^ mix(counter_ * kGamma + 1));
}

double Rng::normal() {
  // 1 - uniform() lies in (0, 1], keeping the log finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection keeps the result exactly uniform.
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

}  // namespace vbitn
