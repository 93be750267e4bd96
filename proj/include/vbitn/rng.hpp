#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace vbitn {

/// Counter-based, splittable random stream. The n-th draw is a pure function
/// of (key, n), so any stream can be recreated from its key alone and child
/// streams never perturb their parent.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t key) : key_(mix(key)) {}

  /// Stream for one (seed, step, role) triple.
  static Rng keyed(std::uint64_t seed, std::uint64_t step, std::string_view role);

  /// Child stream derived from this stream's key, current position, and tag.
  /// Does not advance this stream.
  Rng split(std::uint64_t tag) const;

  std::uint64_t next_u64() { return mix(key_ + kGamma * ++counter_); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  /// Standard normal via Box-Muller; consumes exactly two draws.
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t counter() const { return counter_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  static std::uint64_t hash(std::string_view s);

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace vbitn
