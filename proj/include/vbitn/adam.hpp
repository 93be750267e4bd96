#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vbitn/networks.hpp"

namespace vbitn {

/// Raised when a gradient or loss is NaN or infinite.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamHyper {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of `param` in place. `t` is the 1-based
/// step count after this update. Arithmetic runs in double per element.
/// Throws NonFiniteError before touching anything if `grad` is not finite.
template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 std::uint64_t t, const AdamHyper& h);

/// Moments for a set of named parameters.
struct AdamState {
  std::uint64_t t = 0;
  std::map<std::string, std::vector<float>> m;
  std::map<std::string, std::vector<float>> v;
};

/// Applies one update to every parameter using its accumulated gradient.
void adam_step(const std::vector<NamedParam<float>>& params, AdamState& state, const AdamHyper& h);

}  // namespace vbitn
