#include "vbitn/adam.hpp"

#include <cmath>

namespace vbitn {

template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 std::uint64_t t, const AdamHyper& h) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
    throw std::invalid_argument("adam_update: parameter, gradient and moment sizes differ");
  }
  if (t == 0) throw std::invalid_argument("adam_update: step count starts at 1");
  for (T g : grad) {
    if (!std::isfinite(g)) throw NonFiniteError("non-finite gradient");
  }
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double mi = h.beta1 * m[i] + (1.0 - h.beta1) * g;
    const double vi = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double step = h.lr * (mi / c1) / (std::sqrt(vi / c2) + h.eps);
    param[i] = static_cast<T>(param[i] - step);
  }
}

template void adam_update(std::span<float>, std::span<const float>, std::span<float>,
                          std::span<float>, std::uint64_t, const AdamHyper&);
template void adam_update(std::span<double>, std::span<const double>, std::span<double>,
                          std::span<double>, std::uint64_t, const AdamHyper&);

void adam_step(const std::vector<NamedParam<float>>& params, AdamState& state, const AdamHyper& h) {
  // Check every gradient before mutating anything so an abort leaves the
  // parameters at their last good values.
  for (const auto& p : params) {
    for (float g : p.value.grad()) {
      if (!std::isfinite(g)) throw NonFiniteError("non-finite gradient in '" + p.name + "'");
    }
  }
  ++state.t;
  for (const auto& p : params) {
    auto& m = state.m[p.name];
    auto& v = state.v[p.name];
    if (m.empty()) {
      m.assign(p.value.numel(), 0.0f);
      v.assign(p.value.numel(), 0.0f);
    }
    Tensor<float> handle = p.value;
    auto grad = handle.grad();
    adam_update<float>(handle.mutable_data(), std::span<const float>(grad.data(), grad.size()), m, v,
                       state.t, h);
  }
}

}  // namespace vbitn
