#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "vbitn/autodiff/grad_check.hpp"
#include "vbitn/autodiff/ops.hpp"
#include "vbitn/networks.hpp"

namespace vbitn::testing {

/// 4x4x3 images through two conv blocks of width 2.
inline NetConfig tiny_net() {
  NetConfig n;
  n.height = 4;
  n.width = 4;
  n.widths = {2, 2};
  n.style_dim = 3;
  n.content_dim = 2;
  return n;
}

template <typename T>
Tensor<T> random_images(std::size_t b, const NetConfig& n, Rng& rng) {
  std::vector<T> v(b * n.height * n.width * n.channels);
  for (auto& x : v) x = static_cast<T>(rng.uniform());
  return Tensor<T>(n.image_shape(b), std::move(v));
}

inline Tensor<double> random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  std::vector<double> v(r * c);
  for (auto& x : v) x = 2 * rng.uniform() - 1;
  return Tensor<double>({r, c}, std::move(v));
}

/// Worst relative error between backprop and central differences over every
/// parameter, perturbing the parameter storage in place.
inline double parameter_gradient_error(std::vector<NamedParam<double>> params,
                                       const std::function<Tensor<double>()>& objective,
                                       double h = 1e-5, double floor = 1e-4) {
  for (auto& p : params) p.value.zero_grad();
  objective().backward();
  double worst = 0;
  for (auto& p : params) {
    auto data = p.value.mutable_data();
    std::vector<double> numeric(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double keep = data[i];
      data[i] = keep + h;
      const double up = objective().item();
      data[i] = keep - h;
      const double down = objective().item();
      data[i] = keep;
      numeric[i] = (up - down) / (2 * h);
    }
    worst = std::max(worst, max_rel_error<double>(p.value.grad(), numeric, floor));
  }
  return worst;
}

inline double grad_abs_sum(const std::vector<NamedParam<float>>& params) {
  double s = 0;
  for (const auto& p : params) {
    if (!p.value.has_grad()) continue;
    for (float g : p.value.grad()) s += std::abs(static_cast<double>(g));
  }
  return s;
}

}  // namespace vbitn::testing
