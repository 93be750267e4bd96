#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "vbitn/autodiff/tensor.hpp"

namespace vbitn {

/// Central-difference gradient (f(x + h e_i) - f(x - h e_i)) / 2h for every
/// coordinate of x. `f` maps a tensor shaped like x to a scalar and must be
/// deterministic.
template <typename T, typename F>
Tensor<T> finite_diff_grad(F&& f, const Tensor<T>& x, T h) {
  std::vector<T> base(x.data().begin(), x.data().end());
  std::vector<T> out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::vector<T> probe = base;
    probe[i] = base[i] + h;
    const double up = static_cast<double>(f(Tensor<T>(x.shape(), probe)));
    probe[i] = base[i] - h;
    const double down = static_cast<double>(f(Tensor<T>(x.shape(), probe)));
    out[i] = static_cast<T>((up - down) / (2.0 * static_cast<double>(h)));
  }
  return Tensor<T>(x.shape(), std::move(out));
}

/// Largest elementwise |a - n| / max(|a|, floor) between an analytic and a
/// numeric gradient.
template <typename T>
double max_rel_error(std::span<const T> analytic, std::span<const T> numeric,
                     double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = static_cast<double>(analytic[i]);
    const double n = static_cast<double>(numeric[i]);
    worst = std::max(worst, std::abs(a - n) / std::max(std::abs(a), floor));
  }
  return worst;
}

}  // namespace vbitn
