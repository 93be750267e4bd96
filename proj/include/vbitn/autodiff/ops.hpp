#pragma once

#include <cstddef>
#include <vector>

#include "vbitn/autodiff/tensor.hpp"

namespace vbitn {

// Binary elementwise ops. Operands either share a shape, or one of them is a
// scalar, or one operand's shape is a trailing suffix of the other's (e.g. a
// bias of shape [C] against activations of shape [N, C]).
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
/// Throws DomainError if the divisor contains a zero.
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> neg(const Tensor<T>& x);
template <typename T> Tensor<T> scale(const Tensor<T>& x, T c);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& x, T c);

template <typename T> Tensor<T> exp(const Tensor<T>& x);
/// Throws DomainError on any non-positive input.
template <typename T> Tensor<T> log(const Tensor<T>& x);
template <typename T> Tensor<T> tanh(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> square(const Tensor<T>& x);
template <typename T> Tensor<T> leaky_relu(const Tensor<T>& x, T slope = T(0.2));
/// Gradient passes only where lo <= x <= hi.
template <typename T> Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);

/// [M, K] x [K, N] -> [M, N].
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// Rank-2 transpose.
template <typename T> Tensor<T> transpose(const Tensor<T>& x);
template <typename T> Tensor<T> reshape(const Tensor<T>& x, const Shape& shape);
/// Repeats x to `shape`; x must be a scalar or a trailing suffix of `shape`.
template <typename T> Tensor<T> broadcast(const Tensor<T>& x, const Shape& shape);

/// Sum of all elements, shape [].
template <typename T> Tensor<T> sum(const Tensor<T>& x);
/// Mean of all elements, shape [].
template <typename T> Tensor<T> mean(const Tensor<T>& x);
/// Reduces every axis but the first: [B, ...] -> [B].
template <typename T> Tensor<T> row_sum(const Tensor<T>& x);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length);

struct Conv2dAttrs {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// x: [B, H, W, Cin], w: [KH, KW, Cin, Cout] -> [B, OH, OW, Cout].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, Conv2dAttrs attrs = {});
/// Nearest-neighbour 2x upsampling of [B, H, W, C].
template <typename T> Tensor<T> upsample2x(const Tensor<T>& x);

}  // namespace vbitn
