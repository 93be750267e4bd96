#include "vbitn/autodiff/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>

namespace vbitn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

using detail::make_result;

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " +
                   to_string(b));
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// Result shape for a binary op; the smaller operand repeats with period numel.
Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return a;
  if (numel_of(b) == 1 || is_suffix(b, a)) return a;
  if (numel_of(a) == 1 || is_suffix(a, b)) return b;
  shape_fail(op, a, b);
}

// Operands repeat with period numel; since the smaller shape is a suffix of
// the larger, walking wrapped counters visits the right elements.
template <typename T, typename F, typename DA, typename DB>
Tensor<T> binary(const char* op, const Tensor<T>& a, const Tensor<T>& b, F f, DA da, DB db) {
  Shape out_shape = broadcast_shape(op, a.shape(), b.shape());
  const std::size_t n = numel_of(out_shape);
  const std::size_t na = a.numel();
  const std::size_t nb = b.numel();
  auto ad = a.data();
  auto bd = b.data();
  std::vector<T> out(n);
  if (na == n && nb == n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(ad[i], bd[i]);
  } else {
    for (std::size_t i = 0, ia = 0, ib = 0; i < n; ++i) {
      out[i] = f(ad[ia], bd[ib]);
      if (++ia == na) ia = 0;
      if (++ib == nb) ib = 0;
    }
  }
  return make_result<T>(op, std::move(out_shape), std::move(out), {a, b},
                        [n, na, nb, da, db](Node<T>& self) {
                          const auto& g = self.grad;
                          const auto& av = self.inputs[0]->data;
                          const auto& bv = self.inputs[1]->data;
                          const auto& ov = self.data;
                          if (self.inputs[0]->requires_grad) {
                            auto& ga = self.inputs[0]->grad_buffer();
                            for (std::size_t i = 0, ia = 0, ib = 0; i < n; ++i) {
                              ga[ia] += g[i] * da(av[ia], bv[ib], ov[i]);
                              if (++ia == na) ia = 0;
                              if (++ib == nb) ib = 0;
                            }
                          }
                          if (self.inputs[1]->requires_grad) {
                            auto& gb = self.inputs[1]->grad_buffer();
                            for (std::size_t i = 0, ia = 0, ib = 0; i < n; ++i) {
                              gb[ib] += g[i] * db(av[ia], bv[ib], ov[i]);
                              if (++ia == na) ia = 0;
                              if (++ib == nb) ib = 0;
                            }
                          }
                        });
}

// f computes the value, d computes dy/dx from (x, y).
template <typename T, typename F, typename D>
Tensor<T> unary(const char* op, const Tensor<T>& x, F f, D d) {
  auto xd = x.data();
  std::vector<T> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = f(xd[i]);
  return make_result<T>(op, x.shape(), std::move(out), {x}, [d](Node<T>& self) {
    auto& gx = self.inputs[0]->grad_buffer();
    const auto& xv = self.inputs[0]->data;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * d(xv[i], self.data[i]);
  });
}

template <typename T>
using Acc = std::conditional_t<std::is_same_v<T, float>, double, T>;

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T, T) { return T(1); },
      [](T, T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T, T) { return T(1); },
      [](T, T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y, T) { return y; },
      [](T x, T, T) { return x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  for (T v : b.data()) {
    if (v == T(0)) throw DomainError("div: divisor contains zero");
  }
  return binary<T>(
      "div", a, b, [](T x, T y) { return x / y; }, [](T, T y, T) { return T(1) / y; },
      [](T x, T y, T) { return -x / (y * y); });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& x) {
  return scale(x, T(-1));
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
  return unary<T>(
      "scale", x, [c](T v) { return c * v; }, [c](T, T) { return c; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T c) {
  return unary<T>(
      "add_scalar", x, [c](T v) { return v + c; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary<T>(
      "exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  for (T v : x.data()) {
    if (!(v > T(0))) throw DomainError("log: non-positive input " + std::to_string(v));
  }
  return unary<T>(
      "log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary<T>(
      "tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary<T>(
      "sigmoid", x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary<T>(
      "square", x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  return unary<T>(
      "leaky_relu", x, [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  return unary<T>(
      "clamp", x, [lo, hi](T v) { return std::clamp(v, lo, hi); },
      [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) shape_fail("matmul", a.shape(), b.shape());
  const auto m = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto n = static_cast<Eigen::Index>(b.dim(1));
  std::vector<T> out(static_cast<std::size_t>(m * n));
  MapMat<T>(out.data(), m, n).noalias() =
      ConstMapMat<T>(a.data().data(), m, k) * ConstMapMat<T>(b.data().data(), k, n);
  return make_result<T>("matmul", Shape{a.dim(0), b.dim(1)}, std::move(out), {a, b},
                        [m, k, n](Node<T>& self) {
                          ConstMapMat<T> g(self.grad.data(), m, n);
                          auto& an = *self.inputs[0];
                          auto& bn = *self.inputs[1];
                          if (an.requires_grad) {
                            MapMat<T>(an.grad_buffer().data(), m, k).noalias() +=
                                g * ConstMapMat<T>(bn.data.data(), k, n).transpose();
                          }
                          if (bn.requires_grad) {
                            MapMat<T>(bn.grad_buffer().data(), k, n).noalias() +=
                                ConstMapMat<T>(an.data.data(), m, k).transpose() * g;
                          }
                        });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  if (x.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + to_string(x.shape()));
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<T> out(r * c);
  auto xd = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xd[i * c + j];
  return make_result<T>("transpose", Shape{c, r}, std::move(out), {x}, [r, c](Node<T>& self) {
    auto& gx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += self.grad[j * r + i];
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& shape) {
  if (numel_of(shape) != x.numel()) shape_fail("reshape", x.shape(), shape);
  std::vector<T> out(x.data().begin(), x.data().end());
  return make_result<T>("reshape", shape, std::move(out), {x}, [](Node<T>& self) {
    auto& gx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> broadcast(const Tensor<T>& x, const Shape& shape) {
  if (!(x.numel() == 1 || is_suffix(x.shape(), shape))) shape_fail("broadcast", x.shape(), shape);
  const std::size_t n = numel_of(shape);
  const std::size_t nx = x.numel();
  std::vector<T> out(n);
  auto xd = x.data();
  for (std::size_t i = 0; i < n; i += nx) std::copy_n(xd.begin(), nx, out.begin() + i);
  return make_result<T>("broadcast", shape, std::move(out), {x}, [n, nx](Node<T>& self) {
    auto& gx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < n; i += nx)
      for (std::size_t j = 0; j < nx; ++j) gx[j] += self.grad[i + j];
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  Acc<T> s = 0;
  for (T v : x.data()) s += v;
  return make_result<T>("sum", Shape{}, std::vector<T>{static_cast<T>(s)}, {x}, [](Node<T>& self) {
    auto& gx = self.inputs[0]->grad_buffer();
    const T g = self.grad[0];
    for (auto& v : gx) v += g;
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  const std::size_t n = x.numel();
  Acc<T> s = 0;
  for (T v : x.data()) s += v;
  return make_result<T>("mean", Shape{}, std::vector<T>{static_cast<T>(s / Acc<T>(n))}, {x},
                        [n](Node<T>& self) {
                          auto& gx = self.inputs[0]->grad_buffer();
                          const T g = self.grad[0] / T(n);
                          for (auto& v : gx) v += g;
                        });
}

template <typename T>
Tensor<T> row_sum(const Tensor<T>& x) {
  if (x.rank() < 1) throw ShapeError("row_sum: expected rank >= 1");
  const std::size_t rows = x.dim(0);
  const std::size_t inner = x.numel() / rows;
  std::vector<T> out(rows);
  auto xd = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    Acc<T> s = 0;
    for (std::size_t j = 0; j < inner; ++j) s += xd[r * inner + j];
    out[r] = static_cast<T>(s);
  }
  return make_result<T>("row_sum", Shape{rows}, std::move(out), {x}, [rows, inner](Node<T>& self) {
    auto& gx = self.inputs[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < inner; ++j) gx[r * inner + j] += self.grad[r];
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + to_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> lens;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) shape_fail("concat", first, s);
    for (std::size_t d = 0; d < s.size(); ++d)
      if (d != axis && s[d] != first[d]) shape_fail("concat", first, s);
    lens.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  const std::size_t total = out_shape[axis];
  std::vector<T> out(numel_of(out_shape));
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto pd = parts[k].data();
    const std::size_t block = lens[k] * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(pd.begin() + o * block, block, out.begin() + (o * total + offset) * inner);
    offset += lens[k];
  }
  return make_result<T>("concat", std::move(out_shape), std::move(out), parts,
                        [lens, outer, inner, total](Node<T>& self) {
                          std::size_t off = 0;
                          for (std::size_t k = 0; k < lens.size(); ++k) {
                            auto& in = *self.inputs[k];
                            const std::size_t block = lens[k] * inner;
                            if (in.requires_grad) {
                              auto& g = in.grad_buffer();
                              for (std::size_t o = 0; o < outer; ++o)
                                for (std::size_t j = 0; j < block; ++j)
                                  g[o * block + j] += self.grad[(o * total + off) * inner + j];
                            }
                            off += lens[k];
                          }
                        });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& s = x.shape();
  if (axis >= s.size() || length == 0 || start + length > s[axis]) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") on axis " + std::to_string(axis) +
                     " invalid for shape " + to_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
  const std::size_t full = s[axis];
  Shape out_shape = s;
  out_shape[axis] = length;
  std::vector<T> out(numel_of(out_shape));
  auto xd = x.data();
  const std::size_t block = length * inner;
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(xd.begin() + (o * full + start) * inner, block, out.begin() + o * block);
  return make_result<T>("slice", std::move(out_shape), std::move(out), {x},
                        [outer, inner, full, start, block](Node<T>& self) {
                          auto& g = self.inputs[0]->grad_buffer();
                          for (std::size_t o = 0; o < outer; ++o)
                            for (std::size_t j = 0; j < block; ++j)
                              g[(o * full + start) * inner + j] += self.grad[o * block + j];
                        });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, Conv2dAttrs attrs) {
  if (x.rank() != 4 || w.rank() != 4 || x.dim(3) != w.dim(2) || attrs.stride == 0) {
    shape_fail("conv2d", x.shape(), w.shape());
  }
  const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const std::size_t KH = w.dim(0), KW = w.dim(1), CO = w.dim(3);
  const std::size_t S = attrs.stride, P = attrs.padding;
  if (H + 2 * P < KH || W + 2 * P < KW) shape_fail("conv2d", x.shape(), w.shape());
  const std::size_t OH = (H + 2 * P - KH) / S + 1;
  const std::size_t OW = (W + 2 * P - KW) / S + 1;
  const std::size_t rows = B * OH * OW;
  const std::size_t K = KH * KW * C;

  // Every cell is written below (input copy or padding zero), so skip the
  // value-initialization a std::vector would do.
  std::shared_ptr<T[]> cols(new T[rows * K]);
  auto xd = x.data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t oh = 0; oh < OH; ++oh)
      for (std::size_t ow = 0; ow < OW; ++ow) {
        T* row = cols.get() + ((b * OH + oh) * OW + ow) * K;
        for (std::size_t kh = 0; kh < KH; ++kh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * S + kh) - static_cast<std::ptrdiff_t>(P);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) {
            std::fill_n(row + kh * KW * C, KW * C, T(0));
            continue;
          }
          for (std::size_t kw = 0; kw < KW; ++kw) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * S + kw) - static_cast<std::ptrdiff_t>(P);
            T* dst = row + (kh * KW + kw) * C;
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(W)) {
              std::fill_n(dst, C, T(0));
            } else {
              std::copy_n(xd.begin() + ((b * H + ih) * W + iw) * C, C, dst);
            }
          }
        }
      }

  std::vector<T> out(rows * CO);
  const auto er = static_cast<Eigen::Index>(rows);
  const auto ek = static_cast<Eigen::Index>(K);
  const auto eco = static_cast<Eigen::Index>(CO);
  MapMat<T>(out.data(), er, eco).noalias() =
      ConstMapMat<T>(cols.get(), er, ek) * ConstMapMat<T>(w.data().data(), ek, eco);

  return make_result<T>(
      "conv2d", Shape{B, OH, OW, CO}, std::move(out), {x, w},
      [=](Node<T>& self) {
        ConstMapMat<T> g(self.grad.data(), er, eco);
        auto& xn = *self.inputs[0];
        auto& wn = *self.inputs[1];
        if (wn.requires_grad) {
          MapMat<T>(wn.grad_buffer().data(), ek, eco).noalias() +=
              ConstMapMat<T>(cols.get(), er, ek).transpose() * g;
        }
        if (xn.requires_grad) {
          RowMat<T> dcols = g * ConstMapMat<T>(wn.data.data(), ek, eco).transpose();
          auto& gx = xn.grad_buffer();
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t oh = 0; oh < OH; ++oh)
              for (std::size_t ow = 0; ow < OW; ++ow) {
                const T* row = dcols.data() + ((b * OH + oh) * OW + ow) * K;
                for (std::size_t kh = 0; kh < KH; ++kh) {
                  const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * S + kh) - static_cast<std::ptrdiff_t>(P);
                  if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
                  for (std::size_t kw = 0; kw < KW; ++kw) {
                    const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * S + kw) - static_cast<std::ptrdiff_t>(P);
                    if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(W)) continue;
                    T* dst = gx.data() + ((b * H + ih) * W + iw) * C;
                    const T* src = row + (kh * KW + kw) * C;
                    for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
                  }
                }
              }
        }
      });
}

template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x) {
  if (x.rank() != 4) throw ShapeError("upsample2x: expected [B,H,W,C], got " + to_string(x.shape()));
  const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const std::size_t OH = 2 * H, OW = 2 * W;
  std::vector<T> out(B * OH * OW * C);
  auto xd = x.data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < OH; ++i)
      for (std::size_t j = 0; j < OW; ++j)
        std::copy_n(xd.begin() + ((b * H + i / 2) * W + j / 2) * C, C,
                    out.begin() + ((b * OH + i) * OW + j) * C);
  return make_result<T>("upsample2x", Shape{B, OH, OW, C}, std::move(out), {x},
                        [B, H, W, C, OH, OW](Node<T>& self) {
                          auto& gx = self.inputs[0]->grad_buffer();
                          for (std::size_t b = 0; b < B; ++b)
                            for (std::size_t i = 0; i < OH; ++i)
                              for (std::size_t j = 0; j < OW; ++j) {
                                T* dst = gx.data() + ((b * H + i / 2) * W + j / 2) * C;
                                const T* src = self.grad.data() + ((b * OH + i) * OW + j) * C;
                                for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
                              }
                        });
}

#define VBITN_INSTANTIATE_OPS(T)                                                        \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> neg(const Tensor<T>&);                                             \
  template Tensor<T> scale(const Tensor<T>&, T);                                        \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                   \
  template Tensor<T> exp(const Tensor<T>&);                                             \
  template Tensor<T> log(const Tensor<T>&);                                             \
  template Tensor<T> tanh(const Tensor<T>&);                                            \
  template Tensor<T> sigmoid(const Tensor<T>&);                                         \
  template Tensor<T> square(const Tensor<T>&);                                          \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                   \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                                     \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> transpose(const Tensor<T>&);                                       \
  template Tensor<T> reshape(const Tensor<T>&, const Shape&);                           \
  template Tensor<T> broadcast(const Tensor<T>&, const Shape&);                         \
  template Tensor<T> sum(const Tensor<T>&);                                             \
  template Tensor<T> mean(const Tensor<T>&);                                            \
  template Tensor<T> row_sum(const Tensor<T>&);                                         \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);    \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, Conv2dAttrs);           \
  template Tensor<T> upsample2x(const Tensor<T>&);

VBITN_INSTANTIATE_OPS(float)
VBITN_INSTANTIATE_OPS(double)

}  // namespace vbitn
