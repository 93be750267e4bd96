#include "vbitn/distributions.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <stdexcept>

#include "vbitn/autodiff/ops.hpp"

namespace vbitn {

template <typename T>
DiagGaussian<T>::DiagGaussian(Tensor<T> mean, Tensor<T> std)
    : mean_(std::move(mean)), std_(std::move(std)) {
  if (mean_.shape() != std_.shape() || mean_.rank() < 1 || mean_.rank() > 2) {
    throw ShapeError("DiagGaussian: mean " + to_string(mean_.shape()) + " and std " +
                     to_string(std_.shape()) + " must share a [D] or [B, D] shape");
  }
  for (T s : std_.data()) {
    if (!(s > T(0))) throw DomainError("DiagGaussian: std must be strictly positive");
  }
}

template <typename T>
DiagGaussian<T> DiagGaussian<T>::from_log_variance(const Tensor<T>& mean,
                                                   const Tensor<T>& log_variance) {
  return DiagGaussian(mean, exp(scale(log_variance, T(0.5))));
}

template <typename T>
DiagGaussian<T> DiagGaussian<T>::unit(const Tensor<T>& mean) {
  return DiagGaussian(mean, Tensor<T>::ones(mean.shape()));
}

template <typename T>
DiagGaussian<T> DiagGaussian<T>::standard(std::size_t dim) {
  return DiagGaussian(Tensor<T>::zeros({dim}), Tensor<T>::ones({dim}));
}

template <typename T>
DiagGaussian<T> DiagGaussian<T>::row(std::size_t i) const {
  if (!batched()) {
    if (i != 0) throw std::out_of_range("DiagGaussian::row: unbatched distribution");
    return *this;
  }
  auto m = reshape(slice(mean_, 0, i, 1), {dim()});
  auto s = reshape(slice(std_, 0, i, 1), {dim()});
  return DiagGaussian(m, s);
}

template <typename T>
Tensor<T> rsample(const DiagGaussian<T>& q, const Tensor<T>& eps) {
  if (eps.shape() != q.mean().shape()) {
    throw ShapeError("rsample: noise shape " + to_string(eps.shape()) +
                     " does not match distribution shape " + to_string(q.mean().shape()));
  }
  return add(q.mean(), mul(q.std(), eps.detach()));
}

template <typename T>
Tensor<T> standard_normal(const Shape& shape, Rng& rng) {
  std::vector<T> v(numel_of(shape));
  for (auto& x : v) x = static_cast<T>(rng.normal());
  return Tensor<T>(shape, std::move(v));
}

namespace {

template <typename T>
Tensor<T> reduce_last(const Tensor<T>& x) {
  return x.rank() == 2 ? row_sum(x) : sum(x);
}

template <typename T>
void check_pair(const char* op, const DiagGaussian<T>& q, const DiagGaussian<T>& p) {
  const bool ok = q.dim() == p.dim() && (p.mean().shape() == q.mean().shape() || !p.batched());
  if (!ok) {
    throw ShapeError(std::string(op) + ": distributions of shape " + to_string(q.mean().shape()) +
                     " and " + to_string(p.mean().shape()) + " are incompatible");
  }
}

}  // namespace

template <typename T>
Tensor<T> kl_to(const DiagGaussian<T>& q, const DiagGaussian<T>& p) {
  check_pair("kl_to", q, p);
  // log(p_sd / q_sd) + (q_sd^2 + (q_mu - p_mu)^2) / (2 p_sd^2) - 1/2
  auto log_ratio = sub(log(p.std()), log(q.std()));
  auto num = add(square(q.std()), square(sub(q.mean(), p.mean())));
  auto quad = div(num, scale(square(p.std()), T(2)));
  return reduce_last(add_scalar(add(log_ratio, quad), T(-0.5)));
}

template <typename T>
Tensor<T> log_prob(const DiagGaussian<T>& p, const Tensor<T>& x) {
  if (x.shape().empty() || x.shape().back() != p.dim() || (p.batched() && x.shape() != p.mean().shape())) {
    throw ShapeError("log_prob: point of shape " + to_string(x.shape()) +
                     " does not match distribution shape " + to_string(p.mean().shape()));
  }
  const T log_2pi = static_cast<T>(std::log(2.0 * std::numbers::pi));
  auto z = div(sub(x, p.mean()), p.std());
  auto terms = add(scale(log(p.std()), T(2)), square(z));
  return scale(reduce_last(add_scalar(broadcast(terms, x.shape()), log_2pi)), T(-0.5));
}

void check_simplex(const std::vector<double>& weights, double tol) {
  if (weights.empty()) throw std::invalid_argument("weights: empty weight vector");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("weights: every weight must be a finite value >= 0");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > tol) {
    throw std::invalid_argument("weights: must sum to 1 within " + std::to_string(tol) +
                                ", got " + std::to_string(total));
  }
}

std::size_t pick_component(const std::vector<double>& weights, double u) {
  double cum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cum += weights[i];
    if (u < cum) return i;
  }
  // Rounding can leave cum slightly below 1; fall back to the last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return 0;
}

template <typename T>
MixturePrior<T>::MixturePrior(std::vector<DiagGaussian<T>> components, std::vector<double> weights)
    : components_(std::move(components)), weights_(std::move(weights)) {
  if (components_.empty() || components_.size() != weights_.size()) {
    throw std::invalid_argument("MixturePrior: need one weight per component");
  }
  check_simplex(weights_);
  for (const auto& c : components_) {
    if (c.batched() || c.dim() != components_.front().dim()) {
      throw std::invalid_argument("MixturePrior: components must be rank-1 and share a dimension");
    }
  }
}

template <typename T>
MixtureDraw<T> mixture_sample(const MixturePrior<T>& m, Rng& rng) {
  check_simplex(m.weights());
  Rng chooser = rng.split(Rng::hash("mixture-component"));
  const std::size_t k = pick_component(m.weights(), chooser.uniform());
  const auto& comp = m.components()[k];
  auto eps = standard_normal<T>(comp.mean().shape(), rng);
  return {rsample(comp, eps).detach(), k};
}

template <typename T>
Tensor<T> make_alpha(std::size_t domain_index, std::size_t style_dim, T separation) {
  if (domain_index >= style_dim) {
    throw std::out_of_range("make_alpha: domain index " + std::to_string(domain_index) +
                            " needs style_dim > index, got " + std::to_string(style_dim));
  }
  if (!(separation > T(0))) throw std::invalid_argument("make_alpha: separation must be > 0");
  auto a = Tensor<T>::zeros({style_dim});
  a.mutable_data()[domain_index] = separation;
  return a;
}

std::vector<DomainSpec> make_domains(const std::vector<std::string>& ids, std::size_t style_dim,
                                     float separation) {
  std::vector<DomainSpec> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto a = make_alpha<float>(i, style_dim, separation);
    out.push_back({ids[i], {a.data().begin(), a.data().end()}, i == 0});
  }
  validate_domains(out);
  return out;
}

void validate_domains(const std::vector<DomainSpec>& domains) {
  if (domains.size() < 2) throw std::invalid_argument("domains: need a source and at least one target");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    if (!ids.insert(domains[i].id).second) {
      throw std::invalid_argument("domains: duplicate domain id '" + domains[i].id + "'");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (domains[i].alpha == domains[j].alpha) {
        throw std::invalid_argument("domains: '" + domains[i].id + "' and '" + domains[j].id +
                                    "' share a style-prior mean");
      }
    }
  }
}

#define VBITN_INSTANTIATE_DIST(T)                                                    \
  template class DiagGaussian<T>;                                                    \
  template class MixturePrior<T>;                                                    \
  template Tensor<T> rsample(const DiagGaussian<T>&, const Tensor<T>&);              \
  template Tensor<T> standard_normal(const Shape&, Rng&);                            \
  template Tensor<T> kl_to(const DiagGaussian<T>&, const DiagGaussian<T>&);          \
  template Tensor<T> log_prob(const DiagGaussian<T>&, const Tensor<T>&);             \
  template MixtureDraw<T> mixture_sample(const MixturePrior<T>&, Rng&);              \
  template Tensor<T> make_alpha(std::size_t, std::size_t, T);

VBITN_INSTANTIATE_DIST(float)
VBITN_INSTANTIATE_DIST(double)

}  // namespace vbitn
