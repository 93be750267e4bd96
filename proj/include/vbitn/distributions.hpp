#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vbitn/autodiff/tensor.hpp"
#include "vbitn/rng.hpp"

namespace vbitn {

/// Diagonal Gaussian over latent vectors. `mean` and `std` share a shape of
/// either [D] (one distribution) or [B, D] (one distribution per row).
template <typename T>
class DiagGaussian {
 public:
  /// Throws ShapeError on mismatched shapes, DomainError on std <= 0.
  DiagGaussian(Tensor<T> mean, Tensor<T> std);

  /// std = exp(log_variance / 2), evaluated in-graph.
  static DiagGaussian from_log_variance(const Tensor<T>& mean, const Tensor<T>& log_variance);
  /// N(mean, I).
  static DiagGaussian unit(const Tensor<T>& mean);
  /// N(0, I) of dimension `dim`.
  static DiagGaussian standard(std::size_t dim);

  const Tensor<T>& mean() const { return mean_; }
  const Tensor<T>& std() const { return std_; }
  std::size_t dim() const { return mean_.shape().back(); }
  bool batched() const { return mean_.rank() == 2; }
  std::size_t batch() const { return batched() ? mean_.dim(0) : 1; }

  /// Row `i` of a batched distribution as a rank-1 distribution.
  DiagGaussian row(std::size_t i) const;

 private:
  Tensor<T> mean_;
  Tensor<T> std_;
};

/// Reparameterized draw mean + std * eps; eps is treated as a constant.
template <typename T>
Tensor<T> rsample(const DiagGaussian<T>& q, const Tensor<T>& eps);

/// Standard-normal noise of the given shape drawn in row-major order.
template <typename T>
Tensor<T> standard_normal(const Shape& shape, Rng& rng);

/// KL(q || p), summed over the last axis. Result is [B] for batched q and a
/// scalar otherwise. p may be rank-1 and is then shared by every row of q.
template <typename T>
Tensor<T> kl_to(const DiagGaussian<T>& q, const DiagGaussian<T>& p);

/// Exact log density, summed over the last axis.
template <typename T>
Tensor<T> log_prob(const DiagGaussian<T>& p, const Tensor<T>& x);

/// Weighted mixture of rank-1 diagonal Gaussians with weights on the simplex.
template <typename T>
class MixturePrior {
 public:
  /// Throws std::invalid_argument unless weights are nonnegative and sum to 1
  /// within 1e-6 and all components share one dimension.
  MixturePrior(std::vector<DiagGaussian<T>> components, std::vector<double> weights);

  const std::vector<DiagGaussian<T>>& components() const { return components_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t dim() const { return components_.front().dim(); }

 private:
  std::vector<DiagGaussian<T>> components_;
  std::vector<double> weights_;
};

template <typename T>
struct MixtureDraw {
  Tensor<T> value;
  std::size_t component = 0;
};

/// Ancestral sampling: pick a component with probability w_i, then draw from
/// it. The component choice comes from a child stream so that the parent
/// stream advances exactly as a plain rsample of one component would.
template <typename T>
MixtureDraw<T> mixture_sample(const MixturePrior<T>& m, Rng& rng);

/// Index of the component selected by uniform u in [0, 1) (inverse CDF).
std::size_t pick_component(const std::vector<double>& weights, double u);

/// Throws std::invalid_argument unless w_i >= 0 and |sum - 1| <= tol.
void check_simplex(const std::vector<double>& weights, double tol = 1e-6);

/// separation * e_{domain_index} in R^{style_dim}.
template <typename T>
Tensor<T> make_alpha(std::size_t domain_index, std::size_t style_dim, T separation);

/// Domain identity and its style-prior mean.
struct DomainSpec {
  std::string id;
  std::vector<float> alpha;
  bool is_source = false;
};

/// Builds specs for `ids`; the first id is the source domain.
std::vector<DomainSpec> make_domains(const std::vector<std::string>& ids, std::size_t style_dim,
                                     float separation);
/// Throws std::invalid_argument if ids repeat or two alphas coincide.
void validate_domains(const std::vector<DomainSpec>& domains);

}  // namespace vbitn
