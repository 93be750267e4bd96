#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vbitn/autodiff/tensor.hpp"
#include "vbitn/networks.hpp"
#include "vbitn/objectives.hpp"
#include "vbitn/rng.hpp"

namespace vbitn {

/// One style draw and one content draw with the distributions they came from.
/// Tags read "prior-of-domain:{id}", "mixture:{w1,w2,...}",
/// "posterior-of-image:{k}" or "prior".
struct LatentPair {
  std::vector<float> y;
  std::vector<float> z;
  std::string y_source;
  std::string z_source;

  bool operator==(const LatentPair&) const = default;
};

/// A decoded image [H, W, C] in [0, 1] with the latents that produced it.
struct Translation {
  Tensor<float> image;
  LatentPair latents;
};

struct MixedTranslation {
  Translation result;
  std::size_t chosen_decoder = 0;  // bundle domain index
  std::size_t component = 0;       // target index picked by the sampler
};

/// Identifies the source image in provenance tags.
struct SourceRef {
  std::size_t image_index = 0;
};

// Every operation below draws from `rng` in a fixed order: all style noise
// first, then all content noise. Style noise is one [D_s] vector per draw,
// content noise one [D_c] vector per draw.

/// Stream used by one user-facing request with the given seed. The CLI and
/// the HTTP service both draw from it, so equal seeds give equal images.
inline Rng request_rng(std::uint64_t seed) { return Rng::keyed(seed, 0, "request"); }

/// Source posterior of a single image x_S [H, W, C] (or [1, H, W, C]).
Posterior<float> encode_source(const ModelBundle<float>& bundle, const Tensor<float>& x_s);

/// y_T ~ N(alpha_T, I), z_S ~ q(z | x_S), image = g_T(y_T, z_S).
/// Throws std::out_of_range for an unknown or source target.
Translation translate(const ModelBundle<float>& bundle, const Posterior<float>& q_source,
                      const std::string& target, Rng& rng, SourceRef src = {});
Translation translate(const ModelBundle<float>& bundle, const Tensor<float>& x_s,
                      const std::string& target, Rng& rng, SourceRef src = {});

/// l style draws sharing one content draw.
std::vector<Translation> edit_styles(const ModelBundle<float>& bundle,
                                     const Posterior<float>& q_source, const std::string& target,
                                     std::size_t l, Rng& rng, SourceRef src = {});

/// m content draws sharing one style draw.
std::vector<Translation> edit_contents(const ModelBundle<float>& bundle,
                                       const Posterior<float>& q_source,
                                       const std::string& target, std::size_t m, Rng& rng,
                                       SourceRef src = {});

/// Style from the mixture sum_i w_i N(alpha_{T_i}, I); `weights` index the
/// targets in bundle order. Rendered by the decoder of the largest weight,
/// ties going to the lowest index. A one-hot mixture reproduces translate()
/// bit for bit, including its LatentPair.
MixedTranslation mixed_translate(const ModelBundle<float>& bundle,
                                 const Posterior<float>& q_source,
                                 const std::vector<double>& weights, Rng& rng,
                                 SourceRef src = {});

/// Domain index of the decoder that renders a mixture with `weights`.
std::size_t mixture_decoder(const std::vector<double>& weights);

/// Batched, differentiable translation used for training and evaluation:
/// style noise [B, D_s] then content noise [B, D_c], decoded by the target's
/// decoder. `target` is a bundle domain index >= 1.
template <typename T>
struct BatchTranslation {
  Tensor<T> images;
  UsedLatents<T> latents;
};

template <typename T>
BatchTranslation<T> translate_batch(const ModelBundle<T>& bundle, const Posterior<T>& q_source,
                                    std::size_t target, Rng& rng);

}  // namespace vbitn
