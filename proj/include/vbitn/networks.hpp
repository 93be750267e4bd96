#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vbitn/autodiff/tensor.hpp"
#include "vbitn/distributions.hpp"
#include "vbitn/rng.hpp"

namespace vbitn {

/// Shapes shared by every network in a bundle.
struct NetConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 3;
  /// Feature widths of the strided conv blocks; the decoder mirrors them.
  std::vector<std::size_t> widths = {16, 32, 64};
  std::size_t style_dim = 8;
  std::size_t content_dim = 16;

  std::size_t blocks() const { return widths.size(); }
  /// Spatial extent after all downsampling blocks.
  std::size_t base_height() const { return height >> blocks(); }
  std::size_t base_width() const { return width >> blocks(); }
  std::size_t flat_features() const { return base_height() * base_width() * widths.back(); }
  Shape image_shape(std::size_t batch) const { return {batch, height, width, channels}; }
  /// Throws std::invalid_argument if the image does not divide evenly.
  void validate() const;
};

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> value;
};

template <typename T>
struct Linear {
  Tensor<T> w;  // [in, out]
  Tensor<T> b;  // [out]
  Tensor<T> operator()(const Tensor<T>& x, bool frozen = false) const;
};

template <typename T>
struct Conv {
  Tensor<T> w;  // [3, 3, in, out]
  Tensor<T> b;  // [out]
  std::size_t stride = 1;
  Tensor<T> operator()(const Tensor<T>& x, bool frozen = false) const;
};

/// Style and content posteriors for a batch of images.
template <typename T>
struct Posterior {
  DiagGaussian<T> style;
  DiagGaussian<T> content;
};

/// f_phi: shared strided-conv trunk with a style head and a content head,
/// each emitting (mean, log-variance).
template <typename T>
class Encoder {
 public:
  Encoder(const NetConfig& cfg, Rng& init);
  Posterior<T> operator()(const Tensor<T>& x) const;
  std::vector<NamedParam<T>> parameters() const;
  Encoder frozen() const;

 private:
  NetConfig cfg_;
  std::vector<Conv<T>> trunk_;
  Linear<T> style_head_;
  Linear<T> content_head_;
};

/// g_theta: (y, z) -> image in [0, 1] via a linear stem and
/// upsample+conv blocks.
template <typename T>
class Decoder {
 public:
  Decoder(const NetConfig& cfg, Rng& init);
  Tensor<T> operator()(const Tensor<T>& y, const Tensor<T>& z) const;
  std::vector<NamedParam<T>> parameters() const;
  Decoder frozen() const;

 private:
  NetConfig cfg_;
  Linear<T> stem_;
  std::vector<Conv<T>> ups_;
};

/// Realness score in (0, 1) per image.
template <typename T>
class Discriminator {
 public:
  Discriminator(const NetConfig& cfg, Rng& init);
  /// With `frozen`, parameters enter the graph as constants so no gradient
  /// reaches them.
  Tensor<T> operator()(const Tensor<T>& x, bool frozen = false) const;
  std::vector<NamedParam<T>> parameters() const;
  Discriminator frozen() const;

 private:
  NetConfig cfg_;
  std::vector<Conv<T>> trunk_;
  Linear<T> head_;
};

/// Per-domain encoder/decoder pairs plus one discriminator per target.
/// Domain 0 is the source; domains 1..N are targets T_1..T_N.
template <typename T>
struct ModelBundle {
  NetConfig net;
  std::vector<DomainSpec> domains;
  std::vector<Encoder<T>> encoders;
  std::vector<Decoder<T>> decoders;
  std::vector<Discriminator<T>> discriminators;

  static ModelBundle create(const NetConfig& net, std::vector<DomainSpec> domains,
                            std::uint64_t seed);

  std::size_t num_targets() const { return domains.size() - 1; }
  /// Throws std::out_of_range for an unknown id.
  std::size_t domain_index(const std::string& id) const;
  DiagGaussian<T> style_prior(std::size_t domain) const;
  DiagGaussian<T> content_prior() const;
  const Discriminator<T>& discriminator_for(std::size_t domain) const;

  /// Names follow "{domain_id}/{enc|dec|disc}/{layer}/{w|b}".
  std::vector<NamedParam<T>> generator_parameters() const;
  std::vector<NamedParam<T>> discriminator_parameters() const;
  std::vector<NamedParam<T>> parameters() const;

  /// Deep copy with gradients disabled, for read-only inference.
  ModelBundle snapshot() const;
};

extern template class Encoder<float>;
extern template class Encoder<double>;
extern template class Decoder<float>;
extern template class Decoder<double>;
extern template class Discriminator<float>;
extern template class Discriminator<double>;
extern template struct ModelBundle<float>;
extern template struct ModelBundle<double>;

}  // namespace vbitn
