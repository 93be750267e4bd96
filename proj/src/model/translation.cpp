#include "vbitn/translation.hpp"

#include <charconv>
#include <stdexcept>

#include "vbitn/autodiff/ops.hpp"
#include "vbitn/distributions.hpp"

namespace vbitn {

namespace {

std::size_t target_index(const ModelBundle<float>& bundle, const std::string& target) {
  const std::size_t d = bundle.domain_index(target);
  if (d == 0) {
    throw std::out_of_range("'" + target + "' is the source domain, not a translation target");
  }
  return d;
}

std::string prior_tag(const ModelBundle<float>& bundle, std::size_t d) {
  return "prior-of-domain:" + bundle.domains[d].id;
}

std::string posterior_tag(SourceRef src) {
  return "posterior-of-image:" + std::to_string(src.image_index);
}

std::string mixture_tag(const std::vector<double>& weights) {
  std::string s = "mixture:";
  for (std::size_t i = 0; i < weights.size(); ++i) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, weights[i]);
    if (i) s += ',';
    s.append(buf, r.ptr);
  }
  return s;
}

void check_single(const Posterior<float>& q, const ModelBundle<float>& bundle) {
  if (q.content.batch() != 1 || q.content.dim() != bundle.net.content_dim ||
      q.style.dim() != bundle.net.style_dim) {
    throw ShapeError("translation expects the posterior of one image, got content " +
                     to_string(q.content.mean().shape()));
  }
}

Tensor<float> as_row(const Tensor<float>& v) { return reshape(v, Shape{1, v.numel()}); }

Tensor<float> style_draw(const ModelBundle<float>& bundle, std::size_t d, Rng& rng) {
  const auto prior = bundle.style_prior(d);
  return rsample(prior, standard_normal<float>({prior.dim()}, rng));
}

Tensor<float> content_draw(const Posterior<float>& q, Rng& rng) {
  return rsample(q.content, standard_normal<float>(q.content.mean().shape(), rng));
}

std::vector<float> to_vec(const Tensor<float>& t) { return {t.data().begin(), t.data().end()}; }

/// Decodes rows of y and z in one batch and splits the images.
std::vector<Translation> decode_rows(const Decoder<float>& dec, const std::vector<Tensor<float>>& ys,
                                     const std::vector<Tensor<float>>& zs,
                                     const std::vector<LatentPair>& tags) {
  std::vector<Tensor<float>> yr, zr;
  for (const auto& y : ys) yr.push_back(as_row(y));
  for (const auto& z : zs) zr.push_back(as_row(z));
  auto images = dec(concat(yr, 0), concat(zr, 0));
  const Shape one{images.dim(1), images.dim(2), images.dim(3)};
  std::vector<Translation> out;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    out.push_back({reshape(slice(images, 0, i, 1), one), tags[i]});
  }
  return out;
}

}  // namespace

Posterior<float> encode_source(const ModelBundle<float>& bundle, const Tensor<float>& x_s) {
  const auto expected = bundle.net.image_shape(1);
  if (x_s.rank() == 3) {
    auto x = reshape(x_s, Shape{1, x_s.dim(0), x_s.dim(1), x_s.dim(2)});
    if (x.shape() != expected) {
      throw ShapeError("source image " + to_string(x_s.shape()) + " does not match model " +
                       to_string(expected));
    }
    return bundle.encoders[0](x);
  }
  if (x_s.shape() != expected) {
    throw ShapeError("source image " + to_string(x_s.shape()) + " does not match model " +
                     to_string(expected));
  }
  return bundle.encoders[0](x_s);
}

Translation translate(const ModelBundle<float>& bundle, const Posterior<float>& q_source,
                      const std::string& target, Rng& rng, SourceRef src) {
  return edit_styles(bundle, q_source, target, 1, rng, src).front();
}

Translation translate(const ModelBundle<float>& bundle, const Tensor<float>& x_s,
                      const std::string& target, Rng& rng, SourceRef src) {
  return translate(bundle, encode_source(bundle, x_s), target, rng, src);
}

std::vector<Translation> edit_styles(const ModelBundle<float>& bundle,
                                     const Posterior<float>& q_source, const std::string& target,
                                     std::size_t l, Rng& rng, SourceRef src) {
  if (l == 0) throw std::invalid_argument("edit_styles: l must be >= 1");
  const std::size_t d = target_index(bundle, target);
  check_single(q_source, bundle);
  std::vector<Tensor<float>> ys;
  for (std::size_t i = 0; i < l; ++i) ys.push_back(style_draw(bundle, d, rng));
  const auto z = content_draw(q_source, rng);
  std::vector<Tensor<float>> zs(l, z);
  std::vector<LatentPair> tags;
  for (const auto& y : ys) tags.push_back({to_vec(y), to_vec(z), prior_tag(bundle, d), posterior_tag(src)});
  return decode_rows(bundle.decoders[d], ys, zs, tags);
}

std::vector<Translation> edit_contents(const ModelBundle<float>& bundle,
                                       const Posterior<float>& q_source,
                                       const std::string& target, std::size_t m, Rng& rng,
                                       SourceRef src) {
  if (m == 0) throw std::invalid_argument("edit_contents: m must be >= 1");
  const std::size_t d = target_index(bundle, target);
  check_single(q_source, bundle);
  const auto y = style_draw(bundle, d, rng);
  std::vector<Tensor<float>> zs;
  for (std::size_t i = 0; i < m; ++i) zs.push_back(content_draw(q_source, rng));
  std::vector<Tensor<float>> ys(m, y);
  std::vector<LatentPair> tags;
  for (const auto& z : zs) tags.push_back({to_vec(y), to_vec(z), prior_tag(bundle, d), posterior_tag(src)});
  return decode_rows(bundle.decoders[d], ys, zs, tags);
}

std::size_t mixture_decoder(const std::vector<double>& weights) {
  if (weights.empty()) throw std::invalid_argument("mixture weights are empty");
  std::size_t best = 0;
  for (std::size_t i = 1; i < weights.size(); ++i)
    if (weights[i] > weights[best]) best = i;
  return best + 1;
}

MixedTranslation mixed_translate(const ModelBundle<float>& bundle,
                                 const Posterior<float>& q_source,
                                 const std::vector<double>& weights, Rng& rng, SourceRef src) {
  if (weights.size() != bundle.num_targets()) {
    throw std::invalid_argument("mixture needs " + std::to_string(bundle.num_targets()) +
                                " weights (one per target), got " +
                                std::to_string(weights.size()));
  }
  check_simplex(weights);
  check_single(q_source, bundle);
  std::vector<DiagGaussian<float>> comps;
  for (std::size_t i = 1; i < bundle.domains.size(); ++i) comps.push_back(bundle.style_prior(i));
  MixturePrior<float> prior(std::move(comps), weights);
  auto draw = mixture_sample(prior, rng);
  const auto z = content_draw(q_source, rng);
  const std::size_t dec = mixture_decoder(weights);

  std::size_t nonzero = 0;
  for (double w : weights) nonzero += w > 0.0 ? 1 : 0;
  const std::string y_tag = nonzero == 1 ? prior_tag(bundle, dec) : mixture_tag(weights);
  LatentPair tag{to_vec(draw.value), to_vec(z), y_tag, posterior_tag(src)};
  auto rendered = decode_rows(bundle.decoders[dec], {draw.value}, {z}, {tag});
  return {std::move(rendered.front()), dec, draw.component + 1};
}

template <typename T>
BatchTranslation<T> translate_batch(const ModelBundle<T>& bundle, const Posterior<T>& q_source,
                                    std::size_t target, Rng& rng) {
  if (target == 0 || target >= bundle.domains.size()) {
    throw std::out_of_range("translate_batch: domain index " + std::to_string(target) +
                            " is not a target");
  }
  const std::size_t B = q_source.content.batch();
  const auto prior = bundle.style_prior(target);
  auto eps_y = standard_normal<T>({B, prior.dim()}, rng);
  auto y = add(prior.mean(), eps_y);
  auto eps_z = standard_normal<T>(q_source.content.mean().shape(), rng);
  auto z = rsample(q_source.content, eps_z);
  auto images = bundle.decoders[target](y, z);
  return {images, {y, z}};
}

template BatchTranslation<float> translate_batch(const ModelBundle<float>&,
                                                 const Posterior<float>&, std::size_t, Rng&);
template BatchTranslation<double> translate_batch(const ModelBundle<double>&,
                                                  const Posterior<double>&, std::size_t, Rng&);

}  // namespace vbitn
