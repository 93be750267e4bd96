#include "vbitn/networks.hpp"

#include <cmath>
#include <stdexcept>

#include "vbitn/autodiff/ops.hpp"

namespace vbitn {

namespace {

constexpr double kLeak = 0.2;

template <typename T>
Tensor<T> glorot(const Shape& shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<T> v(numel_of(shape));
  for (auto& x : v) x = static_cast<T>((2.0 * rng.uniform() - 1.0) * limit);
  return Tensor<T>(shape, std::move(v), true);
}

template <typename T>
Linear<T> make_linear(std::size_t in, std::size_t out, Rng& rng) {
  return {glorot<T>({in, out}, in, out, rng), Tensor<T>::zeros({out}, true)};
}

template <typename T>
Conv<T> make_conv(std::size_t in, std::size_t out, std::size_t stride, Rng& rng) {
  return {glorot<T>({3, 3, in, out}, 9 * in, 9 * out, rng), Tensor<T>::zeros({out}, true), stride};
}

template <typename T>
Tensor<T> maybe_detach(const Tensor<T>& t, bool frozen) {
  return frozen ? t.detach() : t;
}

template <typename T>
Linear<T> frozen_copy(const Linear<T>& l) {
  return {l.w.detach(), l.b.detach()};
}

template <typename T>
Conv<T> frozen_copy(const Conv<T>& c) {
  return {c.w.detach(), c.b.detach(), c.stride};
}

template <typename T>
void push(std::vector<NamedParam<T>>& out, const std::string& layer, const Linear<T>& l) {
  out.push_back({layer + "/w", l.w});
  out.push_back({layer + "/b", l.b});
}

template <typename T>
void push(std::vector<NamedParam<T>>& out, const std::string& layer, const Conv<T>& c) {
  out.push_back({layer + "/w", c.w});
  out.push_back({layer + "/b", c.b});
}

template <typename T>
void check_images(const char* who, const NetConfig& cfg, const Tensor<T>& x) {
  if (x.rank() != 4 || x.dim(1) != cfg.height || x.dim(2) != cfg.width ||
      x.dim(3) != cfg.channels) {
    throw ShapeError(std::string(who) + ": expected images [B," + std::to_string(cfg.height) +
                     "," + std::to_string(cfg.width) + "," + std::to_string(cfg.channels) +
                     "], got " + to_string(x.shape()));
  }
}

template <typename T>
Tensor<T> run_trunk(const std::vector<Conv<T>>& trunk, Tensor<T> h, bool frozen) {
  for (const auto& c : trunk) h = leaky_relu(c(h, frozen), T(kLeak));
  return reshape(h, {h.dim(0), h.numel() / h.dim(0)});
}

}  // namespace

void NetConfig::validate() const {
  if (widths.empty()) throw std::invalid_argument("net: need at least one conv block");
  const std::size_t f = std::size_t{1} << widths.size();
  if (height == 0 || width == 0 || height % f != 0 || width % f != 0) {
    throw std::invalid_argument("net: image " + std::to_string(height) + "x" +
                                std::to_string(width) + " not divisible by 2^" +
                                std::to_string(widths.size()));
  }
  if (channels == 0 || style_dim == 0 || content_dim == 0) {
    throw std::invalid_argument("net: channels and latent dims must be positive");
  }
}

template <typename T>
Tensor<T> Linear<T>::operator()(const Tensor<T>& x, bool frozen) const {
  return add(matmul(x, maybe_detach(w, frozen)), maybe_detach(b, frozen));
}

template <typename T>
Tensor<T> Conv<T>::operator()(const Tensor<T>& x, bool frozen) const {
  return add(conv2d(x, maybe_detach(w, frozen), {stride, 1}), maybe_detach(b, frozen));
}

template <typename T>
Encoder<T>::Encoder(const NetConfig& cfg, Rng& init) : cfg_(cfg) {
  cfg_.validate();
  std::size_t in = cfg.channels;
  for (std::size_t w : cfg.widths) {
    trunk_.push_back(make_conv<T>(in, w, 2, init));
    in = w;
  }
  style_head_ = make_linear<T>(cfg.flat_features(), 2 * cfg.style_dim, init);
  content_head_ = make_linear<T>(cfg.flat_features(), 2 * cfg.content_dim, init);
}

template <typename T>
Posterior<T> Encoder<T>::operator()(const Tensor<T>& x) const {
  check_images("encode", cfg_, x);
  auto h = run_trunk(trunk_, x, false);
  auto s = style_head_(h);
  auto c = content_head_(h);
  const std::size_t ds = cfg_.style_dim, dc = cfg_.content_dim;
  return {DiagGaussian<T>::from_log_variance(slice(s, 1, 0, ds), slice(s, 1, ds, ds)),
          DiagGaussian<T>::from_log_variance(slice(c, 1, 0, dc), slice(c, 1, dc, dc))};
}

template <typename T>
std::vector<NamedParam<T>> Encoder<T>::parameters() const {
  std::vector<NamedParam<T>> out;
  for (std::size_t i = 0; i < trunk_.size(); ++i) push(out, "conv" + std::to_string(i), trunk_[i]);
  push(out, "style", style_head_);
  push(out, "content", content_head_);
  return out;
}

template <typename T>
Encoder<T> Encoder<T>::frozen() const {
  Encoder copy = *this;
  for (auto& c : copy.trunk_) c = frozen_copy(c);
  copy.style_head_ = frozen_copy(style_head_);
  copy.content_head_ = frozen_copy(content_head_);
  return copy;
}

template <typename T>
Decoder<T>::Decoder(const NetConfig& cfg, Rng& init) : cfg_(cfg) {
  cfg_.validate();
  stem_ = make_linear<T>(cfg.style_dim + cfg.content_dim, cfg.flat_features(), init);
  for (std::size_t i = cfg.widths.size(); i-- > 0;) {
    const std::size_t in = cfg.widths[i];
    const std::size_t out = i == 0 ? cfg.channels : cfg.widths[i - 1];
    ups_.push_back(make_conv<T>(in, out, 1, init));
  }
}

template <typename T>
Tensor<T> Decoder<T>::operator()(const Tensor<T>& y, const Tensor<T>& z) const {
  if (y.rank() != 2 || z.rank() != 2 || y.dim(1) != cfg_.style_dim ||
      z.dim(1) != cfg_.content_dim || y.dim(0) != z.dim(0)) {
    throw ShapeError("decode: expected y [B," + std::to_string(cfg_.style_dim) + "] and z [B," +
                     std::to_string(cfg_.content_dim) + "], got " + to_string(y.shape()) +
                     " and " + to_string(z.shape()));
  }
  const std::size_t batch = y.dim(0);
  auto h = leaky_relu(stem_(concat<T>({y, z}, 1)), T(kLeak));
  h = reshape(h, {batch, cfg_.base_height(), cfg_.base_width(), cfg_.widths.back()});
  for (std::size_t i = 0; i < ups_.size(); ++i) {
    h = ups_[i](upsample2x(h));
    h = i + 1 < ups_.size() ? leaky_relu(h, T(kLeak)) : sigmoid(h);
  }
  return h;
}

template <typename T>
std::vector<NamedParam<T>> Decoder<T>::parameters() const {
  std::vector<NamedParam<T>> out;
  push(out, "fc", stem_);
  for (std::size_t i = 0; i < ups_.size(); ++i) push(out, "up" + std::to_string(i), ups_[i]);
  return out;
}

template <typename T>
Decoder<T> Decoder<T>::frozen() const {
  Decoder copy = *this;
  copy.stem_ = frozen_copy(stem_);
  for (auto& c : copy.ups_) c = frozen_copy(c);
  return copy;
}

template <typename T>
Discriminator<T>::Discriminator(const NetConfig& cfg, Rng& init) : cfg_(cfg) {
  cfg_.validate();
  std::size_t in = cfg.channels;
  for (std::size_t w : cfg.widths) {
    trunk_.push_back(make_conv<T>(in, w, 2, init));
    in = w;
  }
  head_ = make_linear<T>(cfg.flat_features(), 1, init);
}

template <typename T>
Tensor<T> Discriminator<T>::operator()(const Tensor<T>& x, bool frozen) const {
  check_images("discriminate", cfg_, x);
  auto h = run_trunk(trunk_, x, frozen);
  auto logit = head_(h, frozen);
  return reshape(sigmoid(logit), {x.dim(0)});
}

template <typename T>
std::vector<NamedParam<T>> Discriminator<T>::parameters() const {
  std::vector<NamedParam<T>> out;
  for (std::size_t i = 0; i < trunk_.size(); ++i) push(out, "conv" + std::to_string(i), trunk_[i]);
  push(out, "fc", head_);
  return out;
}

template <typename T>
Discriminator<T> Discriminator<T>::frozen() const {
  Discriminator copy = *this;
  for (auto& c : copy.trunk_) c = frozen_copy(c);
  copy.head_ = frozen_copy(head_);
  return copy;
}

template <typename T>
ModelBundle<T> ModelBundle<T>::create(const NetConfig& net, std::vector<DomainSpec> domains,
                                      std::uint64_t seed) {
  net.validate();
  validate_domains(domains);
  ModelBundle b{net, std::move(domains), {}, {}, {}};
  for (std::size_t d = 0; d < b.domains.size(); ++d) {
    if (b.domains[d].alpha.size() != net.style_dim) {
      throw std::invalid_argument("bundle: alpha of '" + b.domains[d].id +
                                  "' does not match style_dim");
    }
    Rng enc = Rng::keyed(seed, 0, "enc");
    Rng dec = Rng::keyed(seed, 0, "dec");
    b.encoders.emplace_back(net, enc);
    b.decoders.emplace_back(net, dec);
    if (d > 0) {
      Rng disc = Rng::keyed(seed, d, "disc");
      b.discriminators.emplace_back(net, disc);
    }
  }
  return b;
}

template <typename T>
std::size_t ModelBundle<T>::domain_index(const std::string& id) const {
  for (std::size_t i = 0; i < domains.size(); ++i)
    if (domains[i].id == id) return i;
  throw std::out_of_range("unknown domain '" + id + "'");
}

template <typename T>
DiagGaussian<T> ModelBundle<T>::style_prior(std::size_t domain) const {
  const auto& a = domains.at(domain).alpha;
  return DiagGaussian<T>::unit(Tensor<T>({a.size()}, std::vector<T>(a.begin(), a.end())));
}

template <typename T>
DiagGaussian<T> ModelBundle<T>::content_prior() const {
  return DiagGaussian<T>::standard(net.content_dim);
}

template <typename T>
const Discriminator<T>& ModelBundle<T>::discriminator_for(std::size_t domain) const {
  if (domain == 0 || domain >= domains.size()) {
    throw std::out_of_range("no discriminator for domain index " + std::to_string(domain));
  }
  return discriminators[domain - 1];
}

template <typename T>
std::vector<NamedParam<T>> ModelBundle<T>::generator_parameters() const {
  std::vector<NamedParam<T>> out;
  for (std::size_t d = 0; d < domains.size(); ++d) {
    for (auto& p : encoders[d].parameters()) out.push_back({domains[d].id + "/enc/" + p.name, p.value});
    for (auto& p : decoders[d].parameters()) out.push_back({domains[d].id + "/dec/" + p.name, p.value});
  }
  return out;
}

template <typename T>
std::vector<NamedParam<T>> ModelBundle<T>::discriminator_parameters() const {
  std::vector<NamedParam<T>> out;
  for (std::size_t d = 1; d < domains.size(); ++d) {
    for (auto& p : discriminators[d - 1].parameters())
      out.push_back({domains[d].id + "/disc/" + p.name, p.value});
  }
  return out;
}

template <typename T>
std::vector<NamedParam<T>> ModelBundle<T>::parameters() const {
  auto out = generator_parameters();
  auto disc = discriminator_parameters();
  out.insert(out.end(), disc.begin(), disc.end());
  return out;
}

template <typename T>
ModelBundle<T> ModelBundle<T>::snapshot() const {
  ModelBundle copy{net, domains, {}, {}, {}};
  for (const auto& e : encoders) copy.encoders.push_back(e.frozen());
  for (const auto& d : decoders) copy.decoders.push_back(d.frozen());
  for (const auto& d : discriminators) copy.discriminators.push_back(d.frozen());
  return copy;
}

template struct Linear<float>;
template struct Linear<double>;
template struct Conv<float>;
template struct Conv<double>;
template class Encoder<float>;
template class Encoder<double>;
template class Decoder<float>;
template class Decoder<double>;
template class Discriminator<float>;
template class Discriminator<double>;
template struct ModelBundle<float>;
template struct ModelBundle<double>;

}  // namespace vbitn
