#include "vbitn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace vbitn {

std::array<double, 64> luminance_8x8(const Image& image) {
  if (image.height % 8 != 0 || image.width % 8 != 0 || image.height == 0) {
    throw std::invalid_argument("luminance_8x8: image size must be a multiple of 8");
  }
  const std::size_t bh = image.height / 8, bw = image.width / 8;
  std::array<double, 64> out{};
  for (std::size_t r = 0; r < image.height; ++r)
    for (std::size_t c = 0; c < image.width; ++c) {
      const double y = 0.299 * image.at(r, c, 0) + 0.587 * image.at(r, c, 1) + 0.114 * image.at(r, c, 2);
      out[(r / bh) * 8 + c / bw] += y;
    }
  for (auto& v : out) v /= static_cast<double>(bh * bw);
  return out;
}

double diversity(const std::vector<Image>& images) {
  if (images.size() < 2) throw std::invalid_argument("diversity needs at least two images");
  std::vector<std::array<double, 64>> lum;
  for (const auto& im : images) {
    if (im.height != images[0].height || im.width != images[0].width) {
      throw std::invalid_argument("diversity: images differ in size");
    }
    lum.push_back(luminance_8x8(im));
  }
  double total = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < lum.size(); ++i)
    for (std::size_t j = i + 1; j < lum.size(); ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 64; ++k) s += (lum[i][k] - lum[j][k]) * (lum[i][k] - lum[j][k]);
      total += std::sqrt(s) / 8.0;
      ++pairs;
    }
  return total / static_cast<double>(pairs);
}

std::array<double, 3> color_features(const Image& image) {
  std::array<double, 3> f{};
  const std::size_t n = image.height * image.width;
  if (n == 0) throw std::invalid_argument("color_features: empty image");
  for (std::size_t p = 0; p < n; ++p) {
    const double r = image.pixels[3 * p], g = image.pixels[3 * p + 1], b = image.pixels[3 * p + 2];
    f[0] += std::max({r, g, b}) - std::min({r, g, b});
    f[1] += r - b;
    f[2] += g - (r + b) / 2;
  }
  for (auto& v : f) v /= static_cast<double>(n);
  return f;
}

void DomainClassifier::fit(const std::vector<ImageBatch>& labelled) {
  if (labelled.size() < 2) throw std::invalid_argument("classifier needs at least two domains");
  labels_.clear();
  mean_.clear();
  var_.clear();
  for (const auto& batch : labelled) {
    if (batch.size() < 2) throw std::invalid_argument("classifier needs two images per domain");
    std::array<double, 3> m{}, v{};
    std::vector<std::array<double, 3>> feats;
    for (std::size_t i = 0; i < batch.size(); ++i) feats.push_back(color_features(batch.image(i)));
    for (const auto& f : feats)
      for (int k = 0; k < 3; ++k) m[k] += f[k];
    for (auto& x : m) x /= static_cast<double>(feats.size());
    for (const auto& f : feats)
      for (int k = 0; k < 3; ++k) v[k] += (f[k] - m[k]) * (f[k] - m[k]);
    // The floor keeps a constant feature (grayscale chroma) from producing
    // an infinitely sharp class.
    for (auto& x : v) x = std::max(x / static_cast<double>(feats.size() - 1), 1e-5);
    labels_.push_back(batch.domain.front());
    mean_.push_back(m);
    var_.push_back(v);
  }
}

std::string DomainClassifier::predict(const Image& image) const {
  if (!trained()) throw std::logic_error("domain classifier has not been fitted");
  const auto f = color_features(image);
  std::size_t best = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < labels_.size(); ++c) {
    double ll = 0;
    for (int k = 0; k < 3; ++k) {
      const double d = f[k] - mean_[c][k];
      ll -= 0.5 * (d * d / var_[c][k] + std::log(2 * std::numbers::pi * var_[c][k]));
    }
    if (ll > best_ll) {
      best_ll = ll;
      best = c;
    }
  }
  return labels_[best];
}

double DomainClassifier::accuracy(const ImageBatch& images, const std::string& domain) const {
  std::vector<Image> v;
  for (std::size_t i = 0; i < images.size(); ++i) v.push_back(images.image(i));
  return domain_score(v, *this, domain);
}

double domain_score(const std::vector<Image>& images, const DomainClassifier& classifier,
                    const std::string& target) {
  if (!classifier.trained()) throw std::logic_error("domain classifier has not been fitted");
  if (images.empty()) throw std::invalid_argument("domain_score: no images");
  std::size_t hits = 0;
  for (const auto& im : images) hits += classifier.predict(im) == target ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(images.size());
}

std::vector<std::uint8_t> MaskExtractor::extract(const Image& image) const {
  const std::size_t H = image.height, W = image.width;
  std::array<std::vector<float>, 3> border;
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      if (r != 0 && c != 0 && r != H - 1 && c != W - 1) continue;
      for (int ch = 0; ch < 3; ++ch) border[ch].push_back(image.at(r, c, ch));
    }
  std::array<double, 3> bg{};
  for (int ch = 0; ch < 3; ++ch) {
    auto& v = border[ch];
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
    bg[ch] = v[v.size() / 2];
  }
  std::vector<std::uint8_t> mask(H * W);
  const double t2 = threshold_ * threshold_;
  for (std::size_t p = 0; p < H * W; ++p) {
    double d2 = 0;
    for (int ch = 0; ch < 3; ++ch) {
      const double d = image.pixels[3 * p + ch] - bg[ch];
      d2 += d * d;
    }
    mask[p] = d2 > t2 ? 1 : 0;
  }
  return mask;
}

double MaskExtractor::mean_iou(const ImageBatch& real) const {
  if (!real.has_masks()) throw std::invalid_argument("mean_iou: batch has no ground-truth masks");
  double total = 0;
  for (std::size_t i = 0; i < real.size(); ++i) total += iou(extract(real.image(i)), real.mask(i));
  return total / static_cast<double>(real.size());
}

double MaskExtractor::calibrate(const std::vector<ImageBatch>& real) {
  if (real.empty()) throw std::invalid_argument("calibrate: no images");
  std::vector<std::pair<double, double>> scores;  // (threshold, mean IoU)
  for (int k = 1; k <= 40; ++k) {
    threshold_ = 0.02 * k;
    double total = 0;
    for (const auto& b : real) total += mean_iou(b);
    scores.emplace_back(threshold_, total / static_cast<double>(real.size()));
  }
  double best = 0;
  for (const auto& s : scores) best = std::max(best, s.second);
  // Real images are crisp, so many thresholds tie; the middle of the
  // near-optimal range leaves the most slack for blurred model outputs.
  std::vector<double> near;
  for (const auto& s : scores)
    if (s.second >= best - 1e-3) near.push_back(s.first);
  threshold_ = near[near.size() / 2];
  return mean_of_batches(real);
}

double MaskExtractor::mean_of_batches(const std::vector<ImageBatch>& real) const {
  double total = 0;
  for (const auto& b : real) total += mean_iou(b);
  return total / static_cast<double>(real.size());
}

double iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("iou: mask sizes differ (" + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]) ? 1 : 0;
    uni += (a[i] || b[i]) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double content_iou(const std::vector<Image>& translated,
                   const std::vector<std::vector<std::uint8_t>>& source_masks,
                   const MaskExtractor& extractor) {
  if (translated.size() != source_masks.size() || translated.empty()) {
    throw std::invalid_argument("content_iou: " + std::to_string(translated.size()) +
                                " images vs " + std::to_string(source_masks.size()) + " masks");
  }
  double total = 0;
  for (std::size_t i = 0; i < translated.size(); ++i) {
    total += iou(extractor.extract(translated[i]), source_masks[i]);
  }
  return total / static_cast<double>(translated.size());
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "target           " << target << "\n"
     << "n                " << n << "\n"
     << "diversity-proxy  " << diversity << "\n"
     << "domain_score     " << domain_score << "\n"
     << "content_iou      " << content_iou << "\n"
     << "elbo_test        " << elbo_test << "\n";
  return os.str();
}

std::string EvalReport::to_json() const {
  nlohmann::json j{{"kind", "eval"},          {"target", target},
                   {"n", n},                  {"diversity_proxy", diversity},
                   {"domain_score", domain_score}, {"content_iou", content_iou},
                   {"elbo_test", elbo_test}};
  return j.dump();
}

}  // namespace vbitn
