#include "vbitn/data_synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "json.hpp"

namespace vbitn {

namespace {

constexpr double kPi = std::numbers::pi;

Rgb hsv(double hue_deg, double s, double v) {
  double h = std::fmod(hue_deg, 360.0);
  if (h < 0) h += 360.0;
  const double c = v * s;
  const double x = c * (1 - std::fabs(std::fmod(h / 60.0, 2.0) - 1));
  const double m = v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h / 60.0)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  return {static_cast<float>(r + m), static_cast<float>(g + m), static_cast<float>(b + m)};
}

Rgb gray(double v) {
  const auto f = static_cast<float>(v);
  return {f, f, f};
}

double between(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

Rgb scaled(Rgb c, float k) { return {c.r * k, c.g * k, c.b * k}; }

/// Signed distance from a pixel center to the shape boundary, negative
/// inside. Exact for circles; for polygons the max over edge half-planes,
/// which is exact inside and a lower bound outside.
double signed_distance(const SceneSpec& s, double r, double c) {
  const double dy = r - s.row, dx = c - s.col;
  if (s.kind == ShapeKind::circle) return std::hypot(dy, dx) - s.radius;
  const int n = s.kind == ShapeKind::square ? 4 : 3;
  // Vertices on the circumcircle; for a regular n-gon the apothem is
  // radius * cos(pi / n), and edge normals sit between vertices.
  const double apothem = s.radius * std::cos(kPi / n);
  double d = -1e300;
  for (int i = 0; i < n; ++i) {
    const double a = s.rotation + (2 * i + 1) * kPi / n;
    d = std::max(d, dx * std::cos(a) + dy * std::sin(a) - apothem);
  }
  return d;
}

std::string pad5(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", i);
  return buf;
}

}  // namespace

const char* to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::circle: return "circle";
    case ShapeKind::square: return "square";
    case ShapeKind::triangle: return "triangle";
  }
  return "?";
}

const char* to_string(Texture t) {
  switch (t) {
    case Texture::flat: return "flat";
    case Texture::stripes: return "stripes";
    case Texture::grain: return "grain";
  }
  return "?";
}

Rendered render(const SceneSpec& scene, const StyleSpec& style, std::size_t height,
                std::size_t width, double margin) {
  if (!(scene.radius >= 0) || !std::isfinite(scene.row) || !std::isfinite(scene.col)) {
    throw std::invalid_argument("render: invalid scene geometry");
  }
  if (scene.row - scene.radius < margin || scene.col - scene.radius < margin ||
      scene.row + scene.radius > static_cast<double>(height) - margin ||
      scene.col + scene.radius > static_cast<double>(width) - margin) {
    throw std::invalid_argument("render: shape at (" + std::to_string(scene.row) + ", " +
                                std::to_string(scene.col) + ") radius " +
                                std::to_string(scene.radius) + " leaves the " +
                                std::to_string(margin) + "px canvas margin");
  }
  Rendered out;
  out.image = Image{height, width, std::vector<float>(height * width * 3)};
  out.mask.assign(height * width, 0);
  Rng grain(style.grain_seed);
  const double ca = std::cos(style.stripe_angle), sa = std::sin(style.stripe_angle);
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      const double pr = static_cast<double>(i) + 0.5, pc = static_cast<double>(j) + 0.5;
      const double d = signed_distance(scene, pr, pc);
      Rgb c = style.background;
      if (d < 0) {
        out.mask[i * width + j] = 1;
        if (style.stroke > 0 && d >= -static_cast<double>(style.stroke)) {
          c = style.outline;
        } else {
          c = style.foreground;
          if (style.texture == Texture::stripes) {
            const double t = (pc * ca + pr * sa) / style.stripe_period;
            if (static_cast<long>(std::floor(t)) % 2 != 0) c = scaled(c, style.stripe_shade);
          } else if (style.texture == Texture::grain) {
            const auto n = static_cast<float>(2 * grain.uniform() - 1) * style.grain_amplitude;
            c = {c.r + n, c.g + n, c.b + n};
          }
        }
      }
      float* px = out.image.pixels.data() + (i * width + j) * 3;
      px[0] = std::clamp(c.r, 0.0f, 1.0f);
      px[1] = std::clamp(c.g, 0.0f, 1.0f);
      px[2] = std::clamp(c.b, 0.0f, 1.0f);
    }
  }
  return out;
}

SceneSpec sample_scene(Rng& rng, std::size_t height, std::size_t width, const SceneRanges& ranges) {
  SceneSpec s;
  s.kind = static_cast<ShapeKind>(rng.below(3));
  s.radius = between(rng, ranges.min_radius, ranges.max_radius);
  s.row = between(rng, ranges.margin + s.radius, static_cast<double>(height) - ranges.margin - s.radius);
  s.col = between(rng, ranges.margin + s.radius, static_cast<double>(width) - ranges.margin - s.radius);
  s.rotation = between(rng, 0.0, 2 * kPi);
  return s;
}

const std::vector<std::string>& known_style_domains() {
  static const std::vector<std::string> ids = {"ink", "paint", "neon"};
  return ids;
}

StyleSpec sample_style(const std::string& domain_id, Rng& rng) {
  StyleSpec s;
  s.domain_id = domain_id;
  if (domain_id == "ink") {
    s.background = gray(between(rng, 0.82, 0.97));
    s.foreground = gray(between(rng, 0.35, 0.60));
    s.outline = gray(between(rng, 0.0, 0.15));
    s.stroke = 1 + rng.below(2);
  } else if (domain_id == "paint") {
    const double hue = between(rng, -30.0, 50.0);
    s.foreground = hsv(hue, between(rng, 0.65, 1.0), between(rng, 0.70, 1.0));
    s.background = hsv(hue + between(rng, -10.0, 10.0), between(rng, 0.08, 0.20), between(rng, 0.90, 0.98));
    s.outline = s.foreground;
    if (rng.below(2) == 1) {
      s.texture = Texture::grain;
      s.grain_amplitude = 0.05f;
      s.grain_seed = rng.next_u64();
    }
  } else if (domain_id == "neon") {
    const double hue = between(rng, 170.0, 260.0);
    s.foreground = hsv(hue, between(rng, 0.70, 1.0), between(rng, 0.80, 1.0));
    s.background = hsv(hue, between(rng, 0.20, 0.50), between(rng, 0.05, 0.20));
    s.outline = s.foreground;
    if (rng.below(2) == 1) {
      s.texture = Texture::stripes;
      s.stripe_period = between(rng, 3.0, 5.0);
      s.stripe_angle = between(rng, 0.0, kPi);
    }
  } else {
    throw std::invalid_argument("no style family for domain '" + domain_id + "'");
  }
  return s;
}

Image ImageBatch::image(std::size_t i) const {
  if (i >= size()) throw std::out_of_range("image index " + std::to_string(i) + " out of range");
  const auto n = image_numel();
  auto first = pixels.begin() + static_cast<std::ptrdiff_t>(i * n);
  return Image{height, width, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(n))};
}

std::vector<std::uint8_t> ImageBatch::mask(std::size_t i) const {
  if (!has_masks()) throw std::logic_error("batch carries no masks");
  if (i >= size()) throw std::out_of_range("mask index " + std::to_string(i) + " out of range");
  const auto n = height * width;
  auto first = masks.begin() + static_cast<std::ptrdiff_t>(i * n);
  return {first, first + static_cast<std::ptrdiff_t>(n)};
}

Tensor<float> ImageBatch::gather(const std::vector<std::size_t>& indices) const {
  const auto n = image_numel();
  std::vector<float> out(indices.size() * n);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= size()) throw std::out_of_range("gather: index out of range");
    std::copy_n(pixels.begin() + static_cast<std::ptrdiff_t>(indices[k] * n), n,
                out.begin() + static_cast<std::ptrdiff_t>(k * n));
  }
  return Tensor<float>({indices.size(), height, width, 3}, std::move(out));
}

ImageBatch ImageBatch::head(std::size_t n) const {
  n = std::min(n, size());
  ImageBatch out;
  out.height = height;
  out.width = width;
  out.pixels.assign(pixels.begin(), pixels.begin() + static_cast<std::ptrdiff_t>(n * image_numel()));
  out.domain.assign(domain.begin(), domain.begin() + static_cast<std::ptrdiff_t>(n));
  if (has_masks()) out.masks.assign(masks.begin(), masks.begin() + static_cast<std::ptrdiff_t>(n * height * width));
  if (!scenes.empty()) out.scenes.assign(scenes.begin(), scenes.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

void ImageBatch::push_back(const Image& image, const std::string& domain_id,
                           const std::vector<std::uint8_t>* mask, const SceneSpec* scene) {
  if (size() == 0 && pixels.empty()) {
    height = image.height;
    width = image.width;
  }
  if (image.height != height || image.width != width) {
    throw std::invalid_argument("ImageBatch: image size differs from batch");
  }
  pixels.insert(pixels.end(), image.pixels.begin(), image.pixels.end());
  domain.push_back(domain_id);
  if (mask) masks.insert(masks.end(), mask->begin(), mask->end());
  if (scene) scenes.push_back(*scene);
}

ImageBatch generate_dataset(const std::string& domain_id, std::size_t n, std::uint64_t seed,
                            const std::string& split, std::size_t height, std::size_t width) {
  if (n == 0) throw std::invalid_argument("generate_dataset: n must be >= 1");
  ImageBatch batch;
  batch.height = height;
  batch.width = width;
  const std::string scene_role = "scene/" + domain_id + "/" + split;
  const std::string style_role = "style/" + domain_id + "/" + split;
  for (std::size_t k = 0; k < n; ++k) {
    Rng scene_rng = Rng::keyed(seed, k, scene_role);
    Rng style_rng = Rng::keyed(seed, k, style_role);
    const auto scene = sample_scene(scene_rng, height, width);
    const auto style = sample_style(domain_id, style_rng);
    auto r = render(scene, style, height, width);
    batch.push_back(r.image, domain_id, &r.mask, &scene);
  }
  return batch;
}

std::filesystem::path image_path(const std::filesystem::path& root, const std::string& domain,
                                 const std::string& split, std::size_t index) {
  return root / domain / split / (pad5(index) + ".png");
}

void write_dataset(const std::filesystem::path& root, const DatasetLayout& layout) {
  if (layout.domains.size() < 2) throw std::invalid_argument("a dataset needs at least two domains");
  nlohmann::json manifest;
  manifest["seed"] = layout.seed;
  manifest["height"] = layout.height;
  manifest["width"] = layout.width;
  manifest["channels"] = 3;
  manifest["source"] = layout.domains.front();
  SceneRanges ranges;
  manifest["content_factors"] = {
      {"shape_kind", {"circle", "square", "triangle"}},
      {"radius", {ranges.min_radius, ranges.max_radius}},
      {"margin", ranges.margin},
      {"rotation", {0.0, 2 * kPi}},
  };
  for (const auto& domain : layout.domains) {
    for (const auto& [split, count] : {std::pair<std::string, std::size_t>{"train", layout.train},
                                       {"test", layout.test}}) {
      if (count == 0) continue;
      auto batch = generate_dataset(domain, count, layout.seed, split, layout.height, layout.width);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        save_image(image_path(root, domain, split, i), batch.image(i));
        Image m{batch.height, batch.width, std::vector<float>(batch.height * batch.width * 3)};
        auto mk = batch.mask(i);
        for (std::size_t p = 0; p < mk.size(); ++p)
          m.pixels[3 * p] = m.pixels[3 * p + 1] = m.pixels[3 * p + 2] = mk[p] ? 1.0f : 0.0f;
        save_image(image_path(root / "masks", domain, split, i), m);
      }
      manifest["domains"][domain][split] = count;
    }
  }
  std::ofstream out(root / "manifest.json");
  if (!out) throw std::runtime_error("cannot write " + (root / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

ImageBatch load_split(const std::filesystem::path& root, const std::string& domain,
                      const std::string& split) {
  const auto dir = root / domain / split;
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error("dataset split not found: " + dir.string());
  }
  std::size_t count = 0;
  while (std::filesystem::exists(image_path(root, domain, split, count))) ++count;
  if (count == 0) throw std::runtime_error("no images in " + dir.string());
  ImageBatch batch;
  const bool with_masks = std::filesystem::exists(image_path(root / "masks", domain, split, 0));
  for (std::size_t i = 0; i < count; ++i) {
    auto im = load_image(image_path(root, domain, split, i));
    if (with_masks) {
      auto m = load_image(image_path(root / "masks", domain, split, i));
      std::vector<std::uint8_t> mk(m.height * m.width);
      for (std::size_t p = 0; p < mk.size(); ++p) mk[p] = m.pixels[3 * p] > 0.5f ? 1 : 0;
      batch.push_back(im, domain, &mk);
    } else {
      batch.push_back(im, domain);
    }
  }
  return batch;
}

}  // namespace vbitn
