#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vbitn/autodiff/tensor.hpp"
#include "vbitn/image_io.hpp"
#include "vbitn/rng.hpp"

namespace vbitn {

enum class ShapeKind { circle, square, triangle };
enum class Texture { flat, stripes, grain };

const char* to_string(ShapeKind k);
const char* to_string(Texture t);

/// Content factors of one synthetic image. `radius` is the circumradius, so
/// every kind lies within the disc of that radius around the center.
struct SceneSpec {
  ShapeKind kind = ShapeKind::circle;
  double row = 16.0;
  double col = 16.0;
  double radius = 6.0;
  double rotation = 0.0;
};

struct Rgb {
  float r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

/// Style factors of one synthetic image.
struct StyleSpec {
  std::string domain_id;
  Rgb foreground;
  Rgb background;
  Rgb outline;
  Texture texture = Texture::flat;
  std::size_t stroke = 0;        // outline width in pixels, 0 = none
  double stripe_period = 4.0;    // pixels
  double stripe_angle = 0.0;     // radians
  float stripe_shade = 0.6f;     // alternate stripes use foreground * shade
  float grain_amplitude = 0.0f;  // uniform +- amplitude on the foreground
  std::uint64_t grain_seed = 0;
};

/// Ranges the scene sampler draws from; shared by every domain.
struct SceneRanges {
  double min_radius = 5.0;
  double max_radius = 10.0;
  double margin = 2.0;
};

struct Rendered {
  Image image;
  std::vector<std::uint8_t> mask;  // 1 on the shape interior
};

/// Rasterizes at pixel centers. Throws std::invalid_argument if the shape
/// reaches into the border margin or leaves the canvas.
Rendered render(const SceneSpec& scene, const StyleSpec& style, std::size_t height = 32,
                std::size_t width = 32, double margin = 2.0);

SceneSpec sample_scene(Rng& rng, std::size_t height, std::size_t width,
                       const SceneRanges& ranges = {});

/// Domain-conditional style draw. Known domains: "ink" (grayscale, outlined),
/// "paint" (warm saturated fill on a pale tint), "neon" (cool hues on a dark
/// ground). Throws std::invalid_argument for any other id.
StyleSpec sample_style(const std::string& domain_id, Rng& rng);
const std::vector<std::string>& known_style_domains();

/// Images of one domain with ground truth.
struct ImageBatch {
  std::size_t height = 32;
  std::size_t width = 32;
  std::vector<float> pixels;  // size() * height * width * 3
  std::vector<std::string> domain;
  std::vector<std::uint8_t> masks;  // size() * height * width, may be empty
  std::vector<SceneSpec> scenes;    // may be empty

  std::size_t size() const { return domain.size(); }
  std::size_t image_numel() const { return height * width * 3; }
  bool has_masks() const { return !masks.empty(); }
  Image image(std::size_t i) const;
  std::vector<std::uint8_t> mask(std::size_t i) const;
  /// Selected images stacked as [k, H, W, 3].
  Tensor<float> gather(const std::vector<std::size_t>& indices) const;
  /// The first `n` images.
  ImageBatch head(std::size_t n) const;
  void push_back(const Image& image, const std::string& domain_id,
                 const std::vector<std::uint8_t>* mask = nullptr, const SceneSpec* scene = nullptr);
};

/// n images with i.i.d. scenes and domain styles. Deterministic in
/// (domain, n, seed, split); the split name keys independent streams.
ImageBatch generate_dataset(const std::string& domain_id, std::size_t n, std::uint64_t seed,
                            const std::string& split = "train", std::size_t height = 32,
                            std::size_t width = 32);

struct DatasetLayout {
  std::vector<std::string> domains;
  std::size_t train = 4096;
  std::size_t test = 512;
  std::uint64_t seed = 0;
  std::size_t height = 32;
  std::size_t width = 32;
};

/// Writes {root}/{domain}/{split}/{index:05}.png, the mask mirror under
/// {root}/masks/, and {root}/manifest.json.
void write_dataset(const std::filesystem::path& root, const DatasetLayout& layout);
/// Reads one split back; masks are loaded when the mirror exists.
ImageBatch load_split(const std::filesystem::path& root, const std::string& domain,
                      const std::string& split);
std::filesystem::path image_path(const std::filesystem::path& root, const std::string& domain,
                                 const std::string& split, std::size_t index);

}  // namespace vbitn
