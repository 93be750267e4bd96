#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace vbitn {

/// Unreadable or malformed image data.
class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Interleaved RGB image with channel values in [0, 1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;  // height * width * 3

  float at(std::size_t r, std::size_t c, std::size_t ch) const {
    return pixels[(r * width + c) * 3 + ch];
  }
};

/// Clamps to [0, 1] and rounds to the nearest 8-bit level.
std::uint8_t quantize(float v);

std::vector<std::uint8_t> encode_png(const Image& image);
/// Any PNG colour type is accepted and converted to 8-bit RGB.
Image decode_png(const std::vector<std::uint8_t>& bytes);

void save_image(const std::filesystem::path& path, const Image& image);
Image load_image(const std::filesystem::path& path);

/// Tiles equally sized images left to right, wrapping after `columns`.
Image make_grid(const std::vector<Image>& images, std::size_t columns, std::size_t gap = 1);

}  // namespace vbitn
