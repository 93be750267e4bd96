#include "vbitn/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace vbitn {

std::uint8_t quantize(float v) {
  if (!(v > 0.0f)) return 0;  // also maps NaN to 0
  if (v >= 1.0f) return 255;
  return static_cast<std::uint8_t>(std::lround(v * 255.0f));
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  if (image.height == 0 || image.width == 0 || image.pixels.size() != image.height * image.width * 3) {
    throw ImageError("encode_png: image buffer does not match " + std::to_string(image.height) +
                     "x" + std::to_string(image.width) + "x3");
  }
  std::vector<std::uint8_t> raw(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), raw.begin(), quantize);

  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, raw.data(), 0, nullptr)) {
    throw ImageError(std::string("png encode failed: ") + img.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, raw.data(), 0, nullptr)) {
    throw ImageError(std::string("png encode failed: ") + img.message);
  }
  out.resize(size);
  return out;
}

Image decode_png(const std::vector<std::uint8_t>& bytes) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw ImageError("not a PNG file (bad signature)");
  }
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw ImageError(std::string("malformed PNG: ") + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, raw.data(), 0, nullptr)) {
    png_image_free(&img);
    throw ImageError(std::string("malformed PNG: ") + img.message);
  }
  Image out{img.height, img.width, std::vector<float>(raw.size())};
  std::transform(raw.begin(), raw.end(), out.pixels.begin(),
                 [](std::uint8_t v) { return static_cast<float>(v) / 255.0f; });
  return out;
}

void save_image(const std::filesystem::path& path, const Image& image) {
  auto bytes = encode_png(image);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageError("write failed: " + path.string());
}

Image load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open image " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_png(bytes);
  } catch (const ImageError& e) {
    throw ImageError(path.string() + ": " + e.what());
  }
}

Image make_grid(const std::vector<Image>& images, std::size_t columns, std::size_t gap) {
  if (images.empty() || columns == 0) throw std::invalid_argument("make_grid: nothing to tile");
  const std::size_t h = images[0].height, w = images[0].width;
  for (const auto& im : images) {
    if (im.height != h || im.width != w) throw std::invalid_argument("make_grid: image sizes differ");
  }
  const std::size_t cols = std::min(columns, images.size());
  const std::size_t rows = (images.size() + cols - 1) / cols;
  Image grid{rows * h + (rows - 1) * gap, cols * w + (cols - 1) * gap, {}};
  grid.pixels.assign(grid.height * grid.width * 3, 1.0f);
  for (std::size_t k = 0; k < images.size(); ++k) {
    const std::size_t r0 = (k / cols) * (h + gap), c0 = (k % cols) * (w + gap);
    for (std::size_t r = 0; r < h; ++r)
      std::copy_n(images[k].pixels.begin() + static_cast<std::ptrdiff_t>(r * w * 3), w * 3,
                  grid.pixels.begin() + static_cast<std::ptrdiff_t>(((r0 + r) * grid.width + c0) * 3));
  }
  return grid;
}

}  // namespace vbitn
