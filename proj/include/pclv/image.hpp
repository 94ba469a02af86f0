#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace pclv {

// Row-major raster. Pixel (row, col) lives at data[row * width + col].
template <typename T>
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<T> data;

  Image() = default;
  Image(std::size_t w, std::size_t h, T fill = T{})
      : width(w), height(h), data(w * h, fill) {}

  std::size_t size() const { return data.size(); }
  T& at(std::size_t row, std::size_t col) { return data[row * width + col]; }
  const T& at(std::size_t row, std::size_t col) const {
    return data[row * width + col];
  }
};

struct Rgb8 {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb8&, const Rgb8&) = default;
};

using DepthImage = Image<std::uint16_t>;
using RgbImage = Image<Rgb8>;

// Per-pixel segment id; kUnlabeled marks pixels without a label (for example
// pixels that had no valid depth).
struct LabelImage : Image<std::int64_t> {
  static constexpr std::int64_t kUnlabeled = -1;

  LabelImage() = default;
  LabelImage(std::size_t w, std::size_t h)
      : Image<std::int64_t>(w, h, kUnlabeled) {}

  bool labeled(std::size_t idx) const { return data[idx] != kUnlabeled; }
};

// PNG (8/16-bit gray) or binary PGM. 8-bit sources are widened.
DepthImage read_depth_image(const std::filesystem::path& path);
// PNG (gray/RGB/RGBA, 8-bit) or binary PPM.
RgbImage read_rgb_image(const std::filesystem::path& path);
// 16-bit single-channel PNG; other bit depths are rejected.
LabelImage load_label_image(const std::filesystem::path& path);

void write_png16(const std::filesystem::path& path, const Image<std::uint16_t>& img);
void write_png_rgb(const std::filesystem::path& path, const RgbImage& img);
// Unlabeled pixels are written as 0; labels must fit in 16 bits.
void write_label_image(const std::filesystem::path& path, const LabelImage& img,
                       std::int64_t offset = 0);

}  // namespace pclv
