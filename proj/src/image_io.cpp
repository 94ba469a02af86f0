#include "pclv/image.hpp"

#include <png.h>

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "pclv/error.hpp"

namespace pclv {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  return f;
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

bool has_png_signature(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

struct DecodedPng {
  std::size_t width = 0;
  std::size_t height = 0;
  int bit_depth = 0;
  int channels = 0;
  // Samples in row-major, channel-interleaved order; 16-bit samples are
  // already converted to host order.
  std::vector<std::uint16_t> samples;
};

DecodedPng decode_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err,
                                           png_error_fn, png_warning_fn);
  if (!png) fail(ErrorCode::kInternal, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(ErrorCode::kInternal, "png_create_info_struct failed");
  }

  DecodedPng out;
  std::vector<png_bytep> rows;
  std::vector<png_byte> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::kFormat, "'" + path.string() + "': " + err);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  const auto color_type = png_get_color_type(png, info);
  out.width = png_get_image_width(png, info);
  out.height = png_get_image_height(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
    out.bit_depth = 8;
  }
  if (color_type == PNG_COLOR_TYPE_GRAY && out.bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    out.bit_depth = 8;
  }
  if (out.bit_depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  out.channels = png_get_channels(png, info);

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * out.height);
  rows.resize(out.height);
  for (std::size_t r = 0; r < out.height; ++r) rows[r] = buffer.data() + r * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t n = out.width * out.height * out.channels;
  out.samples.resize(n);
  if (out.bit_depth == 16) {
    for (std::size_t r = 0; r < out.height; ++r) {
      std::memcpy(out.samples.data() + r * out.width * out.channels, rows[r],
                  out.width * out.channels * 2);
    }
  } else {
    for (std::size_t r = 0; r < out.height; ++r) {
      for (std::size_t k = 0; k < out.width * out.channels; ++k) {
        out.samples[r * out.width * out.channels + k] = rows[r][k];
      }
    }
  }
  return out;
}

void encode_png(const std::filesystem::path& path, std::size_t width,
                std::size_t height, int bit_depth, int color_type, int channels,
                const std::vector<std::uint16_t>& samples) {
  FilePtr f = open_file(path, "wb");
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err,
                                            png_error_fn, png_warning_fn);
  if (!png) fail(ErrorCode::kInternal, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(ErrorCode::kInternal, "png_create_info_struct failed");
  }
  const std::size_t bytes = bit_depth / 8;
  std::vector<png_byte> buffer(width * height * channels * bytes);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (bytes == 2) {
      buffer[2 * k] = static_cast<png_byte>(samples[k] >> 8);
      buffer[2 * k + 1] = static_cast<png_byte>(samples[k] & 0xff);
    } else {
      buffer[k] = static_cast<png_byte>(samples[k]);
    }
  }
  std::vector<png_bytep> rows(height);
  for (std::size_t r = 0; r < height; ++r) {
    rows[r] = buffer.data() + r * width * channels * bytes;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::kIo, "'" + path.string() + "': " + err);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 1);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Binary PNM (P5 / P6). Returns samples with the given channel count.
DecodedPng decode_pnm(const std::filesystem::path& path, int expected_channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  auto next_token = [&]() {
    std::string tok;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(c);
    }
    return tok;
  };
  const std::string magic = next_token();
  const int channels = magic == "P5" ? 1 : magic == "P6" ? 3 : 0;
  if (channels == 0) fail(ErrorCode::kFormat, "'" + path.string() + "': not a binary PGM/PPM");
  if (channels != expected_channels && !(expected_channels == 3 && channels == 1)) {
    fail(ErrorCode::kFormat, "'" + path.string() + "': unexpected channel count");
  }
  DecodedPng out;
  try {
    out.width = std::stoul(next_token());
    out.height = std::stoul(next_token());
    const unsigned long maxval = std::stoul(next_token());
    if (maxval == 0 || maxval > 65535) throw std::out_of_range("maxval");
    out.bit_depth = maxval > 255 ? 16 : 8;
  } catch (const std::exception&) {
    fail(ErrorCode::kFormat, "'" + path.string() + "': malformed PNM header");
  }
  out.channels = channels;
  const std::size_t n = out.width * out.height * channels;
  const std::size_t bytes = out.bit_depth / 8;
  std::vector<unsigned char> raw(n * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    fail(ErrorCode::kFormat, "'" + path.string() + "': truncated PNM data");
  }
  out.samples.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.samples[k] = bytes == 2 ? static_cast<std::uint16_t>((raw[2 * k] << 8) | raw[2 * k + 1])
                                : raw[k];
  }
  return out;
}

}  // namespace

DepthImage read_depth_image(const std::filesystem::path& path) {
  const DecodedPng img = has_png_signature(path) ? decode_png(path) : decode_pnm(path, 1);
  if (img.channels != 1) {
    fail(ErrorCode::kFormat, "'" + path.string() + "': depth image must be single-channel");
  }
  DepthImage out(img.width, img.height);
  std::copy(img.samples.begin(), img.samples.end(), out.data.begin());
  return out;
}

RgbImage read_rgb_image(const std::filesystem::path& path) {
  const DecodedPng img = has_png_signature(path) ? decode_png(path) : decode_pnm(path, 3);
  if (img.bit_depth != 8) {
    fail(ErrorCode::kFormat, "'" + path.string() + "': color image must be 8-bit");
  }
  RgbImage out(img.width, img.height);
  const int ch = img.channels;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::uint16_t* s = img.samples.data() + k * ch;
    if (ch >= 3) {
      out.data[k] = {static_cast<std::uint8_t>(s[0]), static_cast<std::uint8_t>(s[1]),
                     static_cast<std::uint8_t>(s[2])};
    } else {
      const auto v = static_cast<std::uint8_t>(s[0]);
      out.data[k] = {v, v, v};
    }
  }
  return out;
}

LabelImage load_label_image(const std::filesystem::path& path) {
  const DecodedPng img = decode_png(path);
  if (img.bit_depth != 16 || img.channels != 1) {
    fail(ErrorCode::kFormat, "'" + path.string() +
                                 "': label image must be 16-bit single-channel (got " +
                                 std::to_string(img.bit_depth) + "-bit, " +
                                 std::to_string(img.channels) + " channel(s))");
  }
  LabelImage out(img.width, img.height);
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] = img.samples[k];
  return out;
}

void write_png16(const std::filesystem::path& path, const Image<std::uint16_t>& img) {
  encode_png(path, img.width, img.height, 16, PNG_COLOR_TYPE_GRAY, 1, img.data);
}

void write_png_rgb(const std::filesystem::path& path, const RgbImage& img) {
  std::vector<std::uint16_t> samples(img.size() * 3);
  for (std::size_t k = 0; k < img.size(); ++k) {
    samples[3 * k] = img.data[k].r;
    samples[3 * k + 1] = img.data[k].g;
    samples[3 * k + 2] = img.data[k].b;
  }
  encode_png(path, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, 3, samples);
}

void write_label_image(const std::filesystem::path& path, const LabelImage& img,
                       std::int64_t offset) {
  Image<std::uint16_t> raw(img.width, img.height);
  for (std::size_t k = 0; k < img.size(); ++k) {
    if (!img.labeled(k)) continue;
    const std::int64_t v = img.data[k] + offset;
    if (v < 0 || v > 65535) {
      fail(ErrorCode::kInvalidArgument, "label " + std::to_string(img.data[k]) +
                                            " does not fit a 16-bit label image");
    }
    raw.data[k] = static_cast<std::uint16_t>(v);
  }
  write_png16(path, raw);
}

}  // namespace pclv
