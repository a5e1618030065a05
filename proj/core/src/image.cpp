// SPDX-License-Identifier: Apache-2.0
#include "ipesr/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace ipesr {

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 1 || width < 1 || channels < 1) {
    throw std::invalid_argument("image dimensions must be positive");
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image Image::crop(int top, int left, int height, int width) const {
  if (top < 0 || left < 0 || height < 1 || width < 1 || top + height > height_ ||
      left + width > width_) {
    throw std::invalid_argument("crop window outside image");
  }
  Image out(height, width, channels_);
  for (int y = 0; y < height; ++y) {
    const double* src = data_.data() + (static_cast<std::size_t>(top + y) * width_ + left) * channels_;
    std::copy(src, src + static_cast<std::ptrdiff_t>(width) * channels_, &out.at(y, 0, 0));
  }
  return out;
}

bool Image::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Image::clamp01() {
  for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_fn(png_structp, png_const_charp msg) {
  throw std::runtime_error(std::string("libpng: ") + msg);
}
void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw std::runtime_error("cannot open image " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw std::runtime_error("not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           png_error_fn, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_set_strip_alpha(png);
  if (bit_depth == 16) png_set_swap(png);  // native little-endian uint16
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  if (png_get_channels(png, info) != 3) {
    throw std::runtime_error("unexpected channel layout in " + path.string());
  }

  std::vector<png_byte> buffer(rowbytes * height);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + rowbytes * y;
  png_read_image(png, rows.data());

  Image image(height, width, 3);
  auto& out = image.data();
  if (depth == 16) {
    const double scale = 1.0 / 65535.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::uint16_t v;
      std::memcpy(&v, buffer.data() + 2 * i, 2);
      out[i] = v * scale;
    }
  } else {
    const double scale = 1.0 / 255.0;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = buffer[i] * scale;
  }
  return image;
}

void write_png(const std::filesystem::path& path, const Image& image, int bit_depth) {
  if (image.channels() != 3) throw std::invalid_argument("write_png expects RGB");
  if (bit_depth != 8 && bit_depth != 16) {
    throw std::invalid_argument("write_png: bit depth must be 8 or 16");
  }
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw std::runtime_error("cannot write image " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            png_error_fn, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  png_init_io(png, file.get());
  png_set_IHDR(png, info, image.width(), image.height(), bit_depth, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);

  const int bytes = bit_depth / 8;
  const double peak = bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<png_byte> row(static_cast<std::size_t>(image.width()) * 3 * bytes);
  for (int y = 0; y < image.height(); ++y) {
    for (int i = 0; i < image.width() * 3; ++i) {
      const double v = std::clamp(image.data()[static_cast<std::size_t>(y) * image.width() * 3 + i],
                                  0.0, 1.0);
      // Default FE rounding mode is round-half-to-even.
      const auto q = static_cast<std::uint16_t>(std::nearbyint(v * peak));
      if (bytes == 2) {
        std::memcpy(row.data() + 2 * i, &q, 2);
      } else {
        row[i] = static_cast<png_byte>(q);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

}  // namespace ipesr
