// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "ipesr/geometry.hpp"

namespace ipesr {

// Interleaved H x W x C image of doubles (row-major, channel fastest).
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0);

  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int channels() const { return channels_; }
  [[nodiscard]] CoordFrame frame() const { return CoordFrame{height_, width_}; }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  double& at(int y, int x, int c) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  [[nodiscard]] double at(int y, int x, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::vector<double>& data() { return data_; }
  [[nodiscard]] const std::vector<double>& data() const { return data_; }

  [[nodiscard]] Image crop(int top, int left, int height, int width) const;
  [[nodiscard]] bool all_finite() const;
  void clamp01();

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// PNG decoding to RGB in [0,1]. 8- and 16-bit inputs are accepted; gray and
// alpha channels are expanded/stripped to three channels.
Image read_png(const std::filesystem::path& path);

// Writes an RGB image; values are clamped to [0,1] and rounded half-to-even.
void write_png(const std::filesystem::path& path, const Image& image, int bit_depth = 8);

}  // namespace ipesr
