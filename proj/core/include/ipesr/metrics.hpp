// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <string_view>

#include "ipesr/image.hpp"

namespace ipesr {

enum class ChannelMode { kRgb, kY };

std::string_view to_string(ChannelMode mode);
ChannelMode parse_channel_mode(std::string_view name);

// Scoring conventions. `shave` < 0 means "automatic": round(scale) pixels
// for the Y protocol and 0 for RGB.
struct EvalProtocol {
  ChannelMode channel_mode = ChannelMode::kRgb;
  int shave = -1;
  double data_peak = 1.0;

  [[nodiscard]] int shave_for_scale(double scale) const;
  void validate() const;
};

// Returned by psnr() for identical inputs.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

// BT.601 studio-range luma (16..235 over 255), returned as a 1-channel image
// in [0, 1] units.
Image to_luma(const Image& rgb);

double psnr(const Image& a, const Image& b, const EvalProtocol& protocol,
            double scale = 1.0);
double ssim(const Image& a, const Image& b, const EvalProtocol& protocol,
            double scale = 1.0);

// Applies channel conversion and border shaving; exposed for oracles.
Image prepare_for_metric(const Image& image, const EvalProtocol& protocol, double scale);

}  // namespace ipesr
