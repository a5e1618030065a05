// SPDX-License-Identifier: Apache-2.0
#include "ipesr/metrics.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipesr/types.hpp"

namespace ipesr {
namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

std::array<double, kWindow> gaussian_1d() {
  std::array<double, kWindow> g{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

void check_pair(const Image& a, const Image& b) {
  if (a.height() != b.height() || a.width() != b.width() || a.channels() != b.channels()) {
    throw std::invalid_argument("metric inputs differ in dimensions");
  }
}

// Single-channel SSIM with valid-mode Gaussian windows; the window sums are
// evaluated separably (rows, then columns) over the five moment maps.
double ssim_plane(const Image& a, const Image& b, int c, double peak) {
  static const auto g = gaussian_1d();
  const double c1 = (kK1 * peak) * (kK1 * peak);
  const double c2 = (kK2 * peak) * (kK2 * peak);
  const int h = a.height(), w = a.width();
  const int oh = h - kWindow + 1;
  const int ow = w - kWindow + 1;

  // Horizontal pass: 5 maps of size h x ow.
  std::vector<std::array<double, 5>> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      std::array<double, 5> m{};
      for (int j = 0; j < kWindow; ++j) {
        const double va = a.at(y, x + j, c), vb = b.at(y, x + j, c);
        m[0] += g[j] * va;
        m[1] += g[j] * vb;
        m[2] += g[j] * (va * va);
        m[3] += g[j] * (vb * vb);
        m[4] += g[j] * (va * vb);
      }
      rows[static_cast<std::size_t>(y) * ow + x] = m;
    }
  }
  double total = 0.0;
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      std::array<double, 5> m{};
      for (int i = 0; i < kWindow; ++i) {
        const auto& r = rows[static_cast<std::size_t>(y + i) * ow + x];
        for (int k = 0; k < 5; ++k) m[k] += g[i] * r[k];
      }
      const double mu_a = m[0], mu_b = m[1];
      const double var_a = m[2] - mu_a * mu_a;
      const double var_b = m[3] - mu_b * mu_b;
      const double cov = m[4] - mu_a * mu_b;
      total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
               ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
    }
  }
  return total / (static_cast<double>(oh) * ow);
}

}  // namespace

std::string_view to_string(ChannelMode mode) {
  return mode == ChannelMode::kRgb ? "rgb" : "y";
}

ChannelMode parse_channel_mode(std::string_view name) {
  if (name == "rgb") return ChannelMode::kRgb;
  if (name == "y") return ChannelMode::kY;
  throw ValidationError("unknown channel mode '" + std::string(name) + "' (expected rgb or y)");
}

int EvalProtocol::shave_for_scale(double scale) const {
  if (shave >= 0) return shave;
  return channel_mode == ChannelMode::kY ? static_cast<int>(std::lround(scale)) : 0;
}

void EvalProtocol::validate() const {
  if (!(data_peak > 0.0)) throw ValidationError("eval.data_peak must be positive");
}

Image to_luma(const Image& rgb) {
  if (rgb.channels() != 3) throw std::invalid_argument("to_luma expects a 3-channel image");
  Image y(rgb.height(), rgb.width(), 1);
  for (int r = 0; r < rgb.height(); ++r) {
    for (int c = 0; c < rgb.width(); ++c) {
      y.at(r, c, 0) = (65.481 * rgb.at(r, c, 0) + 128.553 * rgb.at(r, c, 1) +
                       24.966 * rgb.at(r, c, 2) + 16.0) / 255.0;
    }
  }
  return y;
}

Image prepare_for_metric(const Image& image, const EvalProtocol& protocol, double scale) {
  Image plane = protocol.channel_mode == ChannelMode::kY ? to_luma(image) : image;
  const int shave = protocol.shave_for_scale(scale);
  if (shave < 0 || 2 * shave >= std::min(plane.height(), plane.width())) {
    throw std::invalid_argument("shave of " + std::to_string(shave) +
                                " leaves no pixels to score");
  }
  if (shave == 0) return plane;
  return plane.crop(shave, shave, plane.height() - 2 * shave, plane.width() - 2 * shave);
}

double psnr(const Image& a, const Image& b, const EvalProtocol& protocol, double scale) {
  check_pair(a, b);
  protocol.validate();
  const Image pa = prepare_for_metric(a, protocol, scale);
  const Image pb = prepare_for_metric(b, protocol, scale);
  double sse = 0.0;
  for (std::size_t i = 0; i < pa.data().size(); ++i) {
    const double d = pa.data()[i] - pb.data()[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(pa.data().size());
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(protocol.data_peak * protocol.data_peak / mse);
}

double ssim(const Image& a, const Image& b, const EvalProtocol& protocol, double scale) {
  check_pair(a, b);
  protocol.validate();
  const Image pa = prepare_for_metric(a, protocol, scale);
  const Image pb = prepare_for_metric(b, protocol, scale);
  if (pa.height() < kWindow || pa.width() < kWindow) {
    throw std::invalid_argument("ssim needs at least 11x11 pixels after shaving");
  }
  double total = 0.0;
  for (int c = 0; c < pa.channels(); ++c) total += ssim_plane(pa, pb, c, protocol.data_peak);
  return total / pa.channels();
}

}  // namespace ipesr
