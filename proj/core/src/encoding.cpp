// SPDX-License-Identifier: Apache-2.0
#include "ipesr/encoding.hpp"

#include <atomic>
#include <cassert>
#include <cmath>

namespace ipesr {
namespace {

std::atomic<double> g_sinc_switch{1e-4};

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

// Sinusoid block for one axis: (sin, cos) pairs over octaves, optionally
// attenuated by sinc(w r).
double* write_axis(double* out, double coord, double radius, int bandwidth,
                   bool integrated) {
  for (int k = 0; k < bandwidth; ++k) {
    const double w = std::ldexp(1.0, k);
    const double atten = integrated ? sinc_stable(w * radius) : 1.0;
    *out++ = std::sin(w * coord) * atten;
    *out++ = std::cos(w * coord) * atten;
  }
  return out;
}

}  // namespace

std::string_view to_string(EncodingVariant v) {
  switch (v) {
    case EncodingVariant::kNone: return "none";
    case EncodingVariant::kCell: return "cell";
    case EncodingVariant::kPlainPe: return "plain_pe";
    case EncodingVariant::kIpe: return "ipe";
  }
  return "unknown";
}

EncodingVariant parse_encoding_variant(std::string_view name) {
  if (name == "none") return EncodingVariant::kNone;
  if (name == "cell") return EncodingVariant::kCell;
  if (name == "plain_pe") return EncodingVariant::kPlainPe;
  if (name == "ipe") return EncodingVariant::kIpe;
  throw ValidationError("unknown encoding variant '" + std::string(name) +
                        "' (expected none, cell, plain_pe or ipe)");
}

void EncodingConfig::validate() const {
  const bool sinusoidal =
      variant == EncodingVariant::kPlainPe || variant == EncodingVariant::kIpe;
  if (sinusoidal && bandwidth < 1) {
    throw ValidationError("encoding bandwidth must be >= 1 for " +
                          std::string(to_string(variant)));
  }
  if (dimension() < 1) {
    throw ValidationError("encoding produces an empty vector");
  }
}

int EncodingConfig::dimension() const {
  int dim = 0;
  switch (variant) {
    case EncodingVariant::kNone:
      dim = 2;
      break;
    case EncodingVariant::kCell:
      dim = 4;
      break;
    case EncodingVariant::kPlainPe:
    case EncodingVariant::kIpe:
      dim = 4 * bandwidth + (prepend_coords ? 2 : 0);
      break;
  }
  if (append_cell && variant != EncodingVariant::kCell) dim += 2;
  return dim;
}

void PixelRegion::validate() const {
  if (!std::isfinite(center.x) || !std::isfinite(center.y)) {
    throw std::invalid_argument("pixel region center must be finite");
  }
  if (!positive_finite(radius.x) || !positive_finite(radius.y)) {
    throw std::invalid_argument("pixel region radius must be strictly positive");
  }
}

double sinc_stable(double t) {
  if (!std::isfinite(t)) {
    throw std::invalid_argument("sinc_stable: non-finite argument");
  }
  if (std::abs(t) < g_sinc_switch.load(std::memory_order_relaxed)) {
    return 1.0 - t * t / 6.0;
  }
  return std::sin(t) / t;
}

double sinc_switch_threshold() {
  return g_sinc_switch.load(std::memory_order_relaxed);
}

double testing::set_sinc_switch_threshold(double threshold) {
  return g_sinc_switch.exchange(threshold);
}

EncodingVector plain_pe(Vec2 point, int bandwidth) {
  if (bandwidth < 1) throw std::invalid_argument("plain_pe: bandwidth must be >= 1");
  if (!std::isfinite(point.x) || !std::isfinite(point.y)) {
    throw std::invalid_argument("plain_pe: point must be finite");
  }
  EncodingConfig config{EncodingVariant::kPlainPe, bandwidth, true, false};
  EncodingVector out{std::vector<double>(config.dimension()), config};
  // Radius is irrelevant for the plain variant.
  encode_into(config, point, Vec2{1.0, 1.0}, out.values);
  return out;
}

EncodingVector ipe(const PixelRegion& region, int bandwidth) {
  if (bandwidth < 1) throw std::invalid_argument("ipe: bandwidth must be >= 1");
  region.validate();
  EncodingConfig config{EncodingVariant::kIpe, bandwidth, true, false};
  EncodingVector out{std::vector<double>(config.dimension()), config};
  encode_into(config, region.center, region.radius, out.values);
  return out;
}

EncodingVector cell_code(Vec2 radius) {
  if (!positive_finite(radius.x) || !positive_finite(radius.y)) {
    throw std::invalid_argument("cell_code: radius must be strictly positive");
  }
  EncodingConfig config{EncodingVariant::kCell, 0, false, false};
  return EncodingVector{{2.0 * radius.x, 2.0 * radius.y}, config};
}

void encode_into(const EncodingConfig& config, Vec2 center, Vec2 radius,
                 std::span<double> out) {
  assert(static_cast<int>(out.size()) == config.dimension());
  double* p = out.data();
  switch (config.variant) {
    case EncodingVariant::kNone:
      *p++ = center.x;
      *p++ = center.y;
      break;
    case EncodingVariant::kCell:
      *p++ = center.x;
      *p++ = center.y;
      *p++ = 2.0 * radius.x;
      *p++ = 2.0 * radius.y;
      break;
    case EncodingVariant::kPlainPe:
    case EncodingVariant::kIpe: {
      const bool integrated = config.variant == EncodingVariant::kIpe;
      if (config.prepend_coords) {
        *p++ = center.x;
        *p++ = center.y;
      }
      p = write_axis(p, center.x, radius.x, config.bandwidth, integrated);
      p = write_axis(p, center.y, radius.y, config.bandwidth, integrated);
      break;
    }
  }
  if (config.append_cell && config.variant != EncodingVariant::kCell) {
    *p++ = 2.0 * radius.x;
    *p++ = 2.0 * radius.y;
  }
  assert(p == out.data() + out.size());
}

EncodingVector encode(const EncodingConfig& config, const PixelRegion& region) {
  config.validate();
  region.validate();
  EncodingVector out{std::vector<double>(config.dimension()), config};
  encode_into(config, region.center, region.radius, out.values);
  return out;
}

}  // namespace ipesr
