// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ipesr/types.hpp"

namespace ipesr {

enum class EncodingVariant { kNone, kCell, kPlainPe, kIpe };

std::string_view to_string(EncodingVariant v);
EncodingVariant parse_encoding_variant(std::string_view name);

// Spatial encoding attached to every decoder query.
//
// Layout of the produced vector (frozen; checkpoints depend on it):
//   [raw x, raw y]                               when prepend_coords
//   [sin(w0 x), cos(w0 x), ..., sin(w_{L-1} x), cos(w_{L-1} x),
//    sin(w0 y), cos(w0 y), ..., sin(w_{L-1} y), cos(w_{L-1} y)]
//                                                for plain_pe / ipe
//   [2 r_x, 2 r_y]                               for cell, or when append_cell
// with w_k = 2^k (no pi factor). For ipe every sinusoid is multiplied by
// sinc(w_k r_axis).
struct EncodingConfig {
  EncodingVariant variant = EncodingVariant::kIpe;
  int bandwidth = 10;
  // Feed the raw relative coordinate alongside the sinusoid block.
  bool prepend_coords = true;
  // Concatenate the cell code after the encoding (the "+cell" ablation).
  bool append_cell = false;

  void validate() const;
  [[nodiscard]] int dimension() const;

  friend bool operator==(const EncodingConfig&, const EncodingConfig&) = default;
};

// Axis-aligned query pixel: [c.x - r.x, c.x + r.x] x [c.y - r.y, c.y + r.y].
struct PixelRegion {
  Vec2 center;
  Vec2 radius;

  void validate() const;
};

struct EncodingVector {
  std::vector<double> values;
  EncodingConfig config;

  [[nodiscard]] std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

// sin(t)/t with the removable singularity handled by 1 - t^2/6 for |t| below
// the switch threshold.
double sinc_stable(double t);

// Current switch threshold (1e-4 unless overridden by the fault-injection hook).
double sinc_switch_threshold();

namespace testing {
// Overrides the sinc switch threshold. Only intended for fault-injection
// tests; returns the previous value.
double set_sinc_switch_threshold(double threshold);
}  // namespace testing

EncodingVector plain_pe(Vec2 point, int bandwidth);
EncodingVector ipe(const PixelRegion& region, int bandwidth);
EncodingVector cell_code(Vec2 radius);

// Writes the configured encoding of a relative query region into `out`
// (length config.dimension()). Hot path for rendering; no validation beyond
// asserts in debug builds.
void encode_into(const EncodingConfig& config, Vec2 center, Vec2 radius,
                 std::span<double> out);

EncodingVector encode(const EncodingConfig& config, const PixelRegion& region);

}  // namespace ipesr
