// SPDX-License-Identifier: Apache-2.0
#include "ipesr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ipesr {
namespace {

struct AxisStencil {
  int lo, hi;           // clamped member indices
  double w_lo, w_hi;    // 1D bilinear weights
  double rel_lo, rel_hi;
};

AxisStencil axis_stencil(double q, int n) {
  const double u = continuous_index(q, n);
  const double base = std::floor(u);
  const double frac = u - base;
  const int i0 = static_cast<int>(base);
  AxisStencil s{};
  s.lo = std::clamp(i0, 0, n - 1);
  s.hi = std::clamp(i0 + 1, 0, n - 1);
  s.w_lo = 1.0 - frac;
  s.w_hi = frac;
  // Offsets relative to the member actually used, in units where one cell
  // spans [-1, 1].
  s.rel_lo = u - s.lo;
  s.rel_hi = u - s.hi;
  return s;
}

}  // namespace

void CoordFrame::validate() const {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("coordinate frame must be at least 1x1, got " +
                                std::to_string(height) + "x" + std::to_string(width));
  }
}

void QueryBatch::validate() const {
  if (radii.size() != centers.size()) {
    throw std::invalid_argument("query batch: centers and radii differ in length");
  }
  if (!targets.empty() && targets.size() != centers.size()) {
    throw std::invalid_argument("query batch: targets and centers differ in length");
  }
  for (const Vec2& r : radii) {
    if (!(r.x > 0.0) || !(r.y > 0.0)) {
      throw std::invalid_argument("query batch: radii must be positive");
    }
  }
}

double axis_center(int index, int n) {
  return -1.0 + (2.0 * index + 1.0) / n;
}

double continuous_index(double q, int n) {
  const double u = (q + 1.0) * 0.5 * n - 0.5;
  const double nearest = std::round(u);
  if (std::abs(u - nearest) <= 1e-12 * std::max(1.0, std::abs(u))) return nearest;
  return u;
}

Vec2 pixel_center(PixelIndex index, const CoordFrame& frame) {
  frame.validate();
  if (index.row < 0 || index.row >= frame.height || index.col < 0 ||
      index.col >= frame.width) {
    throw std::invalid_argument("pixel_center: index out of range");
  }
  return Vec2{axis_center(index.col, frame.width), axis_center(index.row, frame.height)};
}

PixelIndex nearest_cell(Vec2 point, const CoordFrame& frame) {
  auto axis = [](double q, int n) {
    const int i = static_cast<int>(std::floor((q + 1.0) * 0.5 * n));
    return std::clamp(i, 0, n - 1);
  };
  return PixelIndex{axis(point.y, frame.height), axis(point.x, frame.width)};
}

QueryBatch render_grid(const CoordFrame& lr_frame, const CoordFrame& out_frame) {
  lr_frame.validate();
  out_frame.validate();
  const Vec2 radius{static_cast<double>(lr_frame.width) / out_frame.width,
                    static_cast<double>(lr_frame.height) / out_frame.height};
  QueryBatch batch;
  const auto n = static_cast<std::size_t>(out_frame.size());
  batch.centers.reserve(n);
  batch.radii.assign(n, radius);
  for (int r = 0; r < out_frame.height; ++r) {
    const double cy = axis_center(r, out_frame.height);
    for (int c = 0; c < out_frame.width; ++c) {
      batch.centers.push_back(Vec2{axis_center(c, out_frame.width), cy});
    }
  }
  return batch;
}

EnsembleStencil ensemble_stencil(Vec2 center, Vec2 radius,
                                 const CoordFrame& feat_frame) {
  const AxisStencil sy = axis_stencil(center.y, feat_frame.height);
  const AxisStencil sx = axis_stencil(center.x, feat_frame.width);
  EnsembleStencil st{};
  const int rows[2] = {sy.lo, sy.hi};
  const int cols[2] = {sx.lo, sx.hi};
  const double wy[2] = {sy.w_lo, sy.w_hi};
  const double wx[2] = {sx.w_lo, sx.w_hi};
  const double ry[2] = {sy.rel_lo, sy.rel_hi};
  const double rx[2] = {sx.rel_lo, sx.rel_hi};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const int t = 2 * a + b;
      st.latent_indices[t] = PixelIndex{rows[a], cols[b]};
      st.weights[t] = wy[a] * wx[b];
      st.relative_coords[t] = Vec2{rx[b], ry[a]};
      st.radii[t] = radius;
    }
  }
  return st;
}

}  // namespace ipesr
