// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <vector>

#include "ipesr/types.hpp"

namespace ipesr {

// Pixel grid laid over the continuous square [-1, 1]^2. Along an axis with n
// cells the centers are -1 + (2i + 1) / n and the cell edge is 2 / n.
struct CoordFrame {
  int height = 1;
  int width = 1;

  void validate() const;
  [[nodiscard]] long long size() const {
    return static_cast<long long>(height) * width;
  }
  friend bool operator==(const CoordFrame&, const CoordFrame&) = default;
};

struct PixelIndex {
  int row = 0;
  int col = 0;
  friend bool operator==(const PixelIndex&, const PixelIndex&) = default;
};

// Queries in the shared [-1,1]^2 frame. Radii are expressed in the decoder
// frame, i.e. in units where one low-resolution cell spans [-1, 1]; a query at
// scale s therefore carries radius (1/s_x, 1/s_y).
struct QueryBatch {
  std::vector<Vec2> centers;
  std::vector<Vec2> radii;
  std::vector<std::array<double, 3>> targets;  // empty outside training

  [[nodiscard]] std::size_t size() const { return centers.size(); }
  void validate() const;
};

// The four latents surrounding a query together with their bilinear blending
// weights. Member order: (row0,col0), (row0,col1), (row1,col0), (row1,col1).
struct EnsembleStencil {
  std::array<PixelIndex, 4> latent_indices;
  std::array<double, 4> weights;
  std::array<Vec2, 4> relative_coords;
  std::array<Vec2, 4> radii;
};

double axis_center(int index, int n);

// Continuous cell coordinate of q along an axis of n cells: 0 at the first
// center, n - 1 at the last. Values within a few ulps of an integer snap to it
// so that queries placed on cell centers get exact zero offsets.
double continuous_index(double q, int n);
Vec2 pixel_center(PixelIndex index, const CoordFrame& frame);

// Inverse of pixel_center: the cell containing a continuous coordinate,
// clamped to the grid.
PixelIndex nearest_cell(Vec2 point, const CoordFrame& frame);

// One query per output pixel, row-major.
QueryBatch render_grid(const CoordFrame& lr_frame, const CoordFrame& out_frame);

EnsembleStencil ensemble_stencil(Vec2 center, Vec2 radius,
                                 const CoordFrame& feat_frame);

}  // namespace ipesr
