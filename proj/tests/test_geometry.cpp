// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "ipesr/geometry.hpp"
#include "ipesr/model.hpp"
#include "ipesr/rng.hpp"

namespace ipesr {
namespace {

TEST(PixelCenter, Examples) {
  EXPECT_EQ(pixel_center({0, 0}, {2, 2}).x, -0.5);
  EXPECT_EQ(pixel_center({0, 1}, {2, 2}).x, 0.5);
  EXPECT_EQ(pixel_center({0, 2}, {1, 5}).x, 0.0);
  EXPECT_EQ(pixel_center({2, 0}, {5, 1}).y, 0.0);
  EXPECT_THROW(pixel_center({0, 2}, {2, 2}), std::invalid_argument);
  EXPECT_THROW(pixel_center({-1, 0}, {2, 2}), std::invalid_argument);
}

TEST(PixelCenter, AllInsideOpenSquare) {
  for (int n = 1; n < 50; ++n) {
    for (int i = 0; i < n; ++i) {
      const double c = axis_center(i, n);
      EXPECT_GT(c, -1.0);
      EXPECT_LT(c, 1.0);
      if (i > 0) {
        EXPECT_NEAR(c - axis_center(i - 1, n), 2.0 / n, 1e-15);
      }
    }
  }
}

TEST(RenderGrid, Examples) {
  const auto a = render_grid({1, 1}, {1, 1});
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a.centers[0], (Vec2{0, 0}));
  EXPECT_EQ(a.radii[0], (Vec2{1, 1}));

  const auto b = render_grid({2, 2}, {4, 4});
  ASSERT_EQ(b.size(), 16u);
  for (const auto& r : b.radii) EXPECT_EQ(r, (Vec2{0.5, 0.5}));
  EXPECT_EQ(b.centers[1], (Vec2{-0.25, -0.75}));  // row-major

  const auto c = render_grid({3, 5}, {7, 11});
  ASSERT_EQ(c.size(), 77u);
  const double sx = 11.0 / 5.0, sy = 7.0 / 3.0;
  for (const auto& r : c.radii) {
    EXPECT_NEAR(r.x, 1.0 / sx, 1e-15);
    EXPECT_NEAR(r.y, 1.0 / sy, 1e-15);
  }
  EXPECT_NO_THROW(c.validate());
  EXPECT_THROW(render_grid({3, 5}, {0, 4}), std::invalid_argument);
}

TEST(Stencil, QueryOnLatentCenter) {
  const CoordFrame f{4, 6};
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 6; ++c) {
      const auto st = ensemble_stencil(pixel_center({r, c}, f), {1, 1}, f);
      EXPECT_EQ(st.latent_indices[0], (PixelIndex{r, c}));
      EXPECT_EQ(st.weights[0], 1.0);
      EXPECT_EQ(st.weights[1] + st.weights[2] + st.weights[3], 0.0);
      EXPECT_EQ(st.relative_coords[0], (Vec2{0, 0}));
    }
  }
}

TEST(Stencil, CentroidOfFour) {
  const CoordFrame f{4, 4};
  const auto st = ensemble_stencil({0.0, 0.0}, {0.5, 0.5}, f);
  for (double w : st.weights) EXPECT_EQ(w, 0.25);
  EXPECT_EQ(st.latent_indices[0], (PixelIndex{1, 1}));
  EXPECT_EQ(st.latent_indices[3], (PixelIndex{2, 2}));
  EXPECT_EQ(st.relative_coords[0], (Vec2{0.5, 0.5}));
  EXPECT_EQ(st.relative_coords[3], (Vec2{-0.5, -0.5}));
  for (const auto& r : st.radii) EXPECT_EQ(r, (Vec2{0.5, 0.5}));
}

TEST(Stencil, RandomInteriorMatchesAxisFractions) {
  RandomStream rs(5, {});
  for (int i = 0; i < 500; ++i) {
    const CoordFrame f{2 + static_cast<int>(rs.below(20)), 2 + static_cast<int>(rs.below(20))};
    // Inside the hull of latent centers.
    const double x = rs.uniform(axis_center(0, f.width), axis_center(f.width - 1, f.width));
    const double y = rs.uniform(axis_center(0, f.height), axis_center(f.height - 1, f.height));
    const auto st = ensemble_stencil({x, y}, {0.3, 0.3}, f);
    // Independent: positions of the lower-left latent in pixel units.
    const double px = (x + 1.0) / (2.0 / f.width) - 0.5;
    const double py = (y + 1.0) / (2.0 / f.height) - 0.5;
    const int cx = static_cast<int>(px), cy = static_cast<int>(py);
    const double fx = px - cx, fy = py - cy;
    EXPECT_EQ(st.latent_indices[0], (PixelIndex{cy, cx}));
    EXPECT_NEAR(st.weights[0], (1 - fx) * (1 - fy), 1e-12);
    EXPECT_NEAR(st.weights[1], fx * (1 - fy), 1e-12);
    EXPECT_NEAR(st.weights[2], (1 - fx) * fy, 1e-12);
    EXPECT_NEAR(st.weights[3], fx * fy, 1e-12);
    // Relative coordinates: (x_q - p(z)) * n / 2.
    for (int t = 0; t < 4; ++t) {
      const Vec2 p = pixel_center(st.latent_indices[t], f);
      EXPECT_NEAR(st.relative_coords[t].x, (x - p.x) * f.width / 2.0, 1e-12);
      EXPECT_NEAR(st.relative_coords[t].y, (y - p.y) * f.height / 2.0, 1e-12);
    }
  }
}

TEST(Stencil, PartitionOfUnityWithBorders) {
  RandomStream rs(6, {});
  for (int i = 0; i < 10000; ++i) {
    const CoordFrame f{1 + static_cast<int>(rs.below(30)), 1 + static_cast<int>(rs.below(30))};
    const auto st = ensemble_stencil({rs.uniform(-1, 1), rs.uniform(-1, 1)},
                                     {rs.uniform(0.01, 2), rs.uniform(0.01, 2)}, f);
    double sum = 0.0;
    for (int t = 0; t < 4; ++t) {
      EXPECT_GE(st.weights[t], 0.0);
      sum += st.weights[t];
      EXPECT_GE(st.latent_indices[t].row, 0);
      EXPECT_LT(st.latent_indices[t].row, f.height);
      EXPECT_GE(st.latent_indices[t].col, 0);
      EXPECT_LT(st.latent_indices[t].col, f.width);
    }
    ASSERT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Stencil, BorderQueriesClampIndices) {
  const CoordFrame f{3, 3};
  const auto st = ensemble_stencil({-1.0, 1.0}, {1, 1}, f);
  for (const auto& idx : st.latent_indices) {
    EXPECT_GE(idx.col, 0);
    EXPECT_LE(idx.row, 2);
  }
  double sum = 0.0;
  for (double w : st.weights) sum += w;
  EXPECT_NEAR(sum, 1.0, 1e-15);
}

TEST(FrameRoundTrip, CenterMapsBackToIndex) {
  for (int h = 1; h < 20; ++h) {
    for (int w = 1; w < 20; w += 3) {
      const CoordFrame f{h, w};
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          EXPECT_EQ(nearest_cell(pixel_center({r, c}, f), f), (PixelIndex{r, c}));
        }
      }
    }
  }
}

TEST(RenderGrid, IdentityScaleHasZeroOffsets) {
  const CoordFrame f{7, 9};
  const auto q = render_grid(f, f);
  for (std::size_t i = 0; i < q.size(); ++i) {
    EXPECT_EQ(q.radii[i], (Vec2{1, 1}));
    const auto st = ensemble_stencil(q.centers[i], q.radii[i], f);
    EXPECT_EQ(st.relative_coords[0], (Vec2{0, 0}));
    EXPECT_EQ(st.weights[0], 1.0);
    EXPECT_EQ(st.latent_indices[0], (PixelIndex{static_cast<int>(i / 9), static_cast<int>(i % 9)}));
  }
}

TEST(Continuity, AcrossLatentBoundaries) {
  EncoderConfig e;
  e.blocks = 1;
  e.channels = 4;
  DecoderConfig d;
  d.hidden_width = 16;
  const auto bundle = ModelBundle::create(ModelVariant::kLiif, e, d, 3);
  RandomStream rs(7, {});
  Image lr(6, 6, 3);
  for (double& v : lr.data()) v = rs.uniform();
  const CoordFrame f = lr.frame();
  QueryBatch q;
  // Straddle latent-center lines (where the stencil switches members) and
  // cell edges, in both axes.
  for (int i = 0; i < 5; ++i) {
    const double xb = axis_center(i, 6);
    const double y = rs.uniform(-0.8, 0.8);
    for (double dx : {-0.5e-6, 0.5e-6}) {
      q.centers.push_back({xb + dx, y});
      q.radii.push_back({0.5, 0.5});
    }
    const double edge = -1.0 + 2.0 * (i + 1) / 6.0;
    for (double dy : {-0.5e-6, 0.5e-6}) {
      q.centers.push_back({y, edge + dy});
      q.radii.push_back({0.5, 0.5});
    }
  }
  (void)f;
  const Matrix p = predict_queries(bundle, lr, q);
  for (Eigen::Index i = 0; i < p.rows(); i += 2) {
    for (int k = 0; k < 3; ++k) EXPECT_LT(std::fabs(p(i, k) - p(i + 1, k)), 1e-4);
  }
}

TEST(QueryBatch, Validation) {
  QueryBatch q;
  q.centers = {{0, 0}};
  q.radii = {{0, 1}};
  EXPECT_THROW(q.validate(), std::invalid_argument);
  q.radii = {{1, 1}, {1, 1}};
  EXPECT_THROW(q.validate(), std::invalid_argument);
  q.radii = {{1, 1}};
  q.targets = {{0, 0, 0}, {0, 0, 0}};
  EXPECT_THROW(q.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace ipesr
