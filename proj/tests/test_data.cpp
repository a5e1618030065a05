// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "ipesr/data.hpp"
#include "ipesr/rng.hpp"
#include "ipesr/types.hpp"
#include "oracles.hpp"

namespace ipesr {
namespace {

namespace fs = std::filesystem;

Image random_image(std::uint64_t seed, int h, int w) {
  RandomStream rs(seed, {});
  Image img(h, w, 3);
  for (double& v : img.data()) v = rs.uniform();
  return img;
}

double max_abs(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  }
  return m;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

TEST(Kernel, Values) {
  EXPECT_EQ(cubic_kernel(0.0), 1.0);
  EXPECT_EQ(cubic_kernel(0.5), 0.5625);
  EXPECT_EQ(cubic_kernel(-0.5), 0.5625);
  EXPECT_EQ(cubic_kernel(1.0), 0.0);
  EXPECT_EQ(cubic_kernel(2.0), 0.0);
  EXPECT_EQ(cubic_kernel(1.5), -0.0625);
  for (double x = -2.5; x <= 2.5; x += 0.01) EXPECT_NEAR(cubic_kernel(x), oracle::keys(x), 1e-14);
}

TEST(Bicubic, ConstantStaysConstant) {
  const Image c(13, 9, 3, 0.4321);
  for (auto [h, w] : {std::pair{5, 4}, {13, 9}, {30, 17}, {1, 1}}) {
    for (bool aa : {true, false}) {
      const Image r = bicubic_resize(c, h, w, aa);
      for (double v : r.data()) EXPECT_NEAR(v, 0.4321, 1e-15);
    }
  }
}

TEST(Bicubic, DownscaleMatchesLoopReference) {
  const Image img = random_image(1, 8, 8);
  EXPECT_LT(max_abs(bicubic_resize(img, 4, 4, true), oracle::bicubic_resize(img, 4, 4, true)),
            1e-12);
  EXPECT_LT(max_abs(bicubic_resize(img, 4, 4, false), oracle::bicubic_resize(img, 4, 4, false)),
            1e-12);
}

TEST(Bicubic, RandomShapesMatchLoopReference) {
  RandomStream rs(2, {});
  for (int t = 0; t < 30; ++t) {
    const Image img = random_image(100 + t, 8 + static_cast<int>(rs.below(9)),
                                   8 + static_cast<int>(rs.below(9)));
    const int h = 1 + static_cast<int>(rs.below(40)), w = 1 + static_cast<int>(rs.below(40));
    EXPECT_LT(max_abs(bicubic_resize(img, h, w, t % 2), oracle::bicubic_resize(img, h, w, t % 2)),
              1e-12);
  }
}

TEST(Bicubic, IdentitySizeIsExact) {
  const Image img = random_image(3, 7, 11);
  EXPECT_TRUE(bicubic_resize(img, 7, 11) == img);
}

TEST(Bicubic, OutputClampedAndErrors) {
  Image img(8, 8, 3, 0.0);
  for (int y = 0; y < 8; ++y) {
    for (int c = 0; c < 3; ++c) img.at(y, 4, c) = 1.0;  // ringing source
  }
  const Image up = bicubic_resize(img, 8, 29);
  for (double v : up.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_THROW(bicubic_resize(img, 0, 4), std::invalid_argument);
  EXPECT_THROW(bicubic_resize(Image(), 4, 4), std::invalid_argument);
}

TEST(Bicubic, SampleAgreesWithResizeOnUpscaleGrid) {
  const Image img = random_image(4, 6, 5);
  const Image up = bicubic_resize(img, 12, 10, true);
  for (int y = 0; y < 12; ++y) {
    for (int x = 0; x < 10; ++x) {
      double rgb[3];
      bicubic_sample(img, {axis_center(x, 10), axis_center(y, 12)}, rgb);
      const auto ref = oracle::bicubic_point(img, axis_center(x, 10), axis_center(y, 12));
      for (int c = 0; c < 3; ++c) {
        EXPECT_NEAR(rgb[c], ref[c], 1e-14);
        EXPECT_NEAR(std::clamp(rgb[c], 0.0, 1.0), up.at(y, x, c), 1e-14);
      }
    }
  }
}

// --- datasets and PNG I/O --------------------------------------------------

TEST(Png, RoundTrip8And16Bit) {
  TempDir dir("ipesr_test_png");
  const Image img = random_image(5, 9, 13);
  write_png(dir.path / "a8.png", img, 8);
  write_png(dir.path / "a16.png", img, 16);
  const Image a8 = read_png(dir.path / "a8.png");
  const Image a16 = read_png(dir.path / "a16.png");
  ASSERT_EQ(a8.frame(), img.frame());
  EXPECT_LE(max_abs(a8, img), 0.5 / 255 + 1e-12);
  EXPECT_LE(max_abs(a16, img), 0.5 / 65535 + 1e-12);
  // Quantized values survive exactly.
  write_png(dir.path / "b8.png", a8, 8);
  EXPECT_TRUE(read_png(dir.path / "b8.png") == a8);
  EXPECT_THROW(write_png(dir.path / "c.png", img, 12), std::invalid_argument);
  EXPECT_THROW(read_png(dir.path / "missing.png"), std::exception);
}

TEST(Png, RoundsHalfToEven) {
  TempDir dir("ipesr_test_png_even");
  Image img(1, 3, 3);
  const double vals[3] = {0.5 / 255.0, 1.5 / 255.0, 2.5 / 255.0};
  for (int x = 0; x < 3; ++x) {
    for (int c = 0; c < 3; ++c) img.at(0, x, c) = vals[x];
  }
  write_png(dir.path / "e.png", img, 8);
  const Image r = read_png(dir.path / "e.png");
  EXPECT_EQ(r.at(0, 0, 0) * 255.0, 0.0);
  EXPECT_EQ(r.at(0, 1, 0) * 255.0, 2.0);
  EXPECT_EQ(r.at(0, 2, 0) * 255.0, 2.0);
}

TEST(Dataset, LoadsSortedAndManifest) {
  TempDir dir("ipesr_test_ds");
  write_toy_set(dir.path, 0, 3, 24);
  const auto ds = Dataset::load(dir.path, "train");
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.records[0].id, "toy_000");
  EXPECT_EQ(ds.records[2].id, "toy_002");
  EXPECT_EQ(ds.min_dimension(), 24);
  {
    std::ofstream m(dir.path / "manifest.txt");
    m << "toy_002.png\ntoy_000.png\n";
  }
  const auto sub = Dataset::load(dir.path, "val");
  ASSERT_EQ(sub.size(), 2u);
  EXPECT_EQ(sub.records[0].id, "toy_002");
  {
    std::ofstream m(dir.path / "manifest.txt");
    m << "nope.png\n";
  }
  EXPECT_THROW(Dataset::load(dir.path, "val"), std::exception);
  EXPECT_THROW(Dataset::load(dir.path / "absent", "val"), std::exception);
}

TEST(ToySet, DeterministicAndOffsetIndices) {
  TempDir dir("ipesr_test_toy");
  const auto paths = write_toy_set(dir.path, 3, 2, 16, 5);
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_EQ(paths[0].filename(), "toy_005.png");
  EXPECT_TRUE(make_toy_image(3, 5, 16) == make_toy_image(3, 5, 16));
  EXPECT_FALSE(make_toy_image(3, 5, 16) == make_toy_image(3, 6, 16));
  for (double v : make_toy_image(0, 0, 32).data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

// --- sampling --------------------------------------------------------------

Dataset toy_dataset(int n, int size) {
  std::vector<Image> imgs;
  for (int i = 0; i < n; ++i) imgs.push_back(make_toy_image(1, i, size));
  return Dataset::from_images(imgs, "train");
}

TEST(Sample, IdentityScale) {
  const auto ds = toy_dataset(2, 40);
  SampleSpec spec;
  spec.lr_patch = 16;
  spec.s_max = 1.0;
  spec.pixels_per_patch = 100;
  const auto item = sample_item(ds, spec, 0, 0, 0);
  EXPECT_EQ(item.hr_side, 16);
  EXPECT_EQ(item.scale, 1.0);
  const Image crop = ds.images[item.image_index].crop(item.crop_origin.row,
                                                      item.crop_origin.col, 16, 16);
  EXPECT_TRUE(item.lr == crop);
  for (std::size_t i = 0; i < item.queries.size(); ++i) {
    const auto cell = nearest_cell(item.queries.centers[i], item.lr.frame());
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(item.queries.targets[i][c], item.lr.at(cell.row, cell.col, c));
    }
    EXPECT_EQ(item.queries.radii[i], (Vec2{1, 1}));
  }
}

TEST(Sample, DeterministicBatches) {
  const auto ds = toy_dataset(3, 64);
  SampleSpec spec;
  spec.lr_patch = 12;
  spec.pixels_per_patch = 50;
  spec.seed = 99;
  const auto a = sample_batch(ds, spec, 2, 7, 4);
  const auto b = sample_batch(ds, spec, 2, 7, 4);
  for (int i = 0; i < 4; ++i) {
    EXPECT_TRUE(a[i].lr == b[i].lr);
    EXPECT_EQ(a[i].queries.centers, b[i].queries.centers);
    EXPECT_EQ(a[i].queries.targets, b[i].queries.targets);
  }
  // Items are independent of batch size.
  const auto c = sample_batch(ds, spec, 2, 7, 2);
  EXPECT_TRUE(c[1].lr == a[1].lr);
  const auto d = sample_batch(ds, spec, 2, 8, 4);
  EXPECT_FALSE(d[0].queries.centers == a[0].queries.centers);
}

TEST(Sample, RealizedScaleStatistics) {
  const auto ds = toy_dataset(2, 200);
  SampleSpec spec;
  spec.lr_patch = 48;
  spec.pixels_per_patch = 1;
  double sum = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto item = sample_item(ds, spec, 0, static_cast<std::uint64_t>(i), 0);
    EXPECT_EQ(item.scale, std::floor(48 * item.drawn_scale) / 48.0);
    EXPECT_GE(item.drawn_scale, 1.0);
    EXPECT_LE(item.drawn_scale, 4.0);
    sum += item.scale;
  }
  EXPECT_NEAR(sum / n, 2.5, 0.02 * 2.5);
}

TEST(Sample, RadiiUseRealizedScaleAndNoDuplicates) {
  const auto ds = toy_dataset(2, 100);
  SampleSpec spec;
  spec.lr_patch = 20;
  spec.pixels_per_patch = 400;
  for (int i = 0; i < 40; ++i) {
    const auto item = sample_item(ds, spec, 1, static_cast<std::uint64_t>(i), 3);
    const double r = 20.0 / item.hr_side;
    std::set<std::pair<double, double>> seen;
    for (std::size_t k = 0; k < item.queries.size(); ++k) {
      EXPECT_EQ(item.queries.radii[k], (Vec2{r, r}));
      EXPECT_TRUE(seen.insert({item.queries.centers[k].x, item.queries.centers[k].y}).second);
    }
    EXPECT_EQ(item.queries.size(), 400u);
    const Image& src = ds.images[item.image_index];
    EXPECT_GE(item.crop_origin.row, 0);
    EXPECT_GE(item.crop_origin.col, 0);
    EXPECT_LE(item.crop_origin.row + item.hr_side, src.height());
    EXPECT_LE(item.crop_origin.col + item.hr_side, src.width());
    EXPECT_EQ(item.lr.frame(), (CoordFrame{20, 20}));
  }
}

TEST(Sample, TargetsAreHrPixels) {
  const auto ds = toy_dataset(1, 80);
  SampleSpec spec;
  spec.lr_patch = 10;
  spec.pixels_per_patch = 30;
  const auto item = sample_item(ds, spec, 0, 0, 0);
  const Image crop = ds.images[0].crop(item.crop_origin.row, item.crop_origin.col,
                                       item.hr_side, item.hr_side);
  EXPECT_TRUE(item.lr == bicubic_resize(crop, 10, 10, true));
  for (std::size_t k = 0; k < item.queries.size(); ++k) {
    const auto cell = nearest_cell(item.queries.centers[k], crop.frame());
    EXPECT_EQ(pixel_center(cell, crop.frame()), item.queries.centers[k]);
    for (int c = 0; c < 3; ++c) EXPECT_EQ(item.queries.targets[k][c], crop.at(cell.row, cell.col, c));
  }
}

TEST(Sample, SmallImagesAreSkipped) {
  std::vector<Image> imgs{make_toy_image(0, 0, 64), make_toy_image(0, 1, 12)};
  const auto ds = Dataset::from_images(imgs, "train");
  SampleSpec spec;
  spec.lr_patch = 8;
  spec.pixels_per_patch = 4;
  for (int i = 0; i < 30; ++i) {
    const auto item = sample_item(ds, spec, 0, static_cast<std::uint64_t>(i), 0);
    EXPECT_LE(item.hr_side, ds.images[item.image_index].height());
  }
  EXPECT_THROW(spec.validate_against(ds), ValidationError);
}

TEST(SampleSpec, Validation) {
  SampleSpec s;
  EXPECT_NO_THROW(s.validate());
  s.s_max = 0.5;
  EXPECT_THROW(s.validate(), ValidationError);
  s = {};
  s.pixels_per_patch = 48 * 48 + 1;
  EXPECT_THROW(s.validate(), ValidationError);
  s = {};
  s.lr_patch = 0;
  EXPECT_THROW(s.validate(), ValidationError);
}

}  // namespace
}  // namespace ipesr
