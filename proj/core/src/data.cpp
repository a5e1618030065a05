// SPDX-License-Identifier: Apache-2.0
#include "ipesr/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <cstdio>
#include <iostream>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "ipesr/rng.hpp"

namespace ipesr {
namespace {

struct Tap {
  int index;
  double weight;
};

struct AxisPlan {
  std::vector<std::vector<Tap>> taps;  // per output index
  std::vector<int> anchor;             // per output index
};

AxisPlan plan_axis(int in, int out, bool antialias) {
  const double scale = static_cast<double>(out) / in;
  const double kscale = (antialias && scale < 1.0) ? scale : 1.0;
  const double support = 2.0 / kscale;
  AxisPlan plan;
  plan.taps.resize(out);
  plan.anchor.resize(out);
  for (int i = 0; i < out; ++i) {
    const double x = (i + 0.5) * in / out - 0.5;
    const int lo = static_cast<int>(std::ceil(x - support));
    const int hi = static_cast<int>(std::floor(x + support));
    auto& taps = plan.taps[i];
    double sum = 0.0;
    for (int j = lo; j <= hi; ++j) {
      const double w = cubic_kernel((x - j) * kscale);
      if (w == 0.0) continue;
      taps.push_back({std::clamp(j, 0, in - 1), w});
      sum += w;
    }
    for (Tap& t : taps) t.weight /= sum;
    plan.anchor[i] = std::clamp(static_cast<int>(std::lround(x)), 0, in - 1);
  }
  return plan;
}

// Weighted sums are accumulated as offsets from an anchor sample; with
// normalized weights this is the same sum, and constant inputs stay exact.
Image resample_width(const Image& src, const AxisPlan& plan) {
  const int out_w = static_cast<int>(plan.taps.size());
  Image dst(src.height(), out_w, src.channels());
  for (int y = 0; y < src.height(); ++y) {
    for (int i = 0; i < out_w; ++i) {
      for (int c = 0; c < src.channels(); ++c) {
        const double base = src.at(y, plan.anchor[i], c);
        double acc = 0.0;
        for (const Tap& t : plan.taps[i]) acc += t.weight * (src.at(y, t.index, c) - base);
        dst.at(y, i, c) = base + acc;
      }
    }
  }
  return dst;
}

Image resample_height(const Image& src, const AxisPlan& plan) {
  const int out_h = static_cast<int>(plan.taps.size());
  Image dst(out_h, src.width(), src.channels());
  for (int i = 0; i < out_h; ++i) {
    for (int x = 0; x < src.width(); ++x) {
      for (int c = 0; c < src.channels(); ++c) {
        const double base = src.at(plan.anchor[i], x, c);
        double acc = 0.0;
        for (const Tap& t : plan.taps[i]) acc += t.weight * (src.at(t.index, x, c) - base);
        dst.at(i, x, c) = base + acc;
      }
    }
  }
  return dst;
}

}  // namespace

double cubic_kernel(double x) {
  constexpr double a = -0.5;
  const double ax = std::abs(x);
  if (ax <= 1.0) return ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0;
  if (ax < 2.0) return ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a;
  return 0.0;
}

Image bicubic_resize(const Image& image, int out_height, int out_width, bool antialias) {
  if (image.empty()) throw std::invalid_argument("bicubic_resize: empty image");
  if (out_height < 1 || out_width < 1) {
    throw std::invalid_argument("bicubic_resize: output dimensions must be >= 1");
  }
  const AxisPlan wplan = plan_axis(image.width(), out_width, antialias);
  const AxisPlan hplan = plan_axis(image.height(), out_height, antialias);
  Image out = resample_height(resample_width(image, wplan), hplan);
  out.clamp01();
  return out;
}

void bicubic_sample(const Image& image, Vec2 point, double* out) {
  auto taps = [](double u, int n, std::array<int, 4>& idx, std::array<double, 4>& w,
                 int& anchor) {
    const int f = static_cast<int>(std::floor(u));
    double sum = 0.0;
    for (int k = 0; k < 4; ++k) {
      const int j = f - 1 + k;
      idx[k] = std::clamp(j, 0, n - 1);
      w[k] = cubic_kernel(u - j);
      sum += w[k];
    }
    for (double& v : w) v /= sum;
    anchor = std::clamp(static_cast<int>(std::lround(u)), 0, n - 1);
  };
  std::array<int, 4> ix{}, iy{};
  std::array<double, 4> wx{}, wy{};
  int ax = 0, ay = 0;
  taps(continuous_index(point.x, image.width()), image.width(), ix, wx, ax);
  taps(continuous_index(point.y, image.height()), image.height(), iy, wy, ay);

  const int channels = image.channels();
  for (int c = 0; c < channels; ++c) {
    auto row_value = [&](int y) {
      const double base = image.at(y, ax, c);
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += wx[k] * (image.at(y, ix[k], c) - base);
      return base + acc;
    };
    const double base = row_value(ay);
    double acc = 0.0;
    for (int k = 0; k < 4; ++k) acc += wy[k] * (row_value(iy[k]) - base);
    out[c] = base + acc;
  }
}

// ---------------------------------------------------------------------------

Dataset Dataset::load(const std::filesystem::path& root, std::string split) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) {
    throw ValidationError("dataset directory does not exist: " + root.string());
  }
  std::vector<fs::path> files;
  const fs::path manifest = root / "manifest.txt";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      files.push_back(root / line);
    }
  } else {
    for (const auto& entry : fs::directory_iterator(root)) {
      if (!entry.is_regular_file()) continue;
      auto ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
      if (ext == ".png") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) throw ValidationError("dataset has no images: " + root.string());

  Dataset ds;
  ds.root = root;
  ds.split = std::move(split);
  for (const auto& f : files) {
    if (!fs::exists(f)) throw ValidationError("dataset image missing: " + f.string());
    Image img = read_png(f);
    ds.records.push_back({f.stem().string(), img.height(), img.width(), f});
    ds.images.push_back(std::move(img));
  }
  return ds;
}

Dataset Dataset::from_images(std::vector<Image> images, std::string split) {
  Dataset ds;
  ds.split = std::move(split);
  for (std::size_t i = 0; i < images.size(); ++i) {
    ds.records.push_back({"image_" + std::to_string(i), images[i].height(),
                          images[i].width(), {}});
  }
  ds.images = std::move(images);
  return ds;
}

int Dataset::min_dimension() const {
  int m = std::numeric_limits<int>::max();
  for (const auto& img : images) m = std::min({m, img.height(), img.width()});
  return m;
}

void SampleSpec::validate() const {
  if (lr_patch < 1) throw ValidationError("sample.lr_patch must be >= 1");
  if (!(s_max >= 1.0) || !std::isfinite(s_max)) {
    throw ValidationError("sample.s_max must be a finite value >= 1");
  }
  if (pixels_per_patch < 1 || pixels_per_patch > lr_patch * lr_patch) {
    throw ValidationError("sample.pixels_per_patch must lie in [1, lr_patch^2]");
  }
}

void SampleSpec::validate_against(const Dataset& dataset) const {
  validate();
  if (dataset.size() == 0) throw ValidationError("training dataset is empty");
  const double need = lr_patch * s_max;
  if (need > dataset.min_dimension()) {
    throw ValidationError("sample.lr_patch * sample.s_max = " + std::to_string(need) +
                          " exceeds the smallest training image dimension " +
                          std::to_string(dataset.min_dimension()));
  }
}

TrainingSample sample_item(const Dataset& dataset, const SampleSpec& spec,
                           std::uint64_t epoch, std::uint64_t iteration,
                           std::uint64_t item) {
  if (dataset.size() == 0) throw std::invalid_argument("sample_item: empty dataset");
  RandomStream rs(spec.seed, {stream_tag::kBatch, epoch, iteration, item});
  constexpr int kMaxAttempts = 64;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const auto image_index = static_cast<int>(rs.below(dataset.size()));
    const double s = spec.s_max > 1.0 ? rs.uniform(1.0, spec.s_max) : 1.0;
    const int hr_side = static_cast<int>(std::floor(spec.lr_patch * s));
    const Image& hr = dataset.images[image_index];
    if (hr_side > hr.height() || hr_side > hr.width()) {
      std::cerr << "[ipesr] sample: image " << image_index << " (" << hr.height() << "x"
                << hr.width() << ") smaller than crop " << hr_side << ", resampling\n";
      continue;
    }
    TrainingSample out;
    out.image_index = image_index;
    out.drawn_scale = s;
    out.hr_side = hr_side;
    out.scale = static_cast<double>(hr_side) / spec.lr_patch;
    out.crop_origin.row = static_cast<int>(rs.below(hr.height() - hr_side + 1));
    out.crop_origin.col = static_cast<int>(rs.below(hr.width() - hr_side + 1));
    const Image crop = hr.crop(out.crop_origin.row, out.crop_origin.col, hr_side, hr_side);
    out.lr = bicubic_resize(crop, spec.lr_patch, spec.lr_patch, spec.antialias);

    // Pixels without replacement: partial Fisher-Yates over all HR pixels.
    const int total = hr_side * hr_side;
    const int count = std::min(spec.pixels_per_patch, total);
    std::vector<int> order(total);
    std::iota(order.begin(), order.end(), 0);
    for (int i = 0; i < count; ++i) {
      const auto j = i + static_cast<int>(rs.below(static_cast<std::uint64_t>(total - i)));
      std::swap(order[i], order[j]);
    }
    const double radius = static_cast<double>(spec.lr_patch) / hr_side;
    auto& q = out.queries;
    q.centers.reserve(count);
    q.radii.assign(count, Vec2{radius, radius});
    q.targets.reserve(count);
    for (int i = 0; i < count; ++i) {
      const int row = order[i] / hr_side;
      const int col = order[i] % hr_side;
      q.centers.push_back(Vec2{axis_center(col, hr_side), axis_center(row, hr_side)});
      q.targets.push_back({crop.at(row, col, 0), crop.at(row, col, 1), crop.at(row, col, 2)});
    }
    return out;
  }
  throw std::runtime_error("sample_item: no image large enough after repeated attempts");
}

std::vector<TrainingSample> sample_batch(const Dataset& dataset, const SampleSpec& spec,
                                         std::uint64_t epoch, std::uint64_t iteration,
                                         int batch_size) {
  std::vector<TrainingSample> batch;
  batch.reserve(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    batch.push_back(sample_item(dataset, spec, epoch, iteration, static_cast<std::uint64_t>(i)));
  }
  return batch;
}

// ---------------------------------------------------------------------------

namespace {

using Color = std::array<double, 3>;

struct Shape {
  enum Kind { kEllipse, kRect, kTriangle, kGrating, kLine } kind;
  double cx, cy, a, b, angle;     // ellipse / rect / grating / line
  double px[3], py[3];            // triangle vertices, line endpoints
  double freq;                    // grating cycles per unit
  Color color, color2;
};

Color random_color(RandomStream& rs) {
  return {rs.uniform(0.05, 0.95), rs.uniform(0.05, 0.95), rs.uniform(0.05, 0.95)};
}

bool shape_hit(const Shape& s, double x, double y, Color& out) {
  const double dx = x - s.cx, dy = y - s.cy;
  const double ca = std::cos(s.angle), sa = std::sin(s.angle);
  const double u = ca * dx + sa * dy, v = -sa * dx + ca * dy;
  switch (s.kind) {
    case Shape::kEllipse:
      if ((u * u) / (s.a * s.a) + (v * v) / (s.b * s.b) > 1.0) return false;
      out = s.color;
      return true;
    case Shape::kRect:
      if (std::abs(u) > s.a || std::abs(v) > s.b) return false;
      out = s.color;
      return true;
    case Shape::kTriangle: {
      auto edge = [&](int i, int j) {
        return (s.px[j] - s.px[i]) * (y - s.py[i]) - (s.py[j] - s.py[i]) * (x - s.px[i]);
      };
      const double e0 = edge(0, 1), e1 = edge(1, 2), e2 = edge(2, 0);
      const bool inside = (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
      if (!inside) return false;
      out = s.color;
      return true;
    }
    case Shape::kGrating: {
      if (dx * dx + dy * dy > s.a * s.a) return false;
      const double t = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * s.freq * u);
      for (int c = 0; c < 3; ++c) out[c] = s.color[c] * t + s.color2[c] * (1.0 - t);
      return true;
    }
    case Shape::kLine: {
      const double lx = s.px[1] - s.px[0], ly = s.py[1] - s.py[0];
      const double len2 = lx * lx + ly * ly;
      double t = ((x - s.px[0]) * lx + (y - s.py[0]) * ly) / len2;
      t = std::clamp(t, 0.0, 1.0);
      const double ex = x - (s.px[0] + t * lx), ey = y - (s.py[0] + t * ly);
      if (ex * ex + ey * ey > s.a * s.a) return false;
      out = s.color;
      return true;
    }
  }
  return false;
}

}  // namespace

Image make_toy_image(std::uint64_t seed, int index, int size) {
  if (size < 1) throw std::invalid_argument("make_toy_image: size must be >= 1");
  RandomStream rs(seed, {stream_tag::kToySet, static_cast<std::uint64_t>(index)});

  const Color bg0 = random_color(rs), bg1 = random_color(rs);
  const double bg_angle = rs.uniform(0.0, 2.0 * std::numbers::pi);

  std::vector<Shape> shapes;
  const int count = 6 + static_cast<int>(rs.below(6));
  for (int i = 0; i < count; ++i) {
    Shape s{};
    const auto pick = rs.below(10);
    s.kind = pick < 3   ? Shape::kEllipse
             : pick < 5 ? Shape::kRect
             : pick < 7 ? Shape::kTriangle
             : pick < 8 ? Shape::kGrating
                        : Shape::kLine;
    s.cx = rs.uniform(0.0, 1.0);
    s.cy = rs.uniform(0.0, 1.0);
    s.a = rs.uniform(0.06, 0.3);
    s.b = rs.uniform(0.04, 0.25);
    s.angle = rs.uniform(0.0, std::numbers::pi);
    for (int k = 0; k < 3; ++k) {
      s.px[k] = rs.uniform(-0.1, 1.1);
      s.py[k] = rs.uniform(-0.1, 1.1);
    }
    s.freq = rs.uniform(4.0, 18.0);
    s.color = random_color(rs);
    s.color2 = random_color(rs);
    if (s.kind == Shape::kLine) s.a = rs.uniform(0.004, 0.015);
    shapes.push_back(s);
  }

  constexpr int kSuper = 4;
  Image img(size, size, 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      Color acc{0, 0, 0};
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double px = (x + (sx + 0.5) / kSuper) / size;
          const double py = (y + (sy + 0.5) / kSuper) / size;
          const double t = 0.5 + 0.5 * ((px - 0.5) * std::cos(bg_angle) +
                                        (py - 0.5) * std::sin(bg_angle));
          Color col;
          for (int c = 0; c < 3; ++c) col[c] = bg0[c] * (1.0 - t) + bg1[c] * t;
          for (const Shape& s : shapes) shape_hit(s, px, py, col);
          for (int c = 0; c < 3; ++c) acc[c] += col[c];
        }
      }
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = acc[c] / (kSuper * kSuper);
    }
  }
  img.clamp01();
  return img;
}

std::vector<std::filesystem::path> write_toy_set(const std::filesystem::path& dir,
                                                 std::uint64_t seed, int count, int size,
                                                 int first) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (int i = first; i < first + count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "toy_%03d.png", i);
    const auto path = dir / name;
    write_png(path, make_toy_image(seed, i, size));
    paths.push_back(path);
  }
  return paths;
}

}  // namespace ipesr
