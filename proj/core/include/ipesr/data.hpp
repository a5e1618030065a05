// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ipesr/geometry.hpp"
#include "ipesr/image.hpp"

namespace ipesr {

// ---------------------------------------------------------------------------
// Bicubic resampling
// ---------------------------------------------------------------------------

// Keys cubic convolution kernel with a = -0.5.
double cubic_kernel(double x);

// Separable bicubic resize. Sample positions follow the half-pixel convention
// (src = (dst + 0.5) * in / out - 0.5) with replicated edges. When shrinking
// an axis and `antialias` is set, the kernel is stretched by the inverse
// scale, as MATLAB's imresize does. Output is clamped to [0, 1].
Image bicubic_resize(const Image& image, int out_height, int out_width,
                     bool antialias = true);

// Unclamped bicubic interpolation of `image` at a continuous [-1,1]^2
// coordinate, using the plain (unstretched) kernel. Matches bicubic_resize on
// upscaling grids before clamping.
void bicubic_sample(const Image& image, Vec2 point, double* out);

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct ImageRecord {
  std::string id;
  int height = 0;
  int width = 0;
  std::filesystem::path path;
};

struct Dataset {
  std::filesystem::path root;
  std::string split;
  std::vector<ImageRecord> records;
  std::vector<Image> images;

  // Loads every PNG in `root` (sorted by name), or the relative paths listed
  // one per line in `root/manifest.txt` when that file exists.
  static Dataset load(const std::filesystem::path& root, std::string split);
  static Dataset from_images(std::vector<Image> images, std::string split);

  [[nodiscard]] std::size_t size() const { return images.size(); }
  [[nodiscard]] int min_dimension() const;
};

// How training items are drawn: an LR patch side, a scale distribution
// U(1, s_max) and the number of HR pixels queried per patch.
struct SampleSpec {
  int lr_patch = 48;
  double s_max = 4.0;
  int pixels_per_patch = 48 * 48;
  std::uint64_t seed = 0;
  bool antialias = true;

  void validate() const;
  void validate_against(const Dataset& dataset) const;
};

struct TrainingSample {
  Image lr;
  QueryBatch queries;       // centers in the LR/HR shared frame, targets set
  double drawn_scale = 1;   // s ~ U(1, s_max)
  double scale = 1;         // realized scale: hr_side / lr_patch
  int image_index = 0;
  int hr_side = 0;
  PixelIndex crop_origin;
};

// One training item, drawn from the counter-based stream
// (seed, epoch, iteration, item). Independent of every other item.
TrainingSample sample_item(const Dataset& dataset, const SampleSpec& spec,
                           std::uint64_t epoch, std::uint64_t iteration,
                           std::uint64_t item);

std::vector<TrainingSample> sample_batch(const Dataset& dataset, const SampleSpec& spec,
                                         std::uint64_t epoch, std::uint64_t iteration,
                                         int batch_size);

// ---------------------------------------------------------------------------
// Procedural toy images
// ---------------------------------------------------------------------------

// Deterministic synthetic RGB image with flat shapes, soft gradients, gratings
// and thin lines, supersampled to avoid aliasing.
Image make_toy_image(std::uint64_t seed, int index, int size);

// Writes toy images first .. first+count-1 as PNG files named toy_000.png,
// ... into `dir`.
std::vector<std::filesystem::path> write_toy_set(const std::filesystem::path& dir,
                                                 std::uint64_t seed, int count, int size,
                                                 int first = 0);

}  // namespace ipesr
