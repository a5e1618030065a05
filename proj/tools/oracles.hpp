// SPDX-License-Identifier: Apache-2.0
#pragma once

// Slow, loop-based reference implementations used by the self-check command
// and the test suites. Nothing here calls the optimized code paths it is
// meant to verify; shared inputs are limited to the parameter arrays.

#include <array>
#include <string>
#include <vector>

#include "ipesr/image.hpp"
#include "ipesr/model.hpp"

namespace ipesr::oracle {

// Maclaurin series of sin(t)/t with `terms` terms.
double taylor_sinc(double t, int terms = 64);

// Encoded part of plain PE at a point: per axis, per octave (sin, cos).
std::vector<double> pe_sinusoids(double x, double y, int bandwidth);

// Mean of pe_sinusoids over [cx-rx, cx+rx] x [cy-ry, cy+ry] by the midpoint
// rule on an n x n grid, evaluated literally node by node.
std::vector<double> midpoint_pe_grid(double cx, double cy, double rx, double ry, int bandwidth,
                                     int n);
// The same n x n midpoint mean, using that each component depends on one
// axis only: the grid mean collapses to an n-node sum per axis.
std::vector<double> midpoint_pe_separable(double cx, double cy, double rx, double ry,
                                          int bandwidth, long n);

// Keys kernel, a = -0.5, written from the piecewise definition.
double keys(double x);

// Direct two-dimensional bicubic resize (no separable passes).
Image bicubic_resize(const Image& image, int out_h, int out_w, bool antialias);
// Unclamped bicubic point sample at a [-1,1]^2 coordinate.
std::array<double, 3> bicubic_point(const Image& image, double x, double y);

double luma(double r, double g, double b);
double mse(const Image& a, const Image& b, int shave, bool y_channel);
double psnr(const Image& a, const Image& b, int shave, bool y_channel, double peak = 1.0);
// Full 11x11 window sums at every valid position.
double ssim(const Image& a, const Image& b, int shave, bool y_channel, double peak = 1.0);

// 'Same' convolution with replicate padding, from the weight layout
// (ky, kx, c_in) x c_out.
std::vector<double> conv2d(const std::vector<double>& x, int h, int w, const Conv2d& conv);
std::vector<double> encoder_forward(const Encoder& enc, const Image& image);
// Zero-padded 3x3 neighbourhood concatenation of a single pixel's latent.
std::vector<double> unfold_at(const std::vector<double>& latent, int h, int w, int c, int row,
                              int col);
std::vector<double> mlp_forward(const Mlp& mlp, const std::vector<double>& input);
std::vector<double> encoding(const EncodingConfig& config, double cx, double cy, double rx,
                             double ry);

// One query at a time: four ensemble members, blended, plus residual. Not
// clamped.
std::array<double, 3> liif_query(const ModelBundle& bundle, const Image& lr,
                                 const std::vector<double>& latent, double x, double y,
                                 double rx, double ry);
Image render(const ModelBundle& bundle, const Image& lr, int out_h, int out_w);
// Meta-SR at isotropic integer-friendly scale: pixel (i, j) uses latent
// (floor(j/s), floor(i/s)) and the predicted 3x3xC -> 3 filter.
Image meta_render(const ModelBundle& bundle, const Image& lr, double s);

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;
  long checked = 0;
};

// Central differences of L = sum(R .* predict_queries) for a fixed random R,
// compared with the backpropagated gradient for every parameter. The
// relative error is |a - n| / max(|a|, |n|, floor), taken at `step` and at
// step / 10, keeping the better one. A ReLU kink inside the wider interval
// spoils only that step; a wrong gradient disagrees with both.
GradCheck gradient_check(const ModelBundle& bundle, const Image& lr, const QueryBatch& queries,
                         double step = 1e-5, double floor = 1e-6);

}  // namespace ipesr::oracle
