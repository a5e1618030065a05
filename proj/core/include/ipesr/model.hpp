// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ipesr/encoding.hpp"
#include "ipesr/geometry.hpp"
#include "ipesr/image.hpp"
#include "ipesr/nn.hpp"

namespace ipesr {

enum class ModelVariant { kLiif, kMetaSr };

std::string_view to_string(ModelVariant v);
ModelVariant parse_model_variant(std::string_view name);

// Residual convolutional feature extractor (EDSR-style, no normalization).
// blocks = 0 reduces it to the head convolution.
struct EncoderConfig {
  int blocks = 4;
  int channels = 32;
  int kernel_size = 3;

  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// For LIIF this configures the implicit decoder; for Meta-SR it configures
// the filter-predictor MLP.
struct DecoderConfig {
  int hidden_layers = 4;
  int hidden_width = 256;
  bool skip_connections = true;
  EncodingConfig encoding;
  // Adds the bicubic upsampling of the LR input to every prediction.
  bool global_residual = true;
  // Zero the output layer at initialization instead of the fan-in scheme.
  bool zero_init_head = false;

  void validate() const;
  friend bool operator==(const DecoderConfig&, const DecoderConfig&) = default;
};

struct LatentGrid {
  CoordFrame frame;
  Matrix values;  // (H*W) x C, row-major pixels

  [[nodiscard]] int channels() const { return static_cast<int>(values.cols()); }
};

struct Encoder {
  EncoderConfig config;
  Conv2d head;
  std::vector<std::array<Conv2d, 2>> blocks;
  Conv2d tail;  // only present when blocks > 0

  struct Tape {
    CoordFrame frame;
    Matrix input;
    Matrix head_out;
    std::vector<Matrix> block_in;
    std::vector<Matrix> block_mid;  // post-ReLU
    Matrix tail_in;
  };

  static Encoder create(const EncoderConfig& config, RandomStream& rs);
  [[nodiscard]] Encoder zeros_like() const;
  [[nodiscard]] Matrix forward(const Matrix& rgb, const CoordFrame& frame,
                               Tape* tape = nullptr) const;
  void backward(const Tape& tape, const Matrix& dout, Encoder& grad) const;

  void visit(const std::string& prefix, const ParamVisitor& f);
  void visit(const std::string& prefix, const ConstParamVisitor& f) const;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

// Everything needed to re-render deterministically.
struct ModelBundle {
  ModelVariant variant = ModelVariant::kLiif;
  EncoderConfig encoder_config;
  DecoderConfig decoder_config;
  Encoder encoder;
  Mlp decoder;
  std::uint32_t format_version = kModelFormatVersion;

  static ModelBundle create(ModelVariant variant, const EncoderConfig& encoder_config,
                            const DecoderConfig& decoder_config, std::uint64_t seed);
  [[nodiscard]] ModelBundle zeros_like() const;

  [[nodiscard]] int decoder_input_dim() const;
  [[nodiscard]] int decoder_output_dim() const;

  void visit_parameters(const ParamVisitor& f);
  void visit_parameters(const ConstParamVisitor& f) const;
  [[nodiscard]] std::size_t parameter_count() const;
};

// Input-width of the Meta-SR filter predictor for an encoding config.
int meta_input_dim(const EncodingConfig& config);

// ---------------------------------------------------------------------------
// Forward operations
// ---------------------------------------------------------------------------

// Image as a (H*W) x 3 matrix; throws on non-finite values.
Matrix image_to_matrix(const Image& image);

LatentGrid encode(const ModelBundle& bundle, const Image& image);

// 3x3 zero-padded neighbourhood concatenation: C -> 9C channels. Block order
// is (dy, dx) in {-1,0,1}^2, row-major.
LatentGrid unfold(const LatentGrid& grid);
// Adjoint of unfold (used by backpropagation).
Matrix fold_gradient(const Matrix& dunfolded, const CoordFrame& frame, int channels);

// Implicit decoder on one query: latent (9C) ++ encoding -> RGB (unbounded).
std::array<double, 3> decode(const Mlp& decoder, std::span<const double> latent,
                             const EncodingVector& encoding, const DecoderConfig& config);

// Meta-Upscale input for output pixel (i, j) at scale s. i runs along x
// (columns) and j along y (rows); the offsets are i/s - floor(i/s) and
// j/s - floor(j/s). With encoding variant none this is (dx, dy, 1/s);
// otherwise the configured encoding of the offset with radius (1/s, 1/s).
EncodingVector meta_input(double i, double j, double s, const EncodingConfig& config);
EncodingVector meta_input(double i, double j, double s, bool use_ipe, int bandwidth);

// Predicted colours for arbitrary queries (unclamped, residual included).
Matrix predict_queries(const ModelBundle& bundle, const Image& lr, const QueryBatch& queries);

// Same as predict_queries, then backpropagates dL/dpred (returned by
// `loss_grad`) into `grad`, which must have the bundle's shape.
using LossGradFn = std::function<Matrix(const Matrix& predictions)>;
Matrix predict_queries_with_grad(const ModelBundle& bundle, const Image& lr,
                                 const QueryBatch& queries, const LossGradFn& loss_grad,
                                 ModelBundle& grad);

// Full-frame LIIF rendering with local ensemble; output clamped to [0,1].
Image render(const ModelBundle& bundle, const Image& lr, const CoordFrame& out_frame);

// Meta-SR rendering at isotropic scale s; output is round(s * dims).
Image meta_render(const ModelBundle& bundle, const Image& lr, double s);
// Meta-SR rendering onto an explicit output frame.
Image meta_render(const ModelBundle& bundle, const Image& lr, const CoordFrame& out_frame);

// Dispatches on bundle.variant.
Image super_resolve(const ModelBundle& bundle, const Image& lr, const CoordFrame& out_frame);

// Output frame for an isotropic scale: round(s * dims), at least 1x1.
CoordFrame scaled_frame(const CoordFrame& lr, double s);

}  // namespace ipesr
