// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "ipesr/geometry.hpp"
#include "ipesr/rng.hpp"

namespace ipesr {

// Rows are samples (or pixels, row-major over the frame); columns are features.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Visitor over named parameter arrays, in a stable order.
using ParamVisitor = std::function<void(const std::string& name, Matrix& value)>;
using ConstParamVisitor = std::function<void(const std::string& name, const Matrix& value)>;

// Fills with U(-sqrt(1/fan_in), +sqrt(1/fan_in)).
void init_uniform_fan_in(Matrix& m, int fan_in, RandomStream& rs);

struct Linear {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out

  static Linear create(int in, int out, RandomStream& rs);
  [[nodiscard]] int in_dim() const { return static_cast<int>(weight.rows()); }
  [[nodiscard]] int out_dim() const { return static_cast<int>(weight.cols()); }
  [[nodiscard]] Linear zeros_like() const;

  void visit(const std::string& prefix, const ParamVisitor& f);
  void visit(const std::string& prefix, const ConstParamVisitor& f) const;
};

// 2D convolution, stride 1, "same" output size with replicate padding.
struct Conv2d {
  int kernel = 3;
  int in_channels = 0;
  int out_channels = 0;
  Matrix weight;  // (kernel * kernel * in) x out, tap-major then channel
  Matrix bias;    // 1 x out

  static Conv2d create(int in, int out, int kernel, RandomStream& rs);
  [[nodiscard]] Conv2d zeros_like() const;

  // x: (H*W) x in, row-major pixels of `frame`.
  [[nodiscard]] Matrix forward(const Matrix& x, const CoordFrame& frame) const;
  // Accumulates parameter gradients into `grad`; returns dL/dx.
  Matrix backward(const Matrix& x, const CoordFrame& frame, const Matrix& dy,
                  Conv2d& grad) const;

  void visit(const std::string& prefix, const ParamVisitor& f);
  void visit(const std::string& prefix, const ConstParamVisitor& f) const;
};

// Replicate-padded patch matrix: (H*W) x (k*k*C).
Matrix im2col(const Matrix& x, const CoordFrame& frame, int kernel);
// Adjoint of im2col.
Matrix col2im(const Matrix& cols, const CoordFrame& frame, int kernel, int channels);

// ReLU MLP. With skip connections the network input is concatenated to the
// input of every hidden layer after the first; the output layer is linear.
struct Mlp {
  std::vector<Linear> hidden;
  Linear output;
  bool skip = true;
  int in_dim = 0;

  struct Tape {
    Matrix input;
    std::vector<Matrix> activations;  // post-ReLU, one per hidden layer
  };

  static Mlp create(int in, int hidden_layers, int width, int out, bool skip,
                    RandomStream& rs);
  [[nodiscard]] Mlp zeros_like() const;

  [[nodiscard]] Matrix forward(const Matrix& x, Tape* tape = nullptr) const;
  // Accumulates parameter gradients into `grad`; writes dL/dx when requested.
  void backward(const Tape& tape, const Matrix& dout, Mlp& grad, Matrix* dx) const;

  void visit(const std::string& prefix, const ParamVisitor& f);
  void visit(const std::string& prefix, const ConstParamVisitor& f) const;
};

}  // namespace ipesr
