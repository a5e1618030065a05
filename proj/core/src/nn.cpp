// SPDX-License-Identifier: Apache-2.0
#include "ipesr/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ipesr {

void init_uniform_fan_in(Matrix& m, int fan_in, RandomStream& rs) {
  const double bound = std::sqrt(1.0 / fan_in);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rs.uniform(-bound, bound);
}

// ---------------------------------------------------------------------------

Linear Linear::create(int in, int out, RandomStream& rs) {
  Linear l;
  l.weight.resize(in, out);
  l.bias.resize(1, out);
  init_uniform_fan_in(l.weight, in, rs);
  init_uniform_fan_in(l.bias, in, rs);
  return l;
}

Linear Linear::zeros_like() const {
  Linear l;
  l.weight = Matrix::Zero(weight.rows(), weight.cols());
  l.bias = Matrix::Zero(1, bias.cols());
  return l;
}

void Linear::visit(const std::string& prefix, const ParamVisitor& f) {
  f(prefix + ".weight", weight);
  f(prefix + ".bias", bias);
}
void Linear::visit(const std::string& prefix, const ConstParamVisitor& f) const {
  f(prefix + ".weight", weight);
  f(prefix + ".bias", bias);
}

// ---------------------------------------------------------------------------

Matrix im2col(const Matrix& x, const CoordFrame& frame, int kernel) {
  const int h = frame.height, w = frame.width;
  const auto c = static_cast<int>(x.cols());
  const int pad = kernel / 2;
  Matrix cols(static_cast<Eigen::Index>(h) * w, static_cast<Eigen::Index>(kernel) * kernel * c);
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      double* dst = cols.row(static_cast<Eigen::Index>(y) * w + xx).data();
      for (int ky = 0; ky < kernel; ++ky) {
        const int sy = std::clamp(y + ky - pad, 0, h - 1);
        for (int kx = 0; kx < kernel; ++kx) {
          const int sx = std::clamp(xx + kx - pad, 0, w - 1);
          const double* src = x.row(static_cast<Eigen::Index>(sy) * w + sx).data();
          std::copy(src, src + c, dst);
          dst += c;
        }
      }
    }
  }
  return cols;
}

Matrix col2im(const Matrix& cols, const CoordFrame& frame, int kernel, int channels) {
  const int h = frame.height, w = frame.width;
  const int pad = kernel / 2;
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(h) * w, channels);
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      const double* src = cols.row(static_cast<Eigen::Index>(y) * w + xx).data();
      for (int ky = 0; ky < kernel; ++ky) {
        const int sy = std::clamp(y + ky - pad, 0, h - 1);
        for (int kx = 0; kx < kernel; ++kx) {
          const int sx = std::clamp(xx + kx - pad, 0, w - 1);
          double* dst = x.row(static_cast<Eigen::Index>(sy) * w + sx).data();
          for (int ch = 0; ch < channels; ++ch) dst[ch] += src[ch];
          src += channels;
        }
      }
    }
  }
  return x;
}

Conv2d Conv2d::create(int in, int out, int kernel, RandomStream& rs) {
  if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("conv kernel must be odd");
  Conv2d c;
  c.kernel = kernel;
  c.in_channels = in;
  c.out_channels = out;
  c.weight.resize(static_cast<Eigen::Index>(kernel) * kernel * in, out);
  c.bias.resize(1, out);
  const int fan_in = kernel * kernel * in;
  init_uniform_fan_in(c.weight, fan_in, rs);
  init_uniform_fan_in(c.bias, fan_in, rs);
  return c;
}

Conv2d Conv2d::zeros_like() const {
  Conv2d c = *this;
  c.weight.setZero();
  c.bias.setZero();
  return c;
}

Matrix Conv2d::forward(const Matrix& x, const CoordFrame& frame) const {
  Matrix y;
  if (kernel == 1) {
    y.noalias() = x * weight;
  } else {
    y.noalias() = im2col(x, frame, kernel) * weight;
  }
  y.rowwise() += bias.row(0);
  return y;
}

Matrix Conv2d::backward(const Matrix& x, const CoordFrame& frame, const Matrix& dy,
                        Conv2d& grad) const {
  grad.bias.row(0) += dy.colwise().sum();
  if (kernel == 1) {
    grad.weight.noalias() += x.transpose() * dy;
    return dy * weight.transpose();
  }
  const Matrix cols = im2col(x, frame, kernel);
  grad.weight.noalias() += cols.transpose() * dy;
  const Matrix dcols = dy * weight.transpose();
  return col2im(dcols, frame, kernel, in_channels);
}

void Conv2d::visit(const std::string& prefix, const ParamVisitor& f) {
  f(prefix + ".weight", weight);
  f(prefix + ".bias", bias);
}
void Conv2d::visit(const std::string& prefix, const ConstParamVisitor& f) const {
  f(prefix + ".weight", weight);
  f(prefix + ".bias", bias);
}

// ---------------------------------------------------------------------------

Mlp Mlp::create(int in, int hidden_layers, int width, int out, bool skip, RandomStream& rs) {
  if (in < 1 || hidden_layers < 1 || width < 1 || out < 1) {
    throw std::invalid_argument("MLP dimensions must be positive");
  }
  Mlp m;
  m.skip = skip;
  m.in_dim = in;
  for (int l = 0; l < hidden_layers; ++l) {
    const int layer_in = l == 0 ? in : (skip ? width + in : width);
    m.hidden.push_back(Linear::create(layer_in, width, rs));
  }
  m.output = Linear::create(width, out, rs);
  return m;
}

Mlp Mlp::zeros_like() const {
  Mlp m;
  m.skip = skip;
  m.in_dim = in_dim;
  for (const auto& l : hidden) m.hidden.push_back(l.zeros_like());
  m.output = output.zeros_like();
  return m;
}

Matrix Mlp::forward(const Matrix& x, Tape* tape) const {
  if (x.cols() != in_dim) {
    throw std::invalid_argument("MLP input has " + std::to_string(x.cols()) +
                                " features, expected " + std::to_string(in_dim));
  }
  if (tape) tape->activations.clear();
  Matrix h;
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    const Linear& layer = hidden[l];
    Matrix pre;
    if (l == 0) {
      pre.noalias() = x * layer.weight;
    } else if (skip) {
      const auto width = h.cols();
      pre.noalias() = h * layer.weight.topRows(width);
      pre.noalias() += x * layer.weight.bottomRows(in_dim);
    } else {
      pre.noalias() = h * layer.weight;
    }
    pre.rowwise() += layer.bias.row(0);
    h = pre.cwiseMax(0.0);
    if (tape) tape->activations.push_back(h);
  }
  Matrix out;
  out.noalias() = h * output.weight;
  out.rowwise() += output.bias.row(0);
  if (tape) tape->input = x;
  return out;
}

void Mlp::backward(const Tape& tape, const Matrix& dout, Mlp& grad, Matrix* dx) const {
  const Matrix& x = tape.input;
  const auto& acts = tape.activations;
  grad.output.bias.row(0) += dout.colwise().sum();
  grad.output.weight.noalias() += acts.back().transpose() * dout;
  Matrix dh = dout * output.weight.transpose();
  Matrix dinput = Matrix::Zero(x.rows(), x.cols());
  for (std::size_t l = hidden.size(); l-- > 0;) {
    // Through the ReLU.
    Matrix dpre = dh.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
    const Linear& layer = hidden[l];
    Linear& g = grad.hidden[l];
    g.bias.row(0) += dpre.colwise().sum();
    if (l == 0) {
      g.weight.noalias() += x.transpose() * dpre;
      if (dx) dinput.noalias() += dpre * layer.weight.transpose();
    } else {
      const Matrix& prev = acts[l - 1];
      const auto width = prev.cols();
      if (skip) {
        g.weight.topRows(width).noalias() += prev.transpose() * dpre;
        g.weight.bottomRows(in_dim).noalias() += x.transpose() * dpre;
        if (dx) dinput.noalias() += dpre * layer.weight.bottomRows(in_dim).transpose();
        dh.noalias() = dpre * layer.weight.topRows(width).transpose();
      } else {
        g.weight.noalias() += prev.transpose() * dpre;
        dh.noalias() = dpre * layer.weight.transpose();
      }
    }
  }
  if (dx) *dx = std::move(dinput);
}

void Mlp::visit(const std::string& prefix, const ParamVisitor& f) {
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    hidden[l].visit(prefix + ".hidden" + std::to_string(l), f);
  }
  output.visit(prefix + ".output", f);
}
void Mlp::visit(const std::string& prefix, const ConstParamVisitor& f) const {
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    hidden[l].visit(prefix + ".hidden" + std::to_string(l), f);
  }
  output.visit(prefix + ".output", f);
}

}  // namespace ipesr
