// SPDX-License-Identifier: Apache-2.0
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ipesr/rng.hpp"

namespace ipesr::oracle {
namespace {

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

double pixel_center(int i, int n) { return -1.0 + (2.0 * i + 1.0) / n; }

std::vector<double> plane(const Image& img, bool y_channel, int shave, int& h, int& w, int& c) {
  h = img.height() - 2 * shave;
  w = img.width() - 2 * shave;
  c = y_channel ? 1 : img.channels();
  std::vector<double> out(static_cast<std::size_t>(h) * w * c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < c; ++k) {
        const int sy = y + shave, sx = x + shave;
        out[(static_cast<std::size_t>(y) * w + x) * c + k] =
            y_channel ? luma(img.at(sy, sx, 0), img.at(sy, sx, 1), img.at(sy, sx, 2))
                      : img.at(sy, sx, k);
      }
    }
  }
  return out;
}

// Per-axis normalized taps of the resize kernel.
void resize_taps(double pos, int n, double ks, std::vector<int>& idx, std::vector<double>& wt) {
  idx.clear();
  wt.clear();
  const double support = 2.0 / ks;
  double sum = 0.0;
  for (int j = static_cast<int>(std::ceil(pos - support));
       j <= static_cast<int>(std::floor(pos + support)); ++j) {
    const double v = keys((pos - j) * ks);
    idx.push_back(clampi(j, 0, n - 1));
    wt.push_back(v);
    sum += v;
  }
  for (double& v : wt) v /= sum;
}

}  // namespace

double taylor_sinc(double t, int terms) {
  // sin(t)/t = sum_k (-1)^k t^(2k) / (2k+1)!
  double term = 1.0, sum = 0.0;
  for (int k = 0; k < terms; ++k) {
    sum += term;
    term *= -t * t / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
  }
  return sum;
}

std::vector<double> pe_sinusoids(double x, double y, int bandwidth) {
  std::vector<double> v;
  for (double coord : {x, y}) {
    for (int k = 0; k < bandwidth; ++k) {
      const double w = std::pow(2.0, k);
      v.push_back(std::sin(w * coord));
      v.push_back(std::cos(w * coord));
    }
  }
  return v;
}

std::vector<double> midpoint_pe_grid(double cx, double cy, double rx, double ry, int bandwidth,
                                     int n) {
  std::vector<double> acc(4 * static_cast<std::size_t>(bandwidth), 0.0);
  for (int a = 0; a < n; ++a) {
    const double y = cy - ry + (2.0 * a + 1.0) * ry / n;
    for (int b = 0; b < n; ++b) {
      const double x = cx - rx + (2.0 * b + 1.0) * rx / n;
      const auto v = pe_sinusoids(x, y, bandwidth);
      for (std::size_t k = 0; k < v.size(); ++k) acc[k] += v[k];
    }
  }
  for (double& v : acc) v /= static_cast<double>(n) * n;
  return acc;
}

std::vector<double> midpoint_pe_separable(double cx, double cy, double rx, double ry,
                                          int bandwidth, long n) {
  std::vector<double> acc(4 * static_cast<std::size_t>(bandwidth), 0.0);
  const std::size_t half = 2 * static_cast<std::size_t>(bandwidth);
  for (long a = 0; a < n; ++a) {
    const double t = (2.0 * a + 1.0) / n - 1.0;
    const double x = cx + rx * t, y = cy + ry * t;
    for (int k = 0; k < bandwidth; ++k) {
      const double w = std::pow(2.0, k);
      acc[2 * k] += std::sin(w * x);
      acc[2 * k + 1] += std::cos(w * x);
      acc[half + 2 * k] += std::sin(w * y);
      acc[half + 2 * k + 1] += std::cos(w * y);
    }
  }
  for (double& v : acc) v /= static_cast<double>(n);
  return acc;
}

double keys(double x) {
  const double a = -0.5;
  x = std::fabs(x);
  if (x <= 1.0) return (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0;
  if (x < 2.0) return a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a;
  return 0.0;
}

Image bicubic_resize(const Image& image, int out_h, int out_w, bool antialias) {
  const int in_h = image.height(), in_w = image.width();
  const double ksy = (antialias && out_h < in_h) ? static_cast<double>(out_h) / in_h : 1.0;
  const double ksx = (antialias && out_w < in_w) ? static_cast<double>(out_w) / in_w : 1.0;
  Image out(out_h, out_w, image.channels());
  std::vector<int> iy, ix;
  std::vector<double> wy, wx;
  for (int oy = 0; oy < out_h; ++oy) {
    resize_taps((oy + 0.5) * in_h / out_h - 0.5, in_h, ksy, iy, wy);
    for (int ox = 0; ox < out_w; ++ox) {
      resize_taps((ox + 0.5) * in_w / out_w - 0.5, in_w, ksx, ix, wx);
      for (int c = 0; c < image.channels(); ++c) {
        double v = 0.0;
        for (std::size_t a = 0; a < iy.size(); ++a) {
          for (std::size_t b = 0; b < ix.size(); ++b) v += wy[a] * wx[b] * image.at(iy[a], ix[b], c);
        }
        out.at(oy, ox, c) = std::min(1.0, std::max(0.0, v));
      }
    }
  }
  return out;
}

std::array<double, 3> bicubic_point(const Image& image, double x, double y) {
  const double u = (x + 1.0) / 2.0 * image.width() - 0.5;
  const double v = (y + 1.0) / 2.0 * image.height() - 0.5;
  const int fu = static_cast<int>(std::floor(u)), fv = static_cast<int>(std::floor(v));
  std::array<double, 3> out{};
  for (int c = 0; c < 3; ++c) {
    double acc = 0.0;
    for (int a = -1; a <= 2; ++a) {
      for (int b = -1; b <= 2; ++b) {
        acc += keys(v - (fv + a)) * keys(u - (fu + b)) *
               image.at(clampi(fv + a, 0, image.height() - 1), clampi(fu + b, 0, image.width() - 1), c);
      }
    }
    out[c] = acc;
  }
  return out;
}

double luma(double r, double g, double b) {
  return (16.0 + 65.481 * r + 128.553 * g + 24.966 * b) / 255.0;
}

double mse(const Image& a, const Image& b, int shave, bool y_channel) {
  int h, w, c;
  const auto pa = plane(a, y_channel, shave, h, w, c);
  const auto pb = plane(b, y_channel, shave, h, w, c);
  double s = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) s += (pa[i] - pb[i]) * (pa[i] - pb[i]);
  return s / pa.size();
}

double psnr(const Image& a, const Image& b, int shave, bool y_channel, double peak) {
  return 10.0 * std::log10(peak * peak / mse(a, b, shave, y_channel));
}

double ssim(const Image& a, const Image& b, int shave, bool y_channel, double peak) {
  int h, w, c;
  const auto pa = plane(a, y_channel, shave, h, w, c);
  const auto pb = plane(b, y_channel, shave, h, w, c);
  double win[11][11], wsum = 0.0;
  for (int i = 0; i < 11; ++i) {
    for (int j = 0; j < 11; ++j) {
      win[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2.0 * 1.5 * 1.5));
      wsum += win[i][j];
    }
  }
  const double c1 = std::pow(0.01 * peak, 2), c2 = std::pow(0.03 * peak, 2);
  double total = 0.0;
  for (int k = 0; k < c; ++k) {
    double chan = 0.0;
    int count = 0;
    for (int y = 0; y + 11 <= h; ++y) {
      for (int x = 0; x + 11 <= w; ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int i = 0; i < 11; ++i) {
          for (int j = 0; j < 11; ++j) {
            const double g = win[i][j] / wsum;
            const double va = pa[(static_cast<std::size_t>(y + i) * w + x + j) * c + k];
            const double vb = pb[(static_cast<std::size_t>(y + i) * w + x + j) * c + k];
            ma += g * va;
            mb += g * vb;
            saa += g * va * va;
            sbb += g * vb * vb;
            sab += g * va * vb;
          }
        }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        chan += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    }
    total += chan / count;
  }
  return total / c;
}

std::vector<double> conv2d(const std::vector<double>& x, int h, int w, const Conv2d& conv) {
  const int k = conv.kernel, cin = conv.in_channels, cout = conv.out_channels;
  std::vector<double> y(static_cast<std::size_t>(h) * w * cout, 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int o = 0; o < cout; ++o) {
        double acc = conv.bias(0, o);
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const int sr = clampi(r + ky - k / 2, 0, h - 1);
            const int sc = clampi(c + kx - k / 2, 0, w - 1);
            for (int i = 0; i < cin; ++i) {
              acc += x[(static_cast<std::size_t>(sr) * w + sc) * cin + i] *
                     conv.weight((ky * k + kx) * cin + i, o);
            }
          }
        }
        y[(static_cast<std::size_t>(r) * w + c) * cout + o] = acc;
      }
    }
  }
  return y;
}

std::vector<double> encoder_forward(const Encoder& enc, const Image& image) {
  const int h = image.height(), w = image.width();
  const auto head = conv2d(image.data(), h, w, enc.head);
  if (enc.blocks.empty()) return head;
  auto r = head;
  for (const auto& block : enc.blocks) {
    auto mid = conv2d(r, h, w, block[0]);
    for (double& v : mid) v = std::max(0.0, v);
    const auto out = conv2d(mid, h, w, block[1]);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += out[i];
  }
  auto t = conv2d(r, h, w, enc.tail);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] += head[i];
  return t;
}

std::vector<double> unfold_at(const std::vector<double>& latent, int h, int w, int c, int row,
                              int col) {
  std::vector<double> out(9 * static_cast<std::size_t>(c), 0.0);
  int block = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx, ++block) {
      const int r = row + dy, q = col + dx;
      if (r < 0 || r >= h || q < 0 || q >= w) continue;
      for (int k = 0; k < c; ++k) {
        out[block * c + k] = latent[(static_cast<std::size_t>(r) * w + q) * c + k];
      }
    }
  }
  return out;
}

std::vector<double> mlp_forward(const Mlp& mlp, const std::vector<double>& input) {
  std::vector<double> h;
  for (std::size_t l = 0; l < mlp.hidden.size(); ++l) {
    std::vector<double> x = h;
    if (l == 0) {
      x = input;
    } else if (mlp.skip) {
      x.insert(x.end(), input.begin(), input.end());
    }
    const Linear& layer = mlp.hidden[l];
    std::vector<double> next(layer.weight.cols());
    for (Eigen::Index o = 0; o < layer.weight.cols(); ++o) {
      double acc = layer.bias(0, o);
      for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * layer.weight(i, o);
      next[o] = acc > 0.0 ? acc : 0.0;
    }
    h = std::move(next);
  }
  std::vector<double> out(mlp.output.weight.cols());
  for (Eigen::Index o = 0; o < mlp.output.weight.cols(); ++o) {
    double acc = mlp.output.bias(0, o);
    for (std::size_t i = 0; i < h.size(); ++i) acc += h[i] * mlp.output.weight(i, o);
    out[o] = acc;
  }
  return out;
}

std::vector<double> encoding(const EncodingConfig& config, double cx, double cy, double rx,
                             double ry) {
  std::vector<double> v;
  const bool sinusoids =
      config.variant == EncodingVariant::kPlainPe || config.variant == EncodingVariant::kIpe;
  if (!sinusoids || config.prepend_coords) {
    v.push_back(cx);
    v.push_back(cy);
  }
  if (config.variant == EncodingVariant::kCell) {
    v.push_back(2 * rx);
    v.push_back(2 * ry);
  }
  if (sinusoids) {
    const auto pe = pe_sinusoids(cx, cy, config.bandwidth);
    for (int k = 0; k < 2 * config.bandwidth; ++k) {
      double att = 1.0;
      if (config.variant == EncodingVariant::kIpe) {
        const double t = std::pow(2.0, k % config.bandwidth) * (k < config.bandwidth ? rx : ry);
        att = t == 0.0 ? 1.0 : std::sin(t) / t;
      }
      v.push_back(pe[2 * k] * att);
      v.push_back(pe[2 * k + 1] * att);
    }
  }
  if (config.append_cell && config.variant != EncodingVariant::kCell) {
    v.push_back(2 * rx);
    v.push_back(2 * ry);
  }
  return v;
}

std::array<double, 3> liif_query(const ModelBundle& bundle, const Image& lr,
                                 const std::vector<double>& latent, double x, double y,
                                 double rx, double ry) {
  const int h = lr.height(), w = lr.width(), c = bundle.encoder_config.channels;
  const double u = (x + 1.0) / 2.0 * w - 0.5;
  const double v = (y + 1.0) / 2.0 * h - 0.5;
  const int u0 = static_cast<int>(std::floor(u)), v0 = static_cast<int>(std::floor(v));
  const double fu = u - u0, fv = v - v0;
  std::array<double, 3> out{};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const double wt = (a ? fv : 1.0 - fv) * (b ? fu : 1.0 - fu);
      const int row = clampi(v0 + a, 0, h - 1), col = clampi(u0 + b, 0, w - 1);
      const double dx = (x - pixel_center(col, w)) * w / 2.0;
      const double dy = (y - pixel_center(row, h)) * h / 2.0;
      auto in = unfold_at(latent, h, w, c, row, col);
      const auto e = encoding(bundle.decoder_config.encoding, dx, dy, rx, ry);
      in.insert(in.end(), e.begin(), e.end());
      const auto rgb = mlp_forward(bundle.decoder, in);
      for (int k = 0; k < 3; ++k) out[k] += wt * rgb[k];
    }
  }
  if (bundle.decoder_config.global_residual) {
    const auto res = bicubic_point(lr, x, y);
    for (int k = 0; k < 3; ++k) out[k] += res[k];
  }
  return out;
}

Image render(const ModelBundle& bundle, const Image& lr, int out_h, int out_w) {
  const auto latent = encoder_forward(bundle.encoder, lr);
  Image out(out_h, out_w, 3);
  const double rx = static_cast<double>(lr.width()) / out_w;
  const double ry = static_cast<double>(lr.height()) / out_h;
  for (int r = 0; r < out_h; ++r) {
    for (int q = 0; q < out_w; ++q) {
      const auto rgb =
          liif_query(bundle, lr, latent, pixel_center(q, out_w), pixel_center(r, out_h), rx, ry);
      for (int k = 0; k < 3; ++k) out.at(r, q, k) = std::min(1.0, std::max(0.0, rgb[k]));
    }
  }
  return out;
}

Image meta_render(const ModelBundle& bundle, const Image& lr, double s) {
  const int h = lr.height(), w = lr.width(), c = bundle.encoder_config.channels;
  const int out_h = static_cast<int>(std::lround(s * h)), out_w = static_cast<int>(std::lround(s * w));
  const auto latent = encoder_forward(bundle.encoder, lr);
  const EncodingConfig& enc = bundle.decoder_config.encoding;
  // Rounded output sizes change the realized scale, separately per axis.
  const double sx = static_cast<double>(out_w) / w, sy = static_cast<double>(out_h) / h;
  Image out(out_h, out_w, 3);
  for (int j = 0; j < out_h; ++j) {
    for (int i = 0; i < out_w; ++i) {
      const double ox = i / sx - std::floor(i / sx), oy = j / sy - std::floor(j / sy);
      std::vector<double> v;
      if (enc.variant == EncodingVariant::kNone) {
        v = {ox, oy, 0.5 * (1.0 / sx + 1.0 / sy)};
        if (enc.append_cell) {
          v.push_back(2.0 / sx);
          v.push_back(2.0 / sy);
        }
      } else {
        v = encoding(enc, ox, oy, 1.0 / sx, 1.0 / sy);
      }
      const auto filter = mlp_forward(bundle.decoder, v);
      const int row = std::min(h - 1, static_cast<int>(std::floor(j / sy)));
      const int col = std::min(w - 1, static_cast<int>(std::floor(i / sx)));
      const auto u = unfold_at(latent, h, w, c, row, col);
      std::array<double, 3> rgb{};
      for (std::size_t k = 0; k < u.size(); ++k) {
        for (int o = 0; o < 3; ++o) rgb[o] += u[k] * filter[3 * k + o];
      }
      if (bundle.decoder_config.global_residual) {
        const auto res = bicubic_point(lr, pixel_center(i, out_w), pixel_center(j, out_h));
        for (int o = 0; o < 3; ++o) rgb[o] += res[o];
      }
      for (int o = 0; o < 3; ++o) out.at(j, i, o) = std::min(1.0, std::max(0.0, rgb[o]));
    }
  }
  return out;
}

GradCheck gradient_check(const ModelBundle& bundle, const Image& lr, const QueryBatch& queries,
                         double step, double floor) {
  RandomStream rs(12345, {});
  Matrix weights(static_cast<Eigen::Index>(queries.size()), 3);
  for (Eigen::Index i = 0; i < weights.size(); ++i) weights.data()[i] = rs.uniform(-1.0, 1.0);

  ModelBundle grad = bundle.zeros_like();
  predict_queries_with_grad(bundle, lr, queries, [&](const Matrix&) { return weights; }, grad);

  ModelBundle probe = bundle;
  std::vector<std::pair<std::string, Matrix*>> params;
  probe.visit_parameters([&](const std::string& n, Matrix& m) { params.emplace_back(n, &m); });
  std::vector<const Matrix*> analytic;
  grad.visit_parameters([&](const std::string&, const Matrix& m) { analytic.push_back(&m); });

  auto loss = [&] { return predict_queries(probe, lr, queries).cwiseProduct(weights).sum(); };
  GradCheck result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& m = *params[p].second;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double a = analytic[p]->data()[i];
      const double saved = m.data()[i];
      double rel = std::numeric_limits<double>::infinity();
      for (const double h : {step, 0.1 * step}) {
        m.data()[i] = saved + h;
        const double lp = loss();
        m.data()[i] = saved - h;
        const double lm = loss();
        m.data()[i] = saved;
        const double numeric = (lp - lm) / (2.0 * h);
        rel = std::min(rel, std::fabs(a - numeric) /
                                std::max({std::fabs(a), std::fabs(numeric), floor}));
      }
      ++result.checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst = params[p].first + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace ipesr::oracle
