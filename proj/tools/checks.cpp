// SPDX-License-Identifier: Apache-2.0
#include "checks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ipesr/data.hpp"
#include "ipesr/encoding.hpp"
#include "ipesr/geometry.hpp"
#include "ipesr/metrics.hpp"
#include "ipesr/model.hpp"
#include "ipesr/rng.hpp"
#include "oracles.hpp"

namespace ipesr::checks {
namespace {

std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

Verdict make(std::string name, double err, double tol, const std::string& extra = {}) {
  Verdict v{std::move(name), err <= tol, {}};
  v.detail = "max error " + sci(err) + " (tolerance " + sci(tol) + ")";
  if (!extra.empty()) v.detail += ", " + extra;
  return v;
}

Image random_image(RandomStream& rs, int h, int w) {
  Image img(h, w, 3);
  for (double& v : img.data()) v = rs.uniform();
  return img;
}

int random_int(RandomStream& rs, int lo, int hi) {
  return lo + static_cast<int>(rs.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

double max_abs_diff(const Image& a, const Image& b) {
  if (a.height() != b.height() || a.width() != b.width() || a.channels() != b.channels()) {
    return std::numeric_limits<double>::infinity();
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  }
  return m;
}

double rel_diff(double a, double b) {
  if (a == b) return 0.0;
  return std::fabs(a - b) / std::max(std::fabs(a), std::fabs(b));
}

ModelBundle small_model(ModelVariant variant, EncodingConfig enc, std::uint64_t seed) {
  EncoderConfig e;
  e.blocks = 1;
  e.channels = 4;
  DecoderConfig d;
  d.hidden_layers = 2;
  d.hidden_width = 12;
  d.encoding = enc;
  return ModelBundle::create(variant, e, d, seed);
}

}  // namespace

Verdict sinc_series(int samples) {
  RandomStream rs(1, {});
  double err = 0.0;
  for (int i = 0; i < samples; ++i) {
    // Log-uniform magnitudes from 1e-9 to 4, random sign, plus exact zero.
    const double t = i == 0 ? 0.0 : (rs.uniform() < 0.5 ? -1 : 1) * std::pow(10.0, rs.uniform(-9, 0.6));
    err = std::max(err, std::fabs(sinc_stable(t) - oracle::taylor_sinc(t)));
  }
  return make("sinc vs Taylor series", err, 1e-12);
}

Verdict ipe_quadrature(int cases, long nodes, double tolerance) {
  RandomStream rs(2, {});
  double err = 0.0;
  for (int i = 0; i < cases; ++i) {
    const int bandwidth = random_int(rs, 1, 6);
    const Vec2 c{rs.uniform(-1.5, 1.5), rs.uniform(-1.5, 1.5)};
    const Vec2 r{rs.uniform(0.01, 1.0), rs.uniform(0.01, 1.0)};
    const auto code = ipe(PixelRegion{c, r}, bandwidth);
    const auto ref = oracle::midpoint_pe_separable(c.x, c.y, r.x, r.y, bandwidth, nodes);
    for (std::size_t k = 0; k < ref.size(); ++k) {
      err = std::max(err, std::fabs(code[k + 2] - ref[k]));
    }
  }
  return make("IPE vs midpoint quadrature of PE", err, tolerance,
              std::to_string(cases) + " cases");
}

Verdict ipe_limit(int centers, int bandwidth, double tolerance) {
  RandomStream rs(3, {});
  double err = 0.0;
  for (int i = 0; i < centers; ++i) {
    const Vec2 c{rs.uniform(-1.0, 1.0), rs.uniform(-1.0, 1.0)};
    const auto a = ipe(PixelRegion{c, {1e-8, 1e-8}}, bandwidth);
    const auto b = plain_pe(c, bandwidth);
    for (std::size_t k = 0; k < a.size(); ++k) err = std::max(err, std::fabs(a[k] - b[k]));
  }
  return make("IPE small-radius limit equals PE", err, tolerance);
}

Verdict partition_of_unity(int queries, double tolerance) {
  RandomStream rs(4, {});
  double err = 0.0;
  for (int i = 0; i < queries; ++i) {
    const CoordFrame f{random_int(rs, 1, 40), random_int(rs, 1, 40)};
    // A quarter of the queries land in the border band where clamping kicks in.
    const double span = i % 4 == 0 ? 1.0 : 1.0 - 1.0 / std::max(f.height, f.width);
    const Vec2 c{rs.uniform(-span, span), rs.uniform(-span, span)};
    const auto st = ensemble_stencil(c, {rs.uniform(0.01, 1.0), rs.uniform(0.01, 1.0)}, f);
    double sum = 0.0;
    for (double w : st.weights) sum += w;
    err = std::max(err, std::fabs(sum - 1.0));
  }
  return make("ensemble weights sum to one", err, tolerance, std::to_string(queries) + " queries");
}

Verdict gradients(int lr_size, double tolerance) {
  RandomStream rs(5, {});
  const Image lr = random_image(rs, lr_size, lr_size);
  QueryBatch q;
  for (int i = 0; i < 10; ++i) {
    const double s = rs.uniform(1.0, 4.0);
    q.centers.push_back({rs.uniform(-1.0, 1.0), rs.uniform(-1.0, 1.0)});
    q.radii.push_back({1.0 / s, 1.0 / s});
  }
  const EncodingConfig encodings[] = {
      {EncodingVariant::kNone, 0, false, false},
      {EncodingVariant::kCell, 0, false, false},
      {EncodingVariant::kPlainPe, 3, true, false},
      {EncodingVariant::kIpe, 3, true, false},
  };
  double worst = 0.0;
  std::string where;
  long checked = 0;
  for (auto variant : {ModelVariant::kLiif, ModelVariant::kMetaSr}) {
    for (const auto& enc : encodings) {
      const auto bundle = small_model(variant, enc, 17);
      const auto g = oracle::gradient_check(bundle, lr, q);
      checked += g.checked;
      if (g.max_rel_error >= worst) {
        worst = g.max_rel_error;
        where = std::string(to_string(variant)) + "/" + std::string(to_string(enc.variant)) +
                " " + g.worst;
      }
    }
  }
  auto v = make("finite-difference gradients", worst, tolerance,
                std::to_string(checked) + " parameters, worst at " + where);
  v.pass = worst < tolerance;
  return v;
}

Verdict metric_golden() {
  Image a(16, 16, 3, 0.5), b(16, 16, 3, 0.5 + 1.0 / 255.0);
  EvalProtocol rgb;
  rgb.shave = 0;
  const double p = psnr(a, b, rgb);
  RandomStream rs(6, {});
  const Image r = random_image(rs, 16, 16);
  const double s = ssim(r, r, rgb);
  const double y = to_luma(Image(1, 1, 3, 1.0)).at(0, 0, 0);
  Verdict v{"metric golden values", false, {}};
  v.pass = std::fabs(p - 48.1308) <= 1e-3 && s == 1.0 && std::fabs(y - 235.0 / 255.0) <= 1e-12;
  std::ostringstream os;
  os.precision(12);
  os << "psnr " << p << ", ssim(identical) " << s << ", Y(white)*255 " << y * 255.0;
  v.detail = os.str();
  return v;
}

Verdict bicubic_oracle(int trials) {
  RandomStream rs(7, {});
  double err = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Image img = random_image(rs, random_int(rs, 8, 16), random_int(rs, 8, 16));
    const int oh = random_int(rs, 4, 40), ow = random_int(rs, 4, 40);
    const bool aa = t % 2 == 0;
    err = std::max(err, max_abs_diff(bicubic_resize(img, oh, ow, aa),
                                     oracle::bicubic_resize(img, oh, ow, aa)));
  }
  return make("bicubic_resize vs direct 2-D loop", err, 1e-12);
}

Verdict psnr_oracle(int trials) {
  RandomStream rs(8, {});
  double err = 0.0;
  for (int t = 0; t < trials; ++t) {
    const int h = random_int(rs, 8, 16), w = random_int(rs, 8, 16);
    const Image a = random_image(rs, h, w), b = random_image(rs, h, w);
    EvalProtocol p;
    p.channel_mode = t % 2 ? ChannelMode::kY : ChannelMode::kRgb;
    p.shave = random_int(rs, 0, 2);
    err = std::max(err, rel_diff(psnr(a, b, p), oracle::psnr(a, b, p.shave, t % 2 == 1)));
  }
  return make("psnr vs loop reference (relative)", err, 1e-10);
}

Verdict ssim_oracle(int trials) {
  RandomStream rs(9, {});
  double err = 0.0;
  for (int t = 0; t < trials; ++t) {
    const int h = random_int(rs, 11, 16), w = random_int(rs, 11, 16);
    const Image a = random_image(rs, h, w);
    Image b = a;
    for (double& v : b.data()) v = std::clamp(v + rs.uniform(-0.2, 0.2), 0.0, 1.0);
    EvalProtocol p;
    p.channel_mode = t % 2 ? ChannelMode::kY : ChannelMode::kRgb;
    p.shave = 0;
    err = std::max(err, std::fabs(ssim(a, b, p) - oracle::ssim(a, b, 0, t % 2 == 1)));
  }
  return make("ssim vs full-window loop reference", err, 1e-10);
}

Verdict render_oracle(int trials) {
  RandomStream rs(10, {});
  double err = 0.0;
  const EncodingConfig ipe10{EncodingVariant::kIpe, 10, true, false};
  for (int t = 0; t < trials; ++t) {
    const Image lr = random_image(rs, random_int(rs, 8, 16), random_int(rs, 8, 16));
    const auto liif = small_model(ModelVariant::kLiif, ipe10, 100 + t);
    const int oh = random_int(rs, 8, 48), ow = random_int(rs, 8, 48);
    err = std::max(err, max_abs_diff(render(liif, lr, CoordFrame{oh, ow}),
                                     oracle::render(liif, lr, oh, ow)));
    const auto meta = small_model(ModelVariant::kMetaSr, ipe10, 200 + t);
    const double s = 1.0 + random_int(rs, 1, 4) * 0.5;
    err = std::max(err, max_abs_diff(meta_render(meta, lr, s), oracle::meta_render(meta, lr, s)));
  }
  return make("render and meta_render vs per-pixel loop", err, 1e-9);
}

}  // namespace ipesr::checks
