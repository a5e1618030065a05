// SPDX-License-Identifier: Apache-2.0
#include "ipesr/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ipesr/data.hpp"

namespace ipesr {
namespace {

constexpr Eigen::Index kRenderChunk = 2048;

Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& activation, const Matrix& dy) {
  return dy.cwiseProduct((activation.array() > 0.0).cast<double>().matrix());
}

// Meta-SR position along one axis: the LR cell floor(i/s) and offset
// i/s - floor(i/s), recovered from the output-pixel center and radius 1/s.
struct MetaAxis {
  int index;
  double offset;
};

MetaAxis meta_axis(double center, double radius, int n) {
  double u = (center + 1.0) * 0.5 * n - 0.5 * radius;
  const double nearest = std::round(u);
  if (std::abs(u - nearest) <= 1e-9 * std::max(1.0, std::abs(u))) u = nearest;
  const double base = std::floor(u);
  return MetaAxis{std::clamp(static_cast<int>(base), 0, n - 1), u - base};
}

void meta_vector_into(const EncodingConfig& config, Vec2 offset, Vec2 radius,
                      std::span<double> out) {
  if (config.variant == EncodingVariant::kNone) {
    out[0] = offset.x;
    out[1] = offset.y;
    out[2] = 0.5 * (radius.x + radius.y);
    if (config.append_cell) {
      out[3] = 2.0 * radius.x;
      out[4] = 2.0 * radius.y;
    }
    return;
  }
  encode_into(config, offset, radius, out);
}

struct Features {
  Encoder::Tape tape;
  Matrix unfolded;  // (H*W) x 9C
};

Features extract_features(const ModelBundle& bundle, const Image& lr, bool keep_tape) {
  Features f;
  const Matrix rgb = image_to_matrix(lr);
  LatentGrid grid{lr.frame(), bundle.encoder.forward(rgb, lr.frame(), keep_tape ? &f.tape : nullptr)};
  f.unfolded = unfold(grid).values;
  return f;
}

Matrix residual_for(const ModelBundle& bundle, const Image& lr, const QueryBatch& q,
                    Eigen::Index begin, Eigen::Index end) {
  Matrix res = Matrix::Zero(end - begin, 3);
  if (!bundle.decoder_config.global_residual) return res;
  for (Eigen::Index i = begin; i < end; ++i) {
    bicubic_sample(lr, q.centers[i], res.row(i - begin).data());
  }
  return res;
}

// Forward state for one chunk of queries, kept for backpropagation.
struct ChunkTape {
  Mlp::Tape mlp;
  Matrix decoder_out;
  std::vector<EnsembleStencil> stencils;  // LIIF
  std::vector<int> latent_rows;           // Meta-SR: one per query
};

Matrix liif_forward(const ModelBundle& bundle, const CoordFrame& frame, const Matrix& unfolded,
                    const QueryBatch& q, Eigen::Index begin, Eigen::Index end,
                    ChunkTape* tape) {
  const auto& enc = bundle.decoder_config.encoding;
  const auto n = end - begin;
  const auto feat_dim = unfolded.cols();
  const int enc_dim = enc.dimension();
  Matrix x(4 * n, feat_dim + enc_dim);
  std::vector<EnsembleStencil> stencils(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const EnsembleStencil st = ensemble_stencil(q.centers[begin + i], q.radii[begin + i], frame);
    for (int t = 0; t < 4; ++t) {
      const auto row = 4 * i + t;
      const auto latent = static_cast<Eigen::Index>(st.latent_indices[t].row) * frame.width +
                          st.latent_indices[t].col;
      x.row(row).head(feat_dim) = unfolded.row(latent);
      encode_into(enc, st.relative_coords[t], st.radii[t],
                  std::span<double>(x.row(row).data() + feat_dim, enc_dim));
    }
    stencils[i] = st;
  }
  Matrix y = bundle.decoder.forward(x, tape ? &tape->mlp : nullptr);
  Matrix pred(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& w = stencils[i].weights;
    pred.row(i) = w[0] * y.row(4 * i) + w[1] * y.row(4 * i + 1) + w[2] * y.row(4 * i + 2) +
                  w[3] * y.row(4 * i + 3);
  }
  if (tape) {
    tape->stencils = std::move(stencils);
    tape->decoder_out = std::move(y);
  }
  return pred;
}

void liif_backward(const ModelBundle& bundle, const CoordFrame& frame, const ChunkTape& tape,
                   const Matrix& dpred, Matrix& dunfolded, ModelBundle& grad) {
  const auto n = dpred.rows();
  Matrix dy(4 * n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int t = 0; t < 4; ++t) dy.row(4 * i + t) = tape.stencils[i].weights[t] * dpred.row(i);
  }
  Matrix dx;
  bundle.decoder.backward(tape.mlp, dy, grad.decoder, &dx);
  const auto feat_dim = dunfolded.cols();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int t = 0; t < 4; ++t) {
      const auto& li = tape.stencils[i].latent_indices[t];
      const auto latent = static_cast<Eigen::Index>(li.row) * frame.width + li.col;
      dunfolded.row(latent) += dx.row(4 * i + t).head(feat_dim);
    }
  }
}

Matrix meta_forward(const ModelBundle& bundle, const CoordFrame& frame, const Matrix& unfolded,
                    const QueryBatch& q, Eigen::Index begin, Eigen::Index end,
                    ChunkTape* tape) {
  const auto& enc = bundle.decoder_config.encoding;
  const auto n = end - begin;
  const int in_dim = meta_input_dim(enc);
  Matrix v(n, in_dim);
  std::vector<int> rows(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec2 c = q.centers[begin + i];
    const Vec2 r = q.radii[begin + i];
    const MetaAxis ax = meta_axis(c.x, r.x, frame.width);
    const MetaAxis ay = meta_axis(c.y, r.y, frame.height);
    rows[i] = ay.index * frame.width + ax.index;
    meta_vector_into(enc, Vec2{ax.offset, ay.offset}, r, std::span<double>(v.row(i).data(), in_dim));
  }
  Matrix filters = bundle.decoder.forward(v, tape ? &tape->mlp : nullptr);
  const auto feat_dim = unfolded.cols();
  Matrix pred = Matrix::Zero(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* u = unfolded.row(rows[i]).data();
    const double* f = filters.row(i).data();
    for (Eigen::Index k = 0; k < feat_dim; ++k) {
      for (int o = 0; o < 3; ++o) pred(i, o) += u[k] * f[3 * k + o];
    }
  }
  if (tape) {
    tape->latent_rows = std::move(rows);
    tape->decoder_out = std::move(filters);
  }
  return pred;
}

void meta_backward(const ModelBundle& bundle, const ChunkTape& tape, const Matrix& unfolded,
                   const Matrix& dpred, Matrix& dunfolded, ModelBundle& grad) {
  const auto n = dpred.rows();
  const auto feat_dim = unfolded.cols();
  Matrix dfilters(n, 3 * feat_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int row = tape.latent_rows[i];
    const double* u = unfolded.row(row).data();
    const double* f = tape.decoder_out.row(i).data();
    double* du = dunfolded.row(row).data();
    double* df = dfilters.row(i).data();
    for (Eigen::Index k = 0; k < feat_dim; ++k) {
      for (int o = 0; o < 3; ++o) {
        df[3 * k + o] = u[k] * dpred(i, o);
        du[k] += f[3 * k + o] * dpred(i, o);
      }
    }
  }
  bundle.decoder.backward(tape.mlp, dfilters, grad.decoder, nullptr);
}

Matrix forward_chunk(const ModelBundle& bundle, const CoordFrame& frame, const Matrix& unfolded,
                     const QueryBatch& q, Eigen::Index begin, Eigen::Index end,
                     ChunkTape* tape) {
  return bundle.variant == ModelVariant::kLiif
             ? liif_forward(bundle, frame, unfolded, q, begin, end, tape)
             : meta_forward(bundle, frame, unfolded, q, begin, end, tape);
}

Image assemble(const Matrix& pred, const CoordFrame& frame) {
  Image out(frame.height, frame.width, 3);
  std::copy(pred.data(), pred.data() + pred.size(), out.data().begin());
  out.clamp01();
  return out;
}

Matrix predict_all(const ModelBundle& bundle, const Image& lr, const QueryBatch& queries) {
  queries.validate();
  const Features f = extract_features(bundle, lr, false);
  const auto total = static_cast<Eigen::Index>(queries.size());
  Matrix pred(total, 3);
  for (Eigen::Index begin = 0; begin < total; begin += kRenderChunk) {
    const Eigen::Index end = std::min(total, begin + kRenderChunk);
    pred.middleRows(begin, end - begin) =
        forward_chunk(bundle, lr.frame(), f.unfolded, queries, begin, end, nullptr) +
        residual_for(bundle, lr, queries, begin, end);
  }
  return pred;
}

}  // namespace

std::string_view to_string(ModelVariant v) {
  return v == ModelVariant::kLiif ? "liif" : "metasr";
}

ModelVariant parse_model_variant(std::string_view name) {
  if (name == "liif") return ModelVariant::kLiif;
  if (name == "metasr") return ModelVariant::kMetaSr;
  throw ValidationError("unknown model variant '" + std::string(name) +
                        "' (expected liif or metasr)");
}

void EncoderConfig::validate() const {
  if (blocks < 0) throw ValidationError("encoder.blocks must be >= 0");
  if (channels < 1) throw ValidationError("encoder.channels must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ValidationError("encoder.kernel_size must be a positive odd integer");
  }
}

void DecoderConfig::validate() const {
  if (hidden_layers < 1) throw ValidationError("decoder.hidden_layers must be >= 1");
  if (hidden_width < 1) throw ValidationError("decoder.hidden_width must be >= 1");
  encoding.validate();
}

// ---------------------------------------------------------------------------

Encoder Encoder::create(const EncoderConfig& config, RandomStream& rs) {
  config.validate();
  Encoder e;
  e.config = config;
  const int c = config.channels, k = config.kernel_size;
  e.head = Conv2d::create(3, c, k, rs);
  for (int b = 0; b < config.blocks; ++b) {
    e.blocks.push_back({Conv2d::create(c, c, k, rs), Conv2d::create(c, c, k, rs)});
  }
  if (config.blocks > 0) e.tail = Conv2d::create(c, c, k, rs);
  return e;
}

Encoder Encoder::zeros_like() const {
  Encoder e;
  e.config = config;
  e.head = head.zeros_like();
  for (const auto& b : blocks) e.blocks.push_back({b[0].zeros_like(), b[1].zeros_like()});
  if (!blocks.empty()) e.tail = tail.zeros_like();
  return e;
}

Matrix Encoder::forward(const Matrix& rgb, const CoordFrame& frame, Tape* tape) const {
  Matrix h0 = head.forward(rgb, frame);
  if (tape) {
    tape->frame = frame;
    tape->input = rgb;
    tape->block_in.clear();
    tape->block_mid.clear();
  }
  if (blocks.empty()) return h0;
  Matrix r = h0;
  for (const auto& block : blocks) {
    Matrix mid = relu(block[0].forward(r, frame));
    Matrix next = r + block[1].forward(mid, frame);
    if (tape) {
      tape->block_in.push_back(std::move(r));
      tape->block_mid.push_back(std::move(mid));
    }
    r = std::move(next);
  }
  Matrix out = tail.forward(r, frame) + h0;
  if (tape) {
    tape->tail_in = std::move(r);
    tape->head_out = std::move(h0);
  }
  return out;
}

void Encoder::backward(const Tape& tape, const Matrix& dout, Encoder& grad) const {
  const CoordFrame& frame = tape.frame;
  Matrix dh0 = dout;
  if (!blocks.empty()) {
    Matrix dr = tail.backward(tape.tail_in, frame, dout, grad.tail);
    for (std::size_t b = blocks.size(); b-- > 0;) {
      const Matrix dmid = blocks[b][1].backward(tape.block_mid[b], frame, dr, grad.blocks[b][1]);
      const Matrix dpre = relu_backward(tape.block_mid[b], dmid);
      dr += blocks[b][0].backward(tape.block_in[b], frame, dpre, grad.blocks[b][0]);
    }
    dh0 += dr;
  }
  head.backward(tape.input, frame, dh0, grad.head);
}

void Encoder::visit(const std::string& prefix, const ParamVisitor& f) {
  head.visit(prefix + ".head", f);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    blocks[b][0].visit(prefix + ".block" + std::to_string(b) + ".conv0", f);
    blocks[b][1].visit(prefix + ".block" + std::to_string(b) + ".conv1", f);
  }
  if (!blocks.empty()) tail.visit(prefix + ".tail", f);
}

void Encoder::visit(const std::string& prefix, const ConstParamVisitor& f) const {
  head.visit(prefix + ".head", f);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    blocks[b][0].visit(prefix + ".block" + std::to_string(b) + ".conv0", f);
    blocks[b][1].visit(prefix + ".block" + std::to_string(b) + ".conv1", f);
  }
  if (!blocks.empty()) tail.visit(prefix + ".tail", f);
}

// ---------------------------------------------------------------------------

int meta_input_dim(const EncodingConfig& config) {
  if (config.variant == EncodingVariant::kNone) return config.append_cell ? 5 : 3;
  return config.dimension();
}

ModelBundle ModelBundle::create(ModelVariant variant, const EncoderConfig& encoder_config,
                                const DecoderConfig& decoder_config, std::uint64_t seed) {
  encoder_config.validate();
  decoder_config.validate();
  ModelBundle b;
  b.variant = variant;
  b.encoder_config = encoder_config;
  b.decoder_config = decoder_config;
  RandomStream rs(seed, {stream_tag::kInit});
  b.encoder = Encoder::create(encoder_config, rs);
  b.decoder = Mlp::create(b.decoder_input_dim(), decoder_config.hidden_layers,
                          decoder_config.hidden_width, b.decoder_output_dim(),
                          decoder_config.skip_connections, rs);
  if (decoder_config.zero_init_head) {
    b.decoder.output.weight.setZero();
    b.decoder.output.bias.setZero();
  }
  return b;
}

ModelBundle ModelBundle::zeros_like() const {
  ModelBundle b;
  b.variant = variant;
  b.encoder_config = encoder_config;
  b.decoder_config = decoder_config;
  b.encoder = encoder.zeros_like();
  b.decoder = decoder.zeros_like();
  b.format_version = format_version;
  return b;
}

int ModelBundle::decoder_input_dim() const {
  if (variant == ModelVariant::kLiif) {
    return 9 * encoder_config.channels + decoder_config.encoding.dimension();
  }
  return meta_input_dim(decoder_config.encoding);
}

int ModelBundle::decoder_output_dim() const {
  return variant == ModelVariant::kLiif ? 3 : 27 * encoder_config.channels;
}

void ModelBundle::visit_parameters(const ParamVisitor& f) {
  encoder.visit("encoder", f);
  decoder.visit("decoder", f);
}

void ModelBundle::visit_parameters(const ConstParamVisitor& f) const {
  encoder.visit("encoder", f);
  decoder.visit("decoder", f);
}

std::size_t ModelBundle::parameter_count() const {
  std::size_t n = 0;
  visit_parameters([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

// ---------------------------------------------------------------------------

Matrix image_to_matrix(const Image& image) {
  if (image.empty()) throw std::invalid_argument("empty image");
  if (image.channels() != 3) throw std::invalid_argument("expected an RGB image");
  if (!image.all_finite()) throw std::invalid_argument("image contains non-finite values");
  Matrix m(image.frame().size(), 3);
  std::copy(image.data().begin(), image.data().end(), m.data());
  return m;
}

LatentGrid encode(const ModelBundle& bundle, const Image& image) {
  return LatentGrid{image.frame(), bundle.encoder.forward(image_to_matrix(image), image.frame())};
}

LatentGrid unfold(const LatentGrid& grid) {
  const int h = grid.frame.height, w = grid.frame.width;
  const auto c = grid.values.cols();
  LatentGrid out{grid.frame, Matrix::Zero(grid.values.rows(), 9 * c)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto p = static_cast<Eigen::Index>(y) * w + x;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int ny = y + dy, nx = x + dx;
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const int block = (dy + 1) * 3 + (dx + 1);
          out.values.row(p).segment(block * c, c) =
              grid.values.row(static_cast<Eigen::Index>(ny) * w + nx);
        }
      }
    }
  }
  return out;
}

Matrix fold_gradient(const Matrix& dunfolded, const CoordFrame& frame, int channels) {
  const int h = frame.height, w = frame.width;
  Matrix d = Matrix::Zero(dunfolded.rows(), channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto p = static_cast<Eigen::Index>(y) * w + x;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int ny = y + dy, nx = x + dx;
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const int block = (dy + 1) * 3 + (dx + 1);
          d.row(static_cast<Eigen::Index>(ny) * w + nx) +=
              dunfolded.row(p).segment(block * channels, channels);
        }
      }
    }
  }
  return d;
}

std::array<double, 3> decode(const Mlp& decoder, std::span<const double> latent,
                             const EncodingVector& encoding, const DecoderConfig& config) {
  if (!(encoding.config == config.encoding)) {
    throw std::invalid_argument("decode: encoding does not match the decoder configuration");
  }
  const auto in = static_cast<Eigen::Index>(latent.size() + encoding.size());
  if (in != decoder.in_dim) {
    throw std::invalid_argument("decode: input width " + std::to_string(in) +
                                " does not match decoder width " + std::to_string(decoder.in_dim));
  }
  if (decoder.output.out_dim() != 3) throw std::invalid_argument("decode: decoder is not RGB");
  Matrix x(1, in);
  std::copy(latent.begin(), latent.end(), x.data());
  std::copy(encoding.values.begin(), encoding.values.end(), x.data() + latent.size());
  const Matrix y = decoder.forward(x);
  return {y(0, 0), y(0, 1), y(0, 2)};
}

EncodingVector meta_input(double i, double j, double s, const EncodingConfig& config) {
  if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("meta_input: scale must be > 0");
  if (i < 0 || j < 0) throw std::invalid_argument("meta_input: pixel indices must be >= 0");
  config.validate();
  const Vec2 offset{i / s - std::floor(i / s), j / s - std::floor(j / s)};
  const Vec2 radius{1.0 / s, 1.0 / s};
  EncodingVector out{std::vector<double>(meta_input_dim(config)), config};
  meta_vector_into(config, offset, radius, out.values);
  return out;
}

EncodingVector meta_input(double i, double j, double s, bool use_ipe, int bandwidth) {
  EncodingConfig config;
  config.variant = use_ipe ? EncodingVariant::kIpe : EncodingVariant::kNone;
  config.bandwidth = use_ipe ? bandwidth : 1;
  return meta_input(i, j, s, config);
}

Matrix predict_queries(const ModelBundle& bundle, const Image& lr, const QueryBatch& queries) {
  return predict_all(bundle, lr, queries);
}

Matrix predict_queries_with_grad(const ModelBundle& bundle, const Image& lr,
                                 const QueryBatch& queries, const LossGradFn& loss_grad,
                                 ModelBundle& grad) {
  queries.validate();
  const Features f = extract_features(bundle, lr, true);
  const auto total = static_cast<Eigen::Index>(queries.size());
  ChunkTape tape;
  Matrix pred = forward_chunk(bundle, lr.frame(), f.unfolded, queries, 0, total, &tape) +
                residual_for(bundle, lr, queries, 0, total);
  const Matrix dpred = loss_grad(pred);
  if (dpred.rows() != pred.rows() || dpred.cols() != 3) {
    throw std::invalid_argument("loss gradient has the wrong shape");
  }
  Matrix dunfolded = Matrix::Zero(f.unfolded.rows(), f.unfolded.cols());
  if (bundle.variant == ModelVariant::kLiif) {
    liif_backward(bundle, lr.frame(), tape, dpred, dunfolded, grad);
  } else {
    meta_backward(bundle, tape, f.unfolded, dpred, dunfolded, grad);
  }
  const Matrix dlatent = fold_gradient(dunfolded, lr.frame(), bundle.encoder_config.channels);
  bundle.encoder.backward(f.tape, dlatent, grad.encoder);
  return pred;
}

Image render(const ModelBundle& bundle, const Image& lr, const CoordFrame& out_frame) {
  if (bundle.variant != ModelVariant::kLiif) {
    throw std::invalid_argument("render: bundle is not a LIIF model");
  }
  out_frame.validate();
  return assemble(predict_all(bundle, lr, render_grid(lr.frame(), out_frame)), out_frame);
}

CoordFrame scaled_frame(const CoordFrame& lr, double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("scale must be > 0");
  return CoordFrame{std::max(1, static_cast<int>(std::lround(s * lr.height))),
                    std::max(1, static_cast<int>(std::lround(s * lr.width)))};
}

Image meta_render(const ModelBundle& bundle, const Image& lr, const CoordFrame& out_frame) {
  if (bundle.variant != ModelVariant::kMetaSr) {
    throw std::invalid_argument("meta_render: bundle is not a Meta-SR model");
  }
  out_frame.validate();
  return assemble(predict_all(bundle, lr, render_grid(lr.frame(), out_frame)), out_frame);
}

Image meta_render(const ModelBundle& bundle, const Image& lr, double s) {
  return meta_render(bundle, lr, scaled_frame(lr.frame(), s));
}

Image super_resolve(const ModelBundle& bundle, const Image& lr, const CoordFrame& out_frame) {
  return bundle.variant == ModelVariant::kLiif ? render(bundle, lr, out_frame)
                                               : meta_render(bundle, lr, out_frame);
}

}  // namespace ipesr
