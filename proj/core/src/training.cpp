// SPDX-License-Identifier: Apache-2.0
#include "ipesr/training.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "ipesr/checkpoint.hpp"
#include "ipesr/config_io.hpp"
#include "ipesr/types.hpp"

namespace ipesr {
namespace {

// Static round-robin partition; every index writes only its own slot, so the
// outcome is independent of the worker count.
template <typename F>
void parallel_for(int n, int workers, F&& f) {
  workers = std::clamp(workers, 1, std::max(1, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += workers) f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<Matrix*> parameters(ModelBundle& b) {
  std::vector<Matrix*> out;
  b.visit_parameters([&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

std::vector<const Matrix*> parameters(const ModelBundle& b) {
  std::vector<const Matrix*> out;
  b.visit_parameters([&](const std::string&, const Matrix& m) { out.push_back(&m); });
  return out;
}

void accumulate(ModelBundle& dst, const ModelBundle& src) {
  auto d = parameters(dst);
  auto s = parameters(src);
  for (std::size_t i = 0; i < d.size(); ++i) *d[i] += *s[i];
}

bool all_finite(const ModelBundle& b) {
  for (const Matrix* m : parameters(b)) {
    if (!m->allFinite()) return false;
  }
  return true;
}

double scale_for_best(const std::vector<double>& scales) {
  for (double s : scales) {
    if (s == 4.0) return s;
  }
  return scales.front();
}

Json scores_json(const std::vector<ScaleScore>& scores) {
  Json a = Json::array();
  for (const auto& s : scores) {
    a.push_back(Json{{"scale", s.scale},
                     {"psnr", std::isfinite(s.psnr) ? Json(s.psnr) : Json("inf")},
                     {"ssim", s.ssim}});
  }
  return a;
}

// Keeps only the records of epochs that finished before `epoch`, so a resumed
// run appends to a log identical to the uninterrupted one.
std::vector<std::string> truncate_log(const std::filesystem::path& path, int epoch) {
  std::vector<std::string> kept;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("epoch")) continue;
    if (j["epoch"].get<int>() < epoch) kept.push_back(line);
  }
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : kept) out << l << '\n';
  return kept;
}

}  // namespace

std::string_view to_string(Preset p) { return p == Preset::kPaper ? "paper" : "desk"; }

Preset parse_preset(std::string_view name) {
  if (name == "paper") return Preset::kPaper;
  if (name == "desk") return Preset::kDesk;
  throw ValidationError("unknown preset '" + std::string(name) + "' (expected paper or desk)");
}

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.preset = Preset::kPaper;
  c.epochs = 1000;
  c.iters_per_epoch = 1000;
  c.batch_size = 16;
  c.lr0 = 1e-4;
  c.lr_halve_every = 200;
  return c;
}

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.preset = Preset::kDesk;
  c.epochs = 20;
  c.iters_per_epoch = 100;
  c.batch_size = 8;
  // 1e-4 barely moves a small net in 2000 Adam steps.
  c.lr0 = 1e-3;
  c.lr_halve_every = 8;
  return c;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("train.epochs must be >= 1");
  if (iters_per_epoch < 1) throw ValidationError("train.iters_per_epoch must be >= 1");
  if (batch_size < 1) throw ValidationError("train.batch_size must be >= 1");
  if (!(lr0 >= 0.0) || !std::isfinite(lr0)) throw ValidationError("train.lr0 must be >= 0");
  if (lr_halve_every < 1) throw ValidationError("train.lr_halve_every must be >= 1");
  if (loss != "l1") throw ValidationError("train.loss must be \"l1\"");
  if (!(grad_clip >= 0.0)) throw ValidationError("train.grad_clip must be >= 0");
  for (double s : val_scales) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("train.val_scales must be > 0");
  }
  if (workers < 1) throw ValidationError("train.workers must be >= 1");
}

double learning_rate(const TrainConfig& config, int epoch) {
  return std::ldexp(config.lr0, -(epoch / config.lr_halve_every));
}

void adam_update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, std::int64_t step,
                 double lr, const AdamConfig& c) {
  m = c.beta1 * m + (1.0 - c.beta1) * grad;
  v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
}

void adam_step(ModelBundle& bundle, const ModelBundle& grad, AdamState& state, double lr,
               const AdamConfig& config) {
  auto p = parameters(bundle);
  auto g = parameters(grad);
  if (state.m.empty()) {
    for (const Matrix* x : p) {
      state.m.push_back(Matrix::Zero(x->rows(), x->cols()));
      state.v.push_back(Matrix::Zero(x->rows(), x->cols()));
    }
  }
  ++state.step;
  for (std::size_t i = 0; i < p.size(); ++i) {
    adam_update(*p[i], *g[i], state.m[i], state.v[i], state.step, lr, config);
  }
}

// ---------------------------------------------------------------------------

Renderer bicubic_renderer() {
  return [](const Image& lr, const CoordFrame& out) {
    return bicubic_resize(lr, out.height, out.width, true);
  };
}

Renderer model_renderer(const ModelBundle& bundle) {
  return [&bundle](const Image& lr, const CoordFrame& out) {
    return super_resolve(bundle, lr, out);
  };
}

Image make_eval_input(const Image& hr, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("scale must be > 0");
  const int h = std::max(1, static_cast<int>(std::lround(hr.height() / scale)));
  const int w = std::max(1, static_cast<int>(std::lround(hr.width() / scale)));
  return bicubic_resize(hr, h, w, true);
}

EvalTable evaluate(const Renderer& renderer, const Dataset& dataset,
                   const std::vector<double>& scales, const EvalProtocol& protocol, int workers) {
  protocol.validate();
  for (double s : scales) {
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("scales must be > 0");
  }
  EvalTable t;
  t.scales = scales;
  t.per_image.assign(dataset.size(), std::vector<ScaleScore>(scales.size()));
  parallel_for(static_cast<int>(dataset.size()), workers, [&](int i) {
    const Image& hr = dataset.images[i];
    for (std::size_t k = 0; k < scales.size(); ++k) {
      const Image sr = renderer(make_eval_input(hr, scales[k]), hr.frame());
      t.per_image[i][k] = {scales[k], psnr(sr, hr, protocol, scales[k]),
                           ssim(sr, hr, protocol, scales[k])};
    }
  });
  for (std::size_t k = 0; k < scales.size(); ++k) {
    ScaleScore m{scales[k], 0.0, 0.0};
    for (const auto& row : t.per_image) {
      m.psnr += row[k].psnr;
      m.ssim += row[k].ssim;
    }
    if (!t.per_image.empty()) {
      m.psnr /= static_cast<double>(t.per_image.size());
      m.ssim /= static_cast<double>(t.per_image.size());
    }
    t.mean.push_back(m);
  }
  return t;
}

EvalTable evaluate(const ModelBundle& bundle, const Dataset& dataset,
                   const std::vector<double>& scales, const EvalProtocol& protocol, int workers) {
  return evaluate(model_renderer(bundle), dataset, scales, protocol, workers);
}

// ---------------------------------------------------------------------------

double batch_loss_and_grad(const ModelBundle& bundle, const std::vector<TrainingSample>& batch,
                           ModelBundle& grad, int workers) {
  std::size_t count = 0;
  for (const auto& item : batch) count += item.queries.size() * 3;
  if (count == 0) throw std::invalid_argument("batch has no queries");
  const double inv = 1.0 / static_cast<double>(count);

  const int n = static_cast<int>(batch.size());
  std::vector<double> losses(batch.size(), 0.0);
  std::vector<ModelBundle> grads(batch.size());
  parallel_for(n, workers, [&](int i) {
    const TrainingSample& item = batch[i];
    grads[i] = bundle.zeros_like();
    predict_queries_with_grad(
        bundle, item.lr, item.queries,
        [&](const Matrix& pred) {
          Matrix d(pred.rows(), 3);
          double sum = 0.0;
          for (Eigen::Index q = 0; q < pred.rows(); ++q) {
            for (int c = 0; c < 3; ++c) {
              const double diff = pred(q, c) - item.queries.targets[q][c];
              sum += std::abs(diff);
              d(q, c) = diff > 0.0 ? inv : (diff < 0.0 ? -inv : 0.0);
            }
          }
          losses[i] = sum;
          return d;
        },
        grads[i]);
  });
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    loss += losses[i];
    accumulate(grad, grads[i]);
  }
  return loss * inv;
}

TrainResult train(ModelBundle bundle, const Dataset& dataset, const TrainConfig& config,
                  const SampleSpec& spec_in, const TrainOptions& options) {
  config.validate();
  SampleSpec spec = spec_in;
  spec.seed = config.seed;
  spec.validate_against(dataset);
  options.protocol.validate();

  const bool persist = !options.out_dir.empty();
  const auto last_path = options.out_dir / "last.ipesr";
  const auto state_path = options.out_dir / "state.bin";
  const auto log_path = options.out_dir / "log.jsonl";

  TrainResult result;
  TrainState& state = result.state;
  if (options.resume) {
    if (!persist) throw std::invalid_argument("resume requires an output directory");
    if (!std::filesystem::exists(last_path) || !std::filesystem::exists(state_path)) {
      throw std::runtime_error("nothing to resume in " + options.out_dir.string());
    }
    bundle = load_bundle(last_path);
    state = load_train_state(state_path, bundle);
    result.log = truncate_log(log_path, state.epoch);
  } else if (persist) {
    std::filesystem::create_directories(options.out_dir);
    std::ofstream(log_path, std::ios::trunc);
  }

  std::ofstream log_file;
  if (persist) log_file.open(log_path, std::ios::app);
  auto emit = [&](const Json& record) {
    const std::string line = record.dump();
    result.log.push_back(line);
    if (log_file) log_file << line << '\n' << std::flush;
    if (options.on_log) options.on_log(line);
  };

  const bool validate_epochs = options.validation != nullptr && !config.val_scales.empty() &&
                               options.validation->size() > 0;
  if (validate_epochs) state.best.scale = scale_for_best(config.val_scales);

  int ran = 0;
  for (int epoch = state.epoch; epoch < config.epochs; ++epoch) {
    if (options.stop_after_epochs >= 0 && ran >= options.stop_after_epochs) break;
    const double lr = learning_rate(config, epoch);
    double epoch_loss = 0.0;
    for (int it = 0; it < config.iters_per_epoch; ++it) {
      const auto batch = sample_batch(dataset, spec, static_cast<std::uint64_t>(epoch),
                                      static_cast<std::uint64_t>(it), config.batch_size);
      ModelBundle grad = bundle.zeros_like();
      const double loss = batch_loss_and_grad(bundle, batch, grad, config.workers);
      if (!std::isfinite(loss) || !all_finite(grad)) {
        if (persist) {
          save_bundle(options.out_dir / "diverged.ipesr", bundle);
          std::ofstream(options.out_dir / "diverged.json")
              << Json{{"epoch", epoch}, {"iter", it}, {"step", state.step},
                      {"lr", lr}, {"loss", std::isfinite(loss) ? Json(loss) : Json("nan")}}
                     .dump(2)
              << '\n';
        }
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) +
                               ", iteration " + std::to_string(it) +
                               (persist ? "; snapshot written to " +
                                              (options.out_dir / "diverged.ipesr").string()
                                        : std::string()));
      }
      if (config.grad_clip > 0.0) {
        double sq = 0.0;
        for (const Matrix* g : parameters(grad)) sq += g->squaredNorm();
        const double norm = std::sqrt(sq);
        if (norm > config.grad_clip) {
          for (Matrix* g : parameters(grad)) *g *= config.grad_clip / norm;
        }
      }
      adam_step(bundle, grad, state.adam, lr);
      ++state.step;
      epoch_loss += loss;
      result.step_losses.push_back(loss);
      emit(Json{{"type", "step"}, {"epoch", epoch}, {"iter", it}, {"step", state.step},
                {"lr", lr}, {"loss", loss}});
    }

    Json record{{"type", "epoch"}, {"epoch", epoch}, {"step", state.step}, {"lr", lr},
                {"train_loss", epoch_loss / config.iters_per_epoch}};
    bool improved = false;
    if (validate_epochs) {
      const EvalTable table =
          evaluate(bundle, *options.validation, config.val_scales, options.protocol,
                   config.workers);
      record["val"] = scores_json(table.mean);
      for (const auto& s : table.mean) {
        if (s.scale == state.best.scale && s.psnr > state.best.psnr) {
          state.best.psnr = s.psnr;
          state.best.epoch = epoch;
          improved = true;
        }
      }
      record["best_epoch"] = state.best.epoch;
    }
    emit(record);
    state.epoch = epoch + 1;
    ++ran;
    if (persist) {
      if (options.save_epoch_checkpoints) {
        std::ostringstream name;
        name << "epoch_" << std::setw(4) << std::setfill('0') << epoch << ".ipesr";
        save_bundle(options.out_dir / "checkpoints" / name.str(), bundle);
      }
      if (improved) save_bundle(options.out_dir / "best.ipesr", bundle);
      save_bundle(last_path, bundle);
      save_train_state(state_path, state);
    }
  }
  result.bundle = std::move(bundle);
  return result;
}

// ---------------------------------------------------------------------------

std::vector<AblationEntry> default_ablation_matrix(const DecoderConfig& base) {
  auto with = [&](const std::string& name, EncodingVariant v, int L, bool skip) {
    AblationEntry e;
    e.name = name;
    e.decoder = base;
    e.decoder.encoding.variant = v;
    e.decoder.encoding.bandwidth = L;
    e.decoder.encoding.append_cell = false;
    e.decoder.skip_connections = skip;
    return e;
  };
  auto plus_cell = with("ipe L=10 +cell", EncodingVariant::kIpe, 10, true);
  plus_cell.decoder.encoding.append_cell = true;
  // The bicubic residual is our addition, so its effect gets a row too.
  auto no_residual = with("ipe L=10 no-residual", EncodingVariant::kIpe, 10, true);
  no_residual.decoder.global_residual = false;
  return {
      with("ipe L=4", EncodingVariant::kIpe, 4, true),
      with("ipe L=10", EncodingVariant::kIpe, 10, true),
      with("ipe L=16", EncodingVariant::kIpe, 16, true),
      with("plain_pe L=10", EncodingVariant::kPlainPe, 10, true),
      plus_cell,
      with("cell", EncodingVariant::kCell, base.encoding.bandwidth, true),
      with("none", EncodingVariant::kNone, base.encoding.bandwidth, true),
      with("ipe L=10 no-skip", EncodingVariant::kIpe, 10, false),
      no_residual,
  };
}

AblationReport ablate(const std::vector<AblationEntry>& matrix, const AblationSetup& setup,
                      const Dataset& train_set, const Dataset& eval_set,
                      const std::function<void(const std::string&)>& progress) {
  if (matrix.empty()) throw ValidationError("ablation matrix is empty");
  for (const auto& e : matrix) e.decoder.validate();
  setup.encoder.validate();
  setup.train.validate();

  AblationReport report;
  report.scales = setup.scales;
  {
    const auto t0 = std::chrono::steady_clock::now();
    const EvalTable t =
        evaluate(bicubic_renderer(), eval_set, setup.scales, setup.protocol, setup.train.workers);
    report.rows.push_back(
        {"bicubic", t.mean,
         std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
  }
  for (const auto& entry : matrix) {
    if (progress) progress("training " + entry.name);
    const auto t0 = std::chrono::steady_clock::now();
    ModelBundle bundle =
        ModelBundle::create(entry.variant, setup.encoder, entry.decoder, setup.train.seed);
    TrainOptions opts;
    opts.protocol = setup.protocol;
    opts.save_epoch_checkpoints = false;
    if (!setup.out_dir.empty()) {
      std::string dir = entry.name;
      for (char& c : dir) {
        if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
      }
      opts.out_dir = setup.out_dir / dir;
    }
    TrainResult r = train(std::move(bundle), train_set, setup.train, setup.sample, opts);
    const EvalTable t =
        evaluate(r.bundle, eval_set, setup.scales, setup.protocol, setup.train.workers);
    report.rows.push_back(
        {entry.name, t.mean,
         std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
    if (progress) {
      std::ostringstream os;
      os << entry.name << ":";
      for (const auto& s : t.mean) {
        std::ostringstream db;  // keeps std::fixed off the scale labels
        db << std::fixed << std::setprecision(2) << s.psnr;
        os << " x" << s.scale << "=" << db.str();
      }
      progress(os.str());
    }
  }
  return report;
}

std::string AblationReport::to_markdown() const {
  std::ostringstream os;
  os << "| variant |";
  for (double s : scales) os << " x" << s << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < scales.size(); ++i) os << "---|";
  os << '\n';
  os << std::fixed << std::setprecision(2);
  for (const auto& row : rows) {
    os << "| " << row.name << " |";
    for (const auto& s : row.scores) os << ' ' << s.psnr << " |";
    os << '\n';
  }
  return os.str();
}

std::string AblationReport::to_json() const {
  Json j{{"scales", scales}, {"rows", Json::array()}};
  for (const auto& row : rows) {
    j["rows"].push_back(Json{{"name", row.name}, {"scores", scores_json(row.scores)},
                             {"seconds", row.seconds}});
  }
  return j.dump(2);
}

}  // namespace ipesr
