// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "ipesr/checkpoint.hpp"
#include "ipesr/data.hpp"
#include "ipesr/metrics.hpp"
#include "ipesr/training.hpp"
#include "ipesr/types.hpp"
#include "run_config.hpp"

namespace ipesr {
namespace {

// Options shared by every command that reads a RunConfig.
struct ConfigFlags {
  std::string file;
  std::string preset;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", file, "JSON config file");
    cmd->add_option("--preset", preset, "desk or paper");
    cmd->add_option("--set", sets, "override, e.g. --set train.epochs=5")->take_all();
    cmd->add_option("--seed", seed, "random seed (overrides train.seed)");
  }

  [[nodiscard]] RunConfig resolve(const std::vector<std::string>& extra = {}) const {
    ConfigSources s;
    if (!file.empty()) s.file = file;
    if (!preset.empty()) s.preset = preset;
    s.sets = sets;
    s.sets.insert(s.sets.end(), extra.begin(), extra.end());
    s.seed = seed;
    return resolve_config(s);
  }
};

void require(bool present, const std::string& key) {
  if (!present) throw ValidationError("missing required config key " + key);
}

std::string fmt(double v, int precision = 4) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

std::string scale_label(double s) {
  std::ostringstream os;
  os << s;
  return os.str();
}

Json score_json(const ScaleScore& s) {
  return Json{{"scale", s.scale},
              {"psnr", std::isfinite(s.psnr) ? Json(s.psnr) : Json("inf")},
              {"ssim", s.ssim}};
}

std::string quote_path(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

// ---------------------------------------------------------------------------

int cmd_train(const ConfigFlags& flags, const std::string& train_dir, const std::string& val_dir,
              const std::string& out_dir, bool resume, int workers, std::ostream& out) {
  std::vector<std::string> extra;
  if (!train_dir.empty()) extra.push_back("data.train_dir=\"" + train_dir + "\"");
  if (!val_dir.empty()) extra.push_back("data.val_dir=\"" + val_dir + "\"");
  if (!out_dir.empty()) extra.push_back("output_dir=\"" + out_dir + "\"");
  if (workers > 0) extra.push_back("train.workers=" + std::to_string(workers));
  const RunConfig config = flags.resolve(extra);
  require(!config.train_dir.empty(), "data.train_dir");
  require(!config.output_dir.empty(), "output_dir");
  if (!std::filesystem::is_directory(config.train_dir)) {
    throw ValidationError("data.train_dir " + quote_path(config.train_dir) +
                          " is not a directory");
  }

  const Dataset train_set = Dataset::load(config.train_dir, "train");
  config.sample.validate_against(train_set);
  std::optional<Dataset> val_set;
  if (!config.val_dir.empty()) val_set = Dataset::load(config.val_dir, "val");

  std::filesystem::create_directories(config.output_dir);
  std::ofstream(config.output_dir / "config.json") << config.to_json().dump(2) << '\n';

  ModelBundle bundle =
      ModelBundle::create(config.variant, config.encoder, config.decoder, config.train.seed);
  out << "training " << to_string(config.variant) << " ("
      << to_string(config.decoder.encoding.variant) << ", L="
      << config.decoder.encoding.bandwidth << ") with " << bundle.parameter_count()
      << " parameters on " << train_set.size() << " images\n";

  TrainOptions opts;
  opts.out_dir = config.output_dir;
  opts.validation = val_set ? &*val_set : nullptr;
  opts.protocol = config.eval;
  opts.resume = resume;
  opts.on_log = [&out](const std::string& line) {
    const Json j = Json::parse(line);
    if (j["type"] != "epoch") return;
    out << "epoch " << j["epoch"].get<int>() << " step " << j["step"].get<long>() << " lr "
        << j["lr"].get<double>() << " loss " << fmt(j["train_loss"].get<double>(), 5);
    if (j.contains("val")) {
      for (const auto& v : j["val"]) {
        out << " x" << scale_label(v["scale"].get<double>()) << "="
            << (v["psnr"].is_number() ? fmt(v["psnr"].get<double>(), 2) : "inf");
      }
    }
    out << '\n' << std::flush;
  };
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult r = train(std::move(bundle), train_set, config.train, config.sample, opts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out << "finished " << r.state.step << " steps in " << fmt(secs, 1) << " s; checkpoint "
      << (config.output_dir / "last.ipesr").string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_eval(const ConfigFlags& flags, const std::string& checkpoint, const std::string& data,
             const std::vector<double>& scales, const std::string& protocol, int shave,
             const std::string& table_path, const std::string& dump_dir, int workers,
             std::ostream& out) {
  std::vector<std::string> extra;
  if (!protocol.empty()) extra.push_back("eval.channel_mode=\"" + protocol + "\"");
  if (shave >= -1 && shave != -2) extra.push_back("eval.shave=" + std::to_string(shave));
  if (!data.empty()) extra.push_back("data.val_dir=\"" + data + "\"");
  RunConfig config = flags.resolve(extra);
  if (!scales.empty()) config.eval_scales = scales;
  config.validate();
  require(!config.val_dir.empty(), "data.val_dir");
  const ModelBundle bundle = load_bundle(checkpoint);
  const Dataset ds = Dataset::load(config.val_dir, "val");
  const int w = workers > 0 ? workers : config.train.workers;

  const EvalTable model = evaluate(bundle, ds, config.eval_scales, config.eval, w);
  const EvalTable bicubic = evaluate(bicubic_renderer(), ds, config.eval_scales, config.eval, w);

  out << "protocol " << to_string(config.eval.channel_mode) << ", " << ds.size()
      << " images\n";
  out << std::left << std::setw(10) << "method";
  for (double s : config.eval_scales) out << std::setw(18) << ("x" + scale_label(s));
  out << '\n';
  for (const auto* row : {&model, &bicubic}) {
    out << std::setw(10) << (row == &model ? "model" : "bicubic");
    for (const auto& s : row->mean) out << std::setw(18) << (fmt(s.psnr, 2) + " / " + fmt(s.ssim, 4));
    out << '\n';
  }

  if (!dump_dir.empty()) {
    std::filesystem::create_directories(dump_dir);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      for (double s : config.eval_scales) {
        const Image lr = make_eval_input(ds.images[i], s);
        const std::string stem = ds.records[i].id + "_x" + scale_label(s);
        write_png(std::filesystem::path(dump_dir) / (stem + "_lr.png"), lr, 16);
        write_png(std::filesystem::path(dump_dir) / (stem + "_sr.png"),
                  super_resolve(bundle, lr, ds.images[i].frame()), 16);
      }
    }
  }

  if (!table_path.empty()) {
    Json j{{"protocol", to_json(config.eval)}, {"scales", config.eval_scales}};
    j["protocol"]["shave_per_scale"] = Json::array();
    for (double s : config.eval_scales) {
      j["protocol"]["shave_per_scale"].push_back(config.eval.shave_for_scale(s));
    }
    j["rows"] = Json::array();
    for (const auto& [name, table] : {std::pair{"model", &model}, std::pair{"bicubic", &bicubic}}) {
      Json row{{"name", name}, {"scores", Json::array()}};
      for (const auto& s : table->mean) row["scores"].push_back(score_json(s));
      j["rows"].push_back(row);
    }
    j["per_image"] = Json::array();
    for (std::size_t i = 0; i < ds.size(); ++i) {
      Json row{{"id", ds.records[i].id}, {"model", Json::array()}, {"bicubic", Json::array()}};
      for (const auto& s : model.per_image[i]) row["model"].push_back(score_json(s));
      for (const auto& s : bicubic.per_image[i]) row["bicubic"].push_back(score_json(s));
      j["per_image"].push_back(row);
    }
    const std::filesystem::path p(table_path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream(p) << j.dump(2) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_sr(const std::string& checkpoint, const std::string& input, const std::string& output,
           std::optional<double> scale, const std::string& size, int bit_depth,
           std::ostream& out) {
  if (scale.has_value() == !size.empty()) {
    throw ValidationError("give exactly one of --scale or --size");
  }
  if (bit_depth != 8 && bit_depth != 16) throw ValidationError("--bit-depth must be 8 or 16");
  const ModelBundle bundle = load_bundle(checkpoint);
  const Image lr = read_png(input);
  CoordFrame frame;
  if (scale) {
    if (!(*scale > 0.0) || !std::isfinite(*scale)) throw ValidationError("--scale must be > 0");
    frame = scaled_frame(lr.frame(), *scale);
  } else {
    int w = 0, h = 0;
    char x = 0;
    std::istringstream is(size);
    if (!(is >> w >> x >> h) || (x != 'x' && x != 'X') || w < 1 || h < 1 || !is.eof()) {
      throw ValidationError("--size must look like WIDTHxHEIGHT, e.g. 100x77");
    }
    frame = CoordFrame{h, w};
  }
  const Image sr = super_resolve(bundle, lr, frame);
  write_png(output, sr, bit_depth);
  out << "wrote " << output << " (" << frame.width << "x" << frame.height << ")\n";
  if (frame == lr.frame()) {
    out << "identity-scale fit: PSNR " << fmt(psnr(sr, lr, EvalProtocol{}), 2)
        << " dB against the input\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_ablate(const ConfigFlags& flags, const std::string& train_dir, const std::string& eval_dir,
               const std::string& out_dir, const std::vector<std::string>& only,
               std::ostream& out) {
  std::vector<std::string> extra;
  if (!train_dir.empty()) extra.push_back("data.train_dir=\"" + train_dir + "\"");
  if (!eval_dir.empty()) extra.push_back("data.val_dir=\"" + eval_dir + "\"");
  if (!out_dir.empty()) extra.push_back("output_dir=\"" + out_dir + "\"");
  const RunConfig config = flags.resolve(extra);
  require(!config.train_dir.empty(), "data.train_dir");
  require(!config.val_dir.empty(), "data.val_dir");
  require(!config.output_dir.empty(), "output_dir");

  auto matrix = default_ablation_matrix(config.decoder);
  if (!only.empty()) {
    std::vector<AblationEntry> kept;
    for (const auto& name : only) {
      bool found = false;
      for (const auto& e : matrix) {
        if (e.name == name) {
          kept.push_back(e);
          found = true;
        }
      }
      if (!found) throw ValidationError("unknown ablation variant '" + name + "'");
    }
    matrix = kept;
  }
  const Dataset train_set = Dataset::load(config.train_dir, "train");
  const Dataset eval_set = Dataset::load(config.val_dir, "val");
  AblationSetup setup;
  setup.encoder = config.encoder;
  setup.train = config.train;
  setup.train.val_scales.clear();
  setup.sample = config.sample;
  setup.protocol = config.eval;
  setup.scales = config.eval_scales;
  setup.out_dir = config.output_dir;
  const AblationReport report =
      ablate(matrix, setup, train_set, eval_set, [&out](const std::string& msg) {
        out << msg << '\n' << std::flush;
      });
  std::filesystem::create_directories(config.output_dir);
  std::ofstream(config.output_dir / "report.md") << report.to_markdown();
  std::ofstream(config.output_dir / "report.json") << report.to_json() << '\n';
  std::ofstream(config.output_dir / "config.json") << config.to_json().dump(2) << '\n';
  out << report.to_markdown();
  return kExitOk;
}

int cmd_toyset(const std::string& dir, int count, int size, std::uint64_t seed, int first,
               std::ostream& out) {
  if (count < 1) throw ValidationError("--count must be >= 1");
  if (size < 8) throw ValidationError("--size must be >= 8");
  if (first < 0) throw ValidationError("--first must be >= 0");
  const auto paths = write_toy_set(dir, seed, count, size, first);
  out << "wrote " << paths.size() << " images to " << dir << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ipesr: arbitrary-scale super-resolution with integrated positional encoding"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ipesr 0.1.0");

  // train
  ConfigFlags train_flags;
  std::string train_dir, val_dir, out_dir;
  bool resume = false;
  int workers = 0;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_flags.attach(train_cmd);
  train_cmd->add_option("--train-dir", train_dir, "training images (data.train_dir)");
  train_cmd->add_option("--val-dir", val_dir, "validation images (data.val_dir)");
  train_cmd->add_option("-o,--out", out_dir, "output directory (output_dir)");
  train_cmd->add_flag("--resume", resume, "continue from OUT/last.ipesr and OUT/state.bin");
  train_cmd->add_option("--workers", workers, "gradient worker threads");

  // eval
  ConfigFlags eval_flags;
  std::string eval_ckpt, eval_data, eval_protocol, eval_table, eval_dump;
  std::vector<double> eval_scales;
  int eval_shave = -2, eval_workers = 0;
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint against bicubic");
  eval_flags.attach(eval_cmd);
  eval_cmd->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  eval_cmd->add_option("--data", eval_data, "directory of HR images (data.val_dir)");
  eval_cmd->add_option("--scales", eval_scales, "comma-separated scales")->delimiter(',');
  eval_cmd->add_option("--protocol", eval_protocol, "rgb or y");
  eval_cmd->add_option("--shave", eval_shave, "border pixels to ignore (-1: automatic)");
  eval_cmd->add_option("--table", eval_table, "write the table as JSON");
  eval_cmd->add_option("--dump-dir", eval_dump, "write 16-bit LR inputs and outputs");
  eval_cmd->add_option("--workers", eval_workers, "image worker threads");

  // sr
  std::string sr_ckpt, sr_in, sr_out, sr_size;
  std::optional<double> sr_scale;
  int sr_bits = 8;
  auto* sr_cmd = app.add_subcommand("sr", "super-resolve one image");
  sr_cmd->add_option("--checkpoint", sr_ckpt, "model checkpoint")->required();
  sr_cmd->add_option("-i,--input", sr_in, "input PNG")->required();
  sr_cmd->add_option("-o,--output", sr_out, "output PNG")->required();
  sr_cmd->add_option("--scale", sr_scale, "isotropic scale, e.g. 2.5");
  sr_cmd->add_option("--size", sr_size, "explicit output size WIDTHxHEIGHT");
  sr_cmd->add_option("--bit-depth", sr_bits, "8 or 16");

  // ablate
  ConfigFlags ablate_flags;
  std::string ab_train, ab_eval, ab_out;
  std::vector<std::string> ab_only;
  auto* ablate_cmd = app.add_subcommand("ablate", "train and score the ablation matrix");
  ablate_flags.attach(ablate_cmd);
  ablate_cmd->add_option("--train-dir", ab_train, "training images (data.train_dir)");
  ablate_cmd->add_option("--eval-dir", ab_eval, "held-out images (data.val_dir)");
  ablate_cmd->add_option("-o,--out", ab_out, "report directory (output_dir)");
  ablate_cmd->add_option("--only", ab_only, "restrict to these variant names");

  // selfcheck
  bool inject = false;
  auto* self_cmd = app.add_subcommand("selfcheck", "run the reduced-size oracle checks");
  self_cmd->add_flag("--inject-sinc-fault", inject,
                     "corrupt the sinc switch threshold first (tests the checker)");

  // toyset
  std::string toy_dir;
  int toy_count = 8, toy_size = 128, toy_first = 0;
  std::uint64_t toy_seed = 0;
  auto* toy_cmd = app.add_subcommand("toyset", "write procedural training images");
  toy_cmd->add_option("-o,--out", toy_dir, "output directory")->required();
  toy_cmd->add_option("--count", toy_count, "number of images");
  toy_cmd->add_option("--size", toy_size, "side length in pixels");
  toy_cmd->add_option("--seed", toy_seed, "generator seed");
  toy_cmd->add_option("--first", toy_first, "index of the first image");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitValidation;
  }

  try {
    if (*train_cmd) return cmd_train(train_flags, train_dir, val_dir, out_dir, resume, workers, out);
    if (*eval_cmd) {
      return cmd_eval(eval_flags, eval_ckpt, eval_data, eval_scales, eval_protocol, eval_shave,
                      eval_table, eval_dump, eval_workers, out);
    }
    if (*sr_cmd) return cmd_sr(sr_ckpt, sr_in, sr_out, sr_scale, sr_size, sr_bits, out);
    if (*ablate_cmd) return cmd_ablate(ablate_flags, ab_train, ab_eval, ab_out, ab_only, out);
    if (*self_cmd) return run_selfcheck(out, inject);
    if (*toy_cmd) return cmd_toyset(toy_dir, toy_count, toy_size, toy_seed, toy_first, out);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace ipesr
