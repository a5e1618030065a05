// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ipesr/data.hpp"
#include "ipesr/metrics.hpp"
#include "ipesr/model.hpp"

namespace ipesr {

enum class Preset { kPaper, kDesk };

std::string_view to_string(Preset p);
Preset parse_preset(std::string_view name);

struct TrainConfig {
  Preset preset = Preset::kDesk;
  int epochs = 20;
  int iters_per_epoch = 100;
  int batch_size = 8;
  double lr0 = 1e-4;
  int lr_halve_every = 8;
  std::string loss = "l1";
  std::uint64_t seed = 0;
  // Global L2-norm clip on the summed gradient; 0 disables it.
  double grad_clip = 0.0;
  // Validation scales, evaluated after every epoch. Empty disables validation.
  std::vector<double> val_scales{2.0, 3.0, 4.0, 6.0, 12.0};
  // Threads used to compute per-item gradients. The reduction order is
  // fixed, so the result does not depend on this value.
  int workers = 1;

  // Full-length schedule: 1000 epochs of 1000 iterations, batch 16, lr
  // halved every 200 epochs.
  static TrainConfig paper();
  // A minutes-scale schedule for CPU runs.
  static TrainConfig desk();

  void validate() const;
};

// lr0 * 2^-floor(epoch / lr_halve_every).
double learning_rate(const TrainConfig& config, int epoch);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update of a single array. `step` counts from 1.
void adam_update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, std::int64_t step,
                 double lr, const AdamConfig& config = {});

struct AdamState {
  std::int64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

// Applies one Adam step to every parameter of `bundle` (in visit order).
void adam_step(ModelBundle& bundle, const ModelBundle& grad, AdamState& state, double lr,
               const AdamConfig& config = {});

struct BestRecord {
  int epoch = -1;
  double scale = 4.0;
  double psnr = -std::numeric_limits<double>::infinity();
};

// Everything beyond the parameters that a resumed run needs. Data streams are
// counter-based, so (epoch, step) is the whole RNG state.
struct TrainState {
  int epoch = 0;  // next epoch to run
  std::int64_t step = 0;
  AdamState adam;
  BestRecord best;
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

// Anything mapping an LR image onto an output frame.
using Renderer = std::function<Image(const Image& lr, const CoordFrame& out)>;

Renderer bicubic_renderer();
Renderer model_renderer(const ModelBundle& bundle);

struct ScaleScore {
  double scale = 1.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalTable {
  std::vector<double> scales;
  std::vector<ScaleScore> mean;                    // one per scale
  std::vector<std::vector<ScaleScore>> per_image;  // [image][scale]
};

// LR input for evaluating an HR image at scale s: antialiased bicubic
// downscale to round(dims / s), at least 1x1.
Image make_eval_input(const Image& hr, double scale);

EvalTable evaluate(const Renderer& renderer, const Dataset& dataset,
                   const std::vector<double>& scales, const EvalProtocol& protocol,
                   int workers = 1);
EvalTable evaluate(const ModelBundle& bundle, const Dataset& dataset,
                   const std::vector<double>& scales, const EvalProtocol& protocol,
                   int workers = 1);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainOptions {
  // Output directory for log.jsonl, checkpoints and train state. Empty keeps
  // everything in memory.
  std::filesystem::path out_dir;
  const Dataset* validation = nullptr;
  EvalProtocol protocol;
  // Continue from out_dir/last.ipesr and out_dir/state.bin.
  bool resume = false;
  // Stop after this many epochs in this call (-1: run to config.epochs).
  int stop_after_epochs = -1;
  // Called with every log record (one JSON object per line).
  std::function<void(const std::string&)> on_log;
  bool save_epoch_checkpoints = true;
};

struct TrainResult {
  ModelBundle bundle;
  TrainState state;
  std::vector<std::string> log;  // JSON lines, in emission order
  std::vector<double> step_losses;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mean absolute error over every queried channel of the batch, and its
// gradient, accumulated into `grad`.
double batch_loss_and_grad(const ModelBundle& bundle, const std::vector<TrainingSample>& batch,
                           ModelBundle& grad, int workers = 1);

TrainResult train(ModelBundle bundle, const Dataset& dataset, const TrainConfig& config,
                  const SampleSpec& spec, const TrainOptions& options = {});

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

struct AblationEntry {
  std::string name;
  ModelVariant variant = ModelVariant::kLiif;
  DecoderConfig decoder;
};

struct AblationRow {
  std::string name;
  std::vector<ScaleScore> scores;
  double seconds = 0.0;
};

struct AblationReport {
  std::vector<double> scales;
  std::vector<AblationRow> rows;  // bicubic baseline first

  [[nodiscard]] std::string to_markdown() const;
  [[nodiscard]] std::string to_json() const;
};

struct AblationSetup {
  EncoderConfig encoder;
  TrainConfig train;
  SampleSpec sample;
  EvalProtocol protocol;
  std::vector<double> scales{2.0, 3.0, 4.0, 6.0, 12.0};
  std::filesystem::path out_dir;  // per-variant subdirectories when set
};

// The bandwidth / encoding / skip ablation matrix.
std::vector<AblationEntry> default_ablation_matrix(const DecoderConfig& base);

AblationReport ablate(const std::vector<AblationEntry>& matrix, const AblationSetup& setup,
                      const Dataset& train_set, const Dataset& eval_set,
                      const std::function<void(const std::string&)>& progress = {});

}  // namespace ipesr
