// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ipesr/config_io.hpp"
#include "ipesr/data.hpp"
#include "ipesr/metrics.hpp"
#include "ipesr/model.hpp"
#include "ipesr/training.hpp"

namespace ipesr {

inline constexpr int kConfigSchemaVersion = 1;

// Everything a command needs, merged from preset defaults, an optional JSON
// file and command-line overrides (in that order of increasing precedence).
//
// File layout:
//   {
//     "schema_version": 1,
//     "preset": "desk" | "paper",
//     "model":  {"variant": "liif" | "metasr", "encoder": {...}, "decoder": {...}},
//     "sample": {...}, "train": {...},
//     "eval":   {"channel_mode", "shave", "data_peak", "scales": [...]},
//     "data":   {"train_dir": "...", "val_dir": "..."},
//     "output_dir": "..."
//   }
struct RunConfig {
  Preset preset = Preset::kDesk;
  ModelVariant variant = ModelVariant::kLiif;
  EncoderConfig encoder;
  DecoderConfig decoder;
  SampleSpec sample;
  TrainConfig train;
  EvalProtocol eval;
  std::vector<double> eval_scales{2.0, 3.0, 4.0, 6.0, 12.0};
  std::filesystem::path train_dir;
  std::filesystem::path val_dir;
  std::filesystem::path output_dir;

  static RunConfig for_preset(Preset preset);

  // Range checks only; which paths are required depends on the command.
  void validate() const;
  [[nodiscard]] Json to_json() const;
};

// Applies the keys present in `j` (same layout as the file, without the
// schema_version/preset keys being mandatory).
void apply_run_json(const Json& j, RunConfig& config);

struct ConfigSources {
  std::optional<std::filesystem::path> file;
  std::optional<std::string> preset;
  std::vector<std::string> sets;  // "section.key=value"
  std::optional<std::uint64_t> seed;
};

// Resolves the effective config. Without an explicit file, the environment
// variable IPESR_CONFIG_PATH (a ':'-separated list of files or directories
// holding ipesr.json) is searched.
RunConfig resolve_config(const ConfigSources& sources);

// Parses "a.b.c=value" into {"a":{"b":{"c":value}}}. The value is read as
// JSON when it parses, otherwise as a string.
Json parse_override(const std::string& assignment);

}  // namespace ipesr
