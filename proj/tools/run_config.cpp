// SPDX-License-Identifier: Apache-2.0
#include "run_config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "ipesr/types.hpp"

namespace ipesr {
namespace {

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

std::optional<std::filesystem::path> search_env_path() {
  const char* env = std::getenv("IPESR_CONFIG_PATH");
  if (!env || !*env) return std::nullopt;
  std::stringstream ss(env);
  std::string entry;
  while (std::getline(ss, entry, ':')) {
    if (entry.empty()) continue;
    std::filesystem::path p(entry);
    if (std::filesystem::is_directory(p)) p /= "ipesr.json";
    if (std::filesystem::is_regular_file(p)) return p;
  }
  return std::nullopt;
}

// Recursive object merge; later values win.
void merge_into(Json& dst, const Json& src) {
  for (const auto& [key, value] : src.items()) {
    if (value.is_object() && dst.contains(key) && dst[key].is_object()) {
      merge_into(dst[key], value);
    } else {
      dst[key] = value;
    }
  }
}

std::string path_string(const Json& j, const std::string& key) {
  if (!j.is_string()) throw ValidationError(key + " must be a string");
  return j.get<std::string>();
}

}  // namespace

RunConfig RunConfig::for_preset(Preset preset) {
  RunConfig c;
  c.preset = preset;
  if (preset == Preset::kPaper) {
    c.train = TrainConfig::paper();
    // Encoder stays at the small residual default; the full EDSR-baseline
    // (16 blocks, 64 channels) is a config change.
    c.decoder.hidden_layers = 4;
    c.decoder.hidden_width = 256;
    c.sample.lr_patch = 48;
    c.sample.pixels_per_patch = 48 * 48;
  } else {
    c.train = TrainConfig::desk();
    c.encoder.blocks = 2;
    c.encoder.channels = 16;
    c.decoder.hidden_layers = 4;
    c.decoder.hidden_width = 64;
    c.sample.lr_patch = 32;
    c.sample.pixels_per_patch = 256;
  }
  c.train.val_scales = {2.0, 3.0, 4.0, 6.0, 12.0};
  return c;
}

void RunConfig::validate() const {
  encoder.validate();
  decoder.validate();
  sample.validate();
  train.validate();
  eval.validate();
  if (train.preset != preset) {
    throw ValidationError("train.preset disagrees with the top-level preset; set only preset");
  }
  if (eval_scales.empty()) throw ValidationError("eval.scales must not be empty");
  for (double s : eval_scales) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("eval.scales must be > 0");
  }
}

Json RunConfig::to_json() const {
  Json eval_json = ipesr::to_json(eval);
  eval_json["scales"] = eval_scales;
  return Json{{"schema_version", kConfigSchemaVersion},
              {"preset", std::string(to_string(preset))},
              {"model",
               {{"variant", std::string(to_string(variant))},
                {"encoder", ipesr::to_json(encoder)},
                {"decoder", ipesr::to_json(decoder)}}},
              {"sample", ipesr::to_json(sample)},
              {"train", ipesr::to_json(train)},
              {"eval", eval_json},
              {"data", {{"train_dir", train_dir.string()}, {"val_dir", val_dir.string()}}},
              {"output_dir", output_dir.string()}};
}

void apply_run_json(const Json& j, RunConfig& c) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  static const std::set<std::string> known{"schema_version", "preset", "model", "sample",
                                           "train",          "eval",   "data",  "output_dir"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ValidationError("unknown config key '" + key + "'");
  }
  if (j.contains("model")) {
    const Json& m = j["model"];
    if (!m.is_object()) throw ValidationError("model must be an object");
    for (const auto& [key, value] : m.items()) {
      if (key == "variant") {
        c.variant = parse_model_variant(path_string(value, "model.variant"));
      } else if (key == "encoder") {
        apply_json(value, c.encoder, "model.encoder");
      } else if (key == "decoder") {
        apply_json(value, c.decoder, "model.decoder");
      } else {
        throw ValidationError("unknown config key 'model." + key + "'");
      }
    }
  }
  if (j.contains("sample")) apply_json(j["sample"], c.sample, "sample");
  if (j.contains("train")) apply_json(j["train"], c.train, "train");
  if (j.contains("eval")) {
    Json e = j["eval"];
    if (!e.is_object()) throw ValidationError("eval must be an object");
    if (e.contains("scales")) {
      const Json& s = e["scales"];
      if (!s.is_array()) throw ValidationError("eval.scales must be an array of numbers");
      std::vector<double> scales;
      for (const auto& v : s) {
        if (!v.is_number()) throw ValidationError("eval.scales must be an array of numbers");
        scales.push_back(v.get<double>());
      }
      c.eval_scales = scales;
      e.erase("scales");
    }
    apply_json(e, c.eval, "eval");
  }
  if (j.contains("data")) {
    const Json& d = j["data"];
    if (!d.is_object()) throw ValidationError("data must be an object");
    for (const auto& [key, value] : d.items()) {
      if (key == "train_dir") {
        c.train_dir = path_string(value, "data.train_dir");
      } else if (key == "val_dir") {
        c.val_dir = path_string(value, "data.val_dir");
      } else {
        throw ValidationError("unknown config key 'data." + key + "'");
      }
    }
  }
  if (j.contains("output_dir")) c.output_dir = path_string(j["output_dir"], "output_dir");
}

Json parse_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  Json root = Json::object();
  Json* node = &root;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ValidationError("override key '" + key + "' has an empty component");
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  (*node)[parts.back()] = value;
  return root;
}

RunConfig resolve_config(const ConfigSources& sources) {
  Json file_json = Json::object();
  std::optional<std::filesystem::path> file = sources.file;
  if (!file) file = search_env_path();
  if (file) {
    file_json = read_json_file(*file);
    if (!file_json.is_object()) throw ValidationError("config file must hold a JSON object");
    if (!file_json.contains("schema_version")) {
      throw ValidationError("config file " + file->string() + " lacks schema_version");
    }
    const Json& v = file_json["schema_version"];
    if (!v.is_number_integer() || v.get<int>() != kConfigSchemaVersion) {
      throw ValidationError("unsupported schema_version " + v.dump() + " (expected " +
                            std::to_string(kConfigSchemaVersion) + ")");
    }
  }

  Preset preset = Preset::kDesk;
  if (file_json.contains("preset")) preset = parse_preset(path_string(file_json["preset"], "preset"));
  if (sources.preset) preset = parse_preset(*sources.preset);

  RunConfig config = RunConfig::for_preset(preset);
  apply_run_json(file_json, config);

  Json overrides = Json::object();
  for (const auto& s : sources.sets) {
    const Json o = parse_override(s);
    if (o.contains("preset") || o.contains("schema_version")) {
      throw ValidationError("preset and schema_version cannot be overridden with --set");
    }
    merge_into(overrides, o);
  }
  apply_run_json(overrides, config);
  if (sources.seed) config.train.seed = *sources.seed;
  config.sample.seed = config.train.seed;
  config.validate();
  return config;
}

}  // namespace ipesr
