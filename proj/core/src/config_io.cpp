// SPDX-License-Identifier: Apache-2.0
#include "ipesr/config_io.hpp"

#include <set>

#include "ipesr/types.hpp"

namespace ipesr {
namespace {

// Walks the keys of one JSON object, remembering which ones were consumed so
// leftovers can be reported.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(where() + " must be an object");
  }

  template <typename T, typename Check>
  void read(const char* key, T& out, Check check) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    if (!check(*it)) throw ValidationError(where(key) + " has the wrong type");
    out = it->template get<T>();
  }

  void read(const char* key, int& out) {
    read(key, out, [](const Json& v) { return v.is_number_integer(); });
  }
  void read(const char* key, std::uint64_t& out) {
    read(key, out, [](const Json& v) { return v.is_number_unsigned(); });
  }
  void read(const char* key, double& out) {
    read(key, out, [](const Json& v) { return v.is_number(); });
  }
  void read(const char* key, bool& out) {
    read(key, out, [](const Json& v) { return v.is_boolean(); });
  }
  void read(const char* key, std::string& out) {
    read(key, out, [](const Json& v) { return v.is_string(); });
  }
  void read(const char* key, std::vector<double>& out) {
    read(key, out, [](const Json& v) {
      if (!v.is_array()) return false;
      for (const auto& e : v) {
        if (!e.is_number()) return false;
      }
      return true;
    });
  }

  const Json* child(const char* key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  [[nodiscard]] std::string where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ValidationError("unknown config key '" + where(key) + "'");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

Json to_json(const EncodingConfig& c) {
  return Json{{"variant", std::string(to_string(c.variant))},
              {"bandwidth", c.bandwidth},
              {"prepend_coords", c.prepend_coords},
              {"append_cell", c.append_cell}};
}

Json to_json(const EncoderConfig& c) {
  return Json{{"blocks", c.blocks}, {"channels", c.channels}, {"kernel_size", c.kernel_size}};
}

Json to_json(const DecoderConfig& c) {
  return Json{{"hidden_layers", c.hidden_layers},
              {"hidden_width", c.hidden_width},
              {"skip_connections", c.skip_connections},
              {"encoding", to_json(c.encoding)},
              {"global_residual", c.global_residual},
              {"zero_init_head", c.zero_init_head}};
}

Json to_json(const SampleSpec& c) {
  return Json{{"lr_patch", c.lr_patch},
              {"s_max", c.s_max},
              {"pixels_per_patch", c.pixels_per_patch},
              {"antialias", c.antialias}};
}

Json to_json(const TrainConfig& c) {
  return Json{{"preset", std::string(to_string(c.preset))},
              {"epochs", c.epochs},
              {"iters_per_epoch", c.iters_per_epoch},
              {"batch_size", c.batch_size},
              {"lr0", c.lr0},
              {"lr_halve_every", c.lr_halve_every},
              {"loss", c.loss},
              {"seed", c.seed},
              {"grad_clip", c.grad_clip},
              {"val_scales", c.val_scales},
              {"workers", c.workers}};
}

Json to_json(const EvalProtocol& c) {
  return Json{{"channel_mode", std::string(to_string(c.channel_mode))},
              {"shave", c.shave},
              {"data_peak", c.data_peak}};
}

void apply_json(const Json& j, EncodingConfig& c, const std::string& path) {
  Section s(j, path);
  std::string variant;
  s.read("variant", variant);
  if (!variant.empty()) c.variant = parse_encoding_variant(variant);
  s.read("bandwidth", c.bandwidth);
  s.read("prepend_coords", c.prepend_coords);
  s.read("append_cell", c.append_cell);
  s.finish();
}

void apply_json(const Json& j, EncoderConfig& c, const std::string& path) {
  Section s(j, path);
  s.read("blocks", c.blocks);
  s.read("channels", c.channels);
  s.read("kernel_size", c.kernel_size);
  s.finish();
}

void apply_json(const Json& j, DecoderConfig& c, const std::string& path) {
  Section s(j, path);
  s.read("hidden_layers", c.hidden_layers);
  s.read("hidden_width", c.hidden_width);
  s.read("skip_connections", c.skip_connections);
  if (const Json* e = s.child("encoding")) apply_json(*e, c.encoding, s.where("encoding"));
  s.read("global_residual", c.global_residual);
  s.read("zero_init_head", c.zero_init_head);
  s.finish();
}

void apply_json(const Json& j, SampleSpec& c, const std::string& path) {
  Section s(j, path);
  s.read("lr_patch", c.lr_patch);
  s.read("s_max", c.s_max);
  s.read("pixels_per_patch", c.pixels_per_patch);
  s.read("antialias", c.antialias);
  s.finish();
}

void apply_json(const Json& j, TrainConfig& c, const std::string& path) {
  Section s(j, path);
  std::string preset;
  s.read("preset", preset);
  if (!preset.empty()) c.preset = parse_preset(preset);
  s.read("epochs", c.epochs);
  s.read("iters_per_epoch", c.iters_per_epoch);
  s.read("batch_size", c.batch_size);
  s.read("lr0", c.lr0);
  s.read("lr_halve_every", c.lr_halve_every);
  s.read("loss", c.loss);
  s.read("seed", c.seed);
  s.read("grad_clip", c.grad_clip);
  s.read("val_scales", c.val_scales);
  s.read("workers", c.workers);
  s.finish();
}

void apply_json(const Json& j, EvalProtocol& c, const std::string& path) {
  Section s(j, path);
  std::string mode;
  s.read("channel_mode", mode);
  if (!mode.empty()) c.channel_mode = parse_channel_mode(mode);
  s.read("shave", c.shave);
  s.read("data_peak", c.data_peak);
  s.finish();
}

}  // namespace ipesr
