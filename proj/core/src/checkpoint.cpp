// SPDX-License-Identifier: Apache-2.0
#include "ipesr/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ipesr {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'I', 'P', 'E', 'S', 'R', 'C', 'K', '1'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw std::runtime_error("truncated checkpoint: " + path.string());
  }
  return v;
}

std::string get_bytes(std::istream& is, std::uint64_t n, const std::filesystem::path& path) {
  if (n > (1ULL << 32)) throw std::runtime_error("corrupt checkpoint: " + path.string());
  std::string s(n, '\0');
  if (n && !is.read(s.data(), static_cast<std::streamsize>(n))) {
    throw std::runtime_error("truncated checkpoint: " + path.string());
  }
  return s;
}

}  // namespace

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(os, kArchiveVersion);
    const std::string manifest = archive.manifest.dump();
    put<std::uint64_t>(os, manifest.size());
    os.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(archive.arrays.size()));
    for (const auto& a : archive.arrays) {
      put<std::uint32_t>(os, static_cast<std::uint32_t>(a.name.size()));
      os.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
      put<std::uint64_t>(os, static_cast<std::uint64_t>(a.value.rows()));
      put<std::uint64_t>(os, static_cast<std::uint64_t>(a.value.cols()));
      os.write(reinterpret_cast<const char*>(a.value.data()),
               static_cast<std::streamsize>(a.value.size() * sizeof(double)));
    }
    if (!os.flush()) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("not an ipesr checkpoint: " + path.string());
  }
  const auto version = get<std::uint32_t>(is, path);
  if (version != kArchiveVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                             " in " + path.string());
  }
  Archive a;
  const std::string manifest = get_bytes(is, get<std::uint64_t>(is, path), path);
  try {
    a.manifest = Json::parse(manifest);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error("corrupt checkpoint manifest in " + path.string() + ": " + e.what());
  }
  const auto count = get<std::uint32_t>(is, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray entry;
    entry.name = get_bytes(is, get<std::uint32_t>(is, path), path);
    const auto rows = get<std::uint64_t>(is, path);
    const auto cols = get<std::uint64_t>(is, path);
    if (rows > (1ULL << 31) || cols > (1ULL << 31)) {
      throw std::runtime_error("corrupt array header in " + path.string());
    }
    entry.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (entry.value.size() &&
        !is.read(reinterpret_cast<char*>(entry.value.data()),
                 static_cast<std::streamsize>(entry.value.size() * sizeof(double)))) {
      throw std::runtime_error("truncated checkpoint: " + path.string());
    }
    a.arrays.push_back(std::move(entry));
  }
  return a;
}

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle) {
  Archive a;
  a.manifest = Json{{"kind", "model"},
                    {"format_version", bundle.format_version},
                    {"variant", std::string(to_string(bundle.variant))},
                    {"encoder", to_json(bundle.encoder_config)},
                    {"decoder", to_json(bundle.decoder_config)}};
  bundle.visit_parameters(
      [&](const std::string& name, const Matrix& m) { a.arrays.push_back({name, m}); });
  write_archive(path, a);
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  const Archive a = read_archive(path);
  const Json& m = a.manifest;
  try {
    if (m.at("kind").get<std::string>() != "model") {
      throw std::runtime_error(path.string() + " does not contain a model");
    }
    const auto version = m.at("format_version").get<std::uint32_t>();
    if (version != kModelFormatVersion) {
      throw std::runtime_error("unsupported model format version " + std::to_string(version));
    }
    EncoderConfig enc;
    DecoderConfig dec;
    apply_json(m.at("encoder"), enc, "encoder");
    apply_json(m.at("decoder"), dec, "decoder");
    ModelBundle b = ModelBundle::create(parse_model_variant(m.at("variant").get<std::string>()),
                                        enc, dec, 0);
    std::size_t next = 0;
    b.visit_parameters([&](const std::string& name, Matrix& value) {
      if (next >= a.arrays.size() || a.arrays[next].name != name) {
        throw std::runtime_error("checkpoint is missing parameter " + name);
      }
      const Matrix& stored = a.arrays[next++].value;
      if (stored.rows() != value.rows() || stored.cols() != value.cols()) {
        throw std::runtime_error("shape mismatch for parameter " + name);
      }
      value = stored;
    });
    if (next != a.arrays.size()) throw std::runtime_error("checkpoint has extra arrays");
    return b;
  } catch (const Json::exception& e) {
    throw std::runtime_error("corrupt model manifest in " + path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error("invalid model manifest in " + path.string() + ": " + e.what());
  }
}

void save_train_state(const std::filesystem::path& path, const TrainState& state) {
  Archive a;
  a.manifest = Json{{"kind", "train_state"},
                    {"epoch", state.epoch},
                    {"step", state.step},
                    {"adam_step", state.adam.step},
                    {"best_epoch", state.best.epoch},
                    {"best_scale", state.best.scale},
                    {"best_psnr", std::isfinite(state.best.psnr) ? Json(state.best.psnr) : Json()}};
  for (std::size_t i = 0; i < state.adam.m.size(); ++i) {
    a.arrays.push_back({"m" + std::to_string(i), state.adam.m[i]});
    a.arrays.push_back({"v" + std::to_string(i), state.adam.v[i]});
  }
  write_archive(path, a);
}

TrainState load_train_state(const std::filesystem::path& path, const ModelBundle& bundle) {
  const Archive a = read_archive(path);
  try {
    const Json& m = a.manifest;
    if (m.at("kind").get<std::string>() != "train_state") {
      throw std::runtime_error(path.string() + " does not contain a train state");
    }
    TrainState s;
    s.epoch = m.at("epoch").get<int>();
    s.step = m.at("step").get<std::int64_t>();
    s.adam.step = m.at("adam_step").get<std::int64_t>();
    s.best.epoch = m.at("best_epoch").get<int>();
    s.best.scale = m.at("best_scale").get<double>();
    if (!m.at("best_psnr").is_null()) s.best.psnr = m.at("best_psnr").get<double>();
    std::vector<const Matrix*> shapes;
    bundle.visit_parameters([&](const std::string&, const Matrix& p) { shapes.push_back(&p); });
    if (!a.arrays.empty() && a.arrays.size() != 2 * shapes.size()) {
      throw std::runtime_error("train state does not match the model's parameter count");
    }
    for (std::size_t i = 0; 2 * i < a.arrays.size(); ++i) {
      const Matrix& mm = a.arrays[2 * i].value;
      const Matrix& vv = a.arrays[2 * i + 1].value;
      if (mm.rows() != shapes[i]->rows() || mm.cols() != shapes[i]->cols() ||
          vv.rows() != mm.rows() || vv.cols() != mm.cols()) {
        throw std::runtime_error("train state shape mismatch at parameter " + std::to_string(i));
      }
      s.adam.m.push_back(mm);
      s.adam.v.push_back(vv);
    }
    return s;
  } catch (const Json::exception& e) {
    throw std::runtime_error("corrupt train state in " + path.string() + ": " + e.what());
  }
}

}  // namespace ipesr
