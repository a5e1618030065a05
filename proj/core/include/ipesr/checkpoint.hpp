// SPDX-License-Identifier: Apache-2.0
#pragma once

// Checkpoint container (little-endian):
//
//   char[8]  magic "IPESRCK1"
//   u32      container version (kArchiveVersion)
//   u64      manifest length N, then N bytes of UTF-8 JSON
//   u32      array count
//   per array:
//     u32 name length, name bytes
//     u64 rows, u64 cols
//     rows*cols IEEE-754 doubles, row-major
//
// The manifest of a model file holds {"kind": "model", "format_version",
// "variant", "encoder", "decoder"}; arrays are the parameters in visit order.
// Doubles are copied verbatim, so a save/load round trip is bit-exact.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ipesr/config_io.hpp"
#include "ipesr/model.hpp"
#include "ipesr/training.hpp"

namespace ipesr {

inline constexpr std::uint32_t kArchiveVersion = 1;

struct NamedArray {
  std::string name;
  Matrix value;
};

struct Archive {
  Json manifest;
  std::vector<NamedArray> arrays;
};

// Writes through a temporary file and renames it into place.
void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_bundle(const std::filesystem::path& path);

// Optimizer moments and counters; parameter shapes are checked against
// `bundle` on load.
void save_train_state(const std::filesystem::path& path, const TrainState& state);
TrainState load_train_state(const std::filesystem::path& path, const ModelBundle& bundle);

}  // namespace ipesr
