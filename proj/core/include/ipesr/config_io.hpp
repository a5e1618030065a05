// SPDX-License-Identifier: Apache-2.0
#pragma once

// JSON views of the configuration structs. Readers apply only the keys that
// are present onto an existing value, so layering (preset, then file, then
// command-line overrides) is a sequence of apply_json calls. Unknown keys and
// wrongly typed values raise ValidationError naming the offending path.

#include <nlohmann/json.hpp>
#include <string>

#include "ipesr/data.hpp"
#include "ipesr/metrics.hpp"
#include "ipesr/model.hpp"
#include "ipesr/training.hpp"

namespace ipesr {

using Json = nlohmann::json;

Json to_json(const EncodingConfig& c);
Json to_json(const EncoderConfig& c);
Json to_json(const DecoderConfig& c);
Json to_json(const SampleSpec& c);
Json to_json(const TrainConfig& c);
Json to_json(const EvalProtocol& c);

void apply_json(const Json& j, EncodingConfig& c, const std::string& path);
void apply_json(const Json& j, EncoderConfig& c, const std::string& path);
void apply_json(const Json& j, DecoderConfig& c, const std::string& path);
void apply_json(const Json& j, SampleSpec& c, const std::string& path);
void apply_json(const Json& j, TrainConfig& c, const std::string& path);
void apply_json(const Json& j, EvalProtocol& c, const std::string& path);

}  // namespace ipesr
