// Copyright (c) 2026 The devc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "devc/denoiser.hpp"
#include "devc/embeddings.hpp"
#include "devc/encoders.hpp"
#include "devc/schedule.hpp"
#include "devc/synth.hpp"

namespace devc {

struct AdamState {
  std::vector<float> m, v;
  std::int64_t step = 0;
};

struct ScheduleSpec {
  int steps = kDefaultSteps;
  double beta_start = kDefaultBetaStart;
  double beta_end = kDefaultBetaEnd;

  NoiseSchedule build() const { return make_schedule(steps, beta_start, beta_end); }
  bool operator==(const ScheduleSpec&) const = default;
};

// Everything needed to run the decoder without the original config file.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  DecoderConfig decoder;
  ScheduleSpec schedule;
  EncoderDims dims;
  int hop = 320;
  // Training waveforms are multiplied by this; synthesis divides it out.
  double waveform_scale = 1.0;
  Backend backend = Backend::kOracle;
  std::optional<GeneratorParams> generator;  // oracle backend only
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  std::vector<float> parameters;
  std::optional<AdamState> optimizer;
  std::uint64_t conditioning_checksum = 0;
  nlohmann::json train_config;  // informational

  // Throws ShapeError when the decoder width disagrees with `dims`.
  void validate() const;
};

// Writes <stem>.json and <stem>.bin next to each other; `path` names the JSON.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Accepts the JSON path or the stem without extension.
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json to_json(const DecoderConfig& c);
DecoderConfig decoder_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EncoderDims& d);
EncoderDims encoder_dims_from_json(const nlohmann::json& j);

}  // namespace devc
