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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "devc/metrics.hpp"
#include "devc/pipeline.hpp"
#include "devc/synth.hpp"

namespace devc {

enum class Condition { kS2S, kS2U, kU2U };
inline constexpr std::array<Condition, 3> kAllConditions = {Condition::kS2S, Condition::kS2U, Condition::kU2U};
std::string_view condition_name(Condition c);

struct EvalConfig {
  int pairs_per_cell = 16;  // per (condition, emotion)
  int self_recon_pairs = 16;
  std::uint64_t seed = 1;
  EmotionSource emotion_source = EmotionSource::kSource;
  std::optional<std::filesystem::path> wav_dir;  // converted outputs, when set
};

struct PairResult {
  Condition condition = Condition::kS2S;
  Emotion emotion = Emotion::kNeutral;
  std::string source_id, reference_id;
  int source_speaker = 0, target_speaker = 0;
  double mcd = 0.0, vde = 0.0, ffe = 0.0;
  std::optional<double> f0_rmse;
  double speaker_cosine = 0.0;
  bool speaker_accepted = false;
  int classified_speaker = 0;
  Emotion classified_emotion = Emotion::kNeutral;
  bool emotion_correct = false;
};

struct CellSummary {
  Condition condition = Condition::kS2S;
  Emotion emotion = Emotion::kNeutral;
  std::size_t count = 0;
  double mcd = 0.0, vde = 0.0, ffe = 0.0, f0_rmse = 0.0;
  double sv_accuracy = 0.0, emotion_accuracy = 0.0;
};

struct EvalReport {
  std::vector<PairResult> pairs;
  std::vector<CellSummary> cells;
  std::map<Condition, double> sv_accuracy;
  std::map<Condition, double> emotion_accuracy;
  SvCalibration calibration;
  double self_recon_mcd = 0.0;
  std::optional<double> baseline_self_recon_mcd;
  std::size_t self_recon_pairs = 0;
  double seconds = 0.0;
};

// Conversion evaluation over the manifest's test split. Ground truth for a
// pair is the generator rendering of (target speaker, source emotion, source
// tokens). Enrollment uses the reference split, calibration the test split.
// `baseline`, when given, is scored on the same self-reconstruction pairs.
EvalReport evaluate(const CorpusManifest& manifest, const Converter& converter, const EvalConfig& config,
                    const Converter* baseline = nullptr);

nlohmann::json to_json(const EvalReport& report);
// Conditions x emotions rows, metric columns.
std::string format_table(const EvalReport& report);

}  // namespace devc
