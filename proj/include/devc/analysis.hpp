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

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "devc/encoders.hpp"
#include "devc/synth.hpp"

namespace devc {

// Display order of emotion rows and columns.
inline constexpr std::array<Emotion, kNumEmotions> kTableOrder = {Emotion::kAngry, Emotion::kHappy,
                                                                  Emotion::kNeutral, Emotion::kSad};

struct LabeledEmbedding {
  std::string id;
  Emotion emotion = Emotion::kNeutral;
  Eigen::VectorXf values;
};

// values[i][j]: mean distance between group-1 emotion i and group-2 emotion
// j, indexed by emotion_index.
struct DistanceTable {
  int speaker = 0;
  std::array<std::array<double, kNumEmotions>, kNumEmotions> values{};
  std::size_t group_size = 0;  // per group
  std::array<std::size_t, kNumEmotions> per_emotion{};  // per group, per emotion
};

// Each emotion's utterances are shuffled with `seed` and halved (one dropped
// when odd), so both groups hold the same emotion mix. Throws DataError with
// fewer than two utterances for any emotion.
DistanceTable distance_table(std::span<const LabeledEmbedding> utterances, int speaker, std::uint64_t seed);

struct DominanceReport {
  bool dominant = false;
  std::vector<std::string> violations;  // one entry per offending cell
};

// True iff every diagonal entry is strictly the minimum of its row and of
// its column.
DominanceReport diagonal_dominance(const std::array<std::array<double, kNumEmotions>, kNumEmotions>& values);
inline DominanceReport diagonal_dominance(const DistanceTable& t) { return diagonal_dominance(t.values); }

nlohmann::json to_json(const DistanceTable& t);
std::string format_table(const DistanceTable& t);

// Up to `max_per_speaker` utterances per speaker, balanced over emotions and
// picked with `seed`.
std::vector<LabeledEmbedding> speaker_embeddings(const EmbeddingStore& store, const CorpusManifest& manifest,
                                                 int speaker, std::size_t max_per_speaker, std::uint64_t seed);

struct ExportedRow {
  std::string id;
  int speaker = -1;
  std::string emotion;
  std::vector<float> values;
};

// TSV with columns id, speaker, emotion, v0..v{d-1}, plus <path>.json with
// dims and counts. Throws DataError for ids missing from the store.
void export_embeddings(const EmbeddingStore& store, const std::vector<std::string>& ids, EmbeddingKind kind,
                       const std::filesystem::path& path);
std::vector<ExportedRow> import_embeddings(const std::filesystem::path& path);

}  // namespace devc
