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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "devc/audio.hpp"

namespace devc {

enum class Emotion : int { kNeutral = 0, kAngry = 1, kHappy = 2, kSad = 3 };
inline constexpr int kNumEmotions = 4;
inline constexpr std::array<Emotion, kNumEmotions> kAllEmotions = {
    Emotion::kNeutral, Emotion::kAngry, Emotion::kHappy, Emotion::kSad};

std::string_view emotion_name(Emotion e);
// Accepts lower-case names ("neutral", ...). Throws DataError otherwise.
Emotion parse_emotion(std::string_view name);
inline int emotion_index(Emotion e) { return static_cast<int>(e); }

struct SpeakerProfile {
  double f0_hz = 150.0;
  double formant_scale = 1.0;
  bool seen = true;
};

struct EmotionProfile {
  double f0_factor = 1.0;
  double vibrato_depth = 0.0;  // fractional F0 excursion
  double vibrato_rate_hz = 5.0;
  double gain_db = 0.0;
  double declination = 0.0;  // octaves per second
};

struct VowelFormants {
  double f1 = 500.0;
  double f2 = 1500.0;
};

// Everything the additive-harmonic generator needs. Token 0 is silence,
// tokens 1..V-1 index the vowel table.
struct GeneratorParams {
  int sample_rate = kCorpusSampleRate;
  int hop = 320;
  int token_hops = 4;
  std::vector<VowelFormants> vowels;
  double bandwidth1_hz = 90.0;
  double bandwidth2_hz = 140.0;
  std::vector<SpeakerProfile> speakers;
  std::array<EmotionProfile, kNumEmotions> emotions{};
  // Half-widths of the per-(speaker, emotion) offsets.
  double offset_f0_octaves = 0.04;
  double offset_vibrato = 0.005;
  double offset_gain_db = 1.5;
  double base_rms = 0.08;  // voiced RMS before the emotion gain
  double harmonic_ceiling_hz = 7200.0;
  double f0_jitter = 0.01;
  int min_voiced_tokens = 5;
  int max_voiced_tokens = 8;
  double pause_probability = 0.1;
  std::uint64_t master_seed = 1;

  int vocab_size() const { return static_cast<int>(vowels.size()) + 1; }
  int num_speakers() const { return static_cast<int>(speakers.size()); }
  int token_samples() const { return hop * token_hops; }

  // 8 speakers (4 seen, 4 unseen), 7 vowels, 4 emotions.
  static GeneratorParams defaults();
};

nlohmann::json to_json(const GeneratorParams& p);
GeneratorParams generator_params_from_json(const nlohmann::json& j);

struct SynthUtteranceSpec {
  int speaker_id = 0;
  Emotion emotion = Emotion::kNeutral;
  std::vector<int> content_tokens;
  std::uint64_t seed = 0;
};

// Per-(speaker, emotion) deviation from the shared emotion profile, drawn
// deterministically from the master seed.
struct CellOffset {
  double f0_octaves = 0.0;
  double vibrato = 0.0;
  double gain_db = 0.0;
};

// Fully resolved acoustic parameters of one (speaker, emotion) cell.
struct CellAcoustics {
  double f0_hz = 0.0;
  double formant_scale = 1.0;
  double vibrato_depth = 0.0;
  double vibrato_rate_hz = 0.0;
  double gain_db = 0.0;
  double declination = 0.0;
};

// Magnitude of a two-pole resonance normalized to unity at DC.
double resonance_gain(double f, double centre, double bandwidth);

CellOffset cell_offset(const GeneratorParams& p, int speaker, Emotion emotion);
CellAcoustics cell_acoustics(const GeneratorParams& p, int speaker, Emotion emotion);

// Generator-side factor vectors. Identical for all utterances sharing the
// speaker (resp. emotion), by construction.
std::array<double, 3> speaker_parameters(const GeneratorParams& p, int speaker);
std::array<double, 4> emotion_parameters(const GeneratorParams& p, Emotion emotion);
// Unit-norm direction of the standardized cell offset.
std::array<double, 3> cell_offset_direction(const GeneratorParams& p, int speaker,
                                            Emotion emotion);

struct SynthUtterance {
  Waveform wav;
  int speaker_id = 0;
  Emotion emotion = Emotion::kNeutral;
  std::vector<int> content_tokens;
  std::vector<float> f0_per_hop;  // 0 on silent hops
};

// Throws DataError for unknown ids, empty or out-of-vocabulary tokens.
SynthUtterance generate_utterance(const SynthUtteranceSpec& spec, const GeneratorParams& p);

// Random token sequence: silence, voiced tokens with occasional pauses, silence.
std::vector<int> sample_tokens(const GeneratorParams& p, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Corpus

enum class Split { kTrain, kReference, kTest, kHeldout };
std::string_view split_name(Split s);
Split parse_split(std::string_view name);

struct CorpusConfig {
  GeneratorParams generator = GeneratorParams::defaults();
  int train_per_cell = 20;
  int reference_per_cell = 4;
  int test_per_cell = 6;

  // 300/20/30 per (speaker, emotion).
  static CorpusConfig paper_shaped();
};

struct UtteranceRecord {
  std::string id;
  std::string path;  // relative to the manifest directory
  int speaker = 0;
  Emotion emotion = Emotion::kNeutral;
  Split split = Split::kTrain;
  std::vector<int> tokens;
  std::uint64_t seed = 0;
  std::size_t num_samples = 0;

  SynthUtteranceSpec spec() const { return {speaker, emotion, tokens, seed}; }
};

struct CorpusManifest {
  std::filesystem::path root;  // directory holding manifest.json
  CorpusConfig config;
  std::vector<UtteranceRecord> utterances;

  std::filesystem::path wav_path(const UtteranceRecord& u) const { return root / u.path; }
  std::vector<const UtteranceRecord*> select(std::optional<int> speaker,
                                             std::optional<Emotion> emotion,
                                             std::optional<Split> split) const;
  const UtteranceRecord* find(std::string_view id) const;
  bool speaker_seen(int speaker) const;
};

// Builds the manifest (no I/O). Unseen speakers get their train-sized quota
// assigned to the held-out split, so nothing from them reaches training.
CorpusManifest plan_corpus(const CorpusConfig& config);
// Writes every WAV plus manifest.json under out_dir.
CorpusManifest generate_corpus(const CorpusConfig& config, const std::filesystem::path& out_dir);

nlohmann::json to_json(const CorpusManifest& m);
void save_manifest(const CorpusManifest& m, const std::filesystem::path& path);
CorpusManifest load_manifest(const std::filesystem::path& path);
// Structural checks: split sizes, unique paths, no unseen speaker in train.
void validate_manifest(const CorpusManifest& m);

}  // namespace devc
