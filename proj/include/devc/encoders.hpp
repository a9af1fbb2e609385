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
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "devc/audio.hpp"
#include "devc/embeddings.hpp"
#include "devc/synth.hpp"

namespace devc {

enum class Backend { kOracle, kExternal };
Backend parse_backend(std::string_view name);
std::string_view backend_name(Backend b);

// The oracle's embedding definitions, derived from the generator tables.
//
//  content:  one-hot of the token, zero padded to D_c (fixed random
//            projection when D_c < V).
//  speaker:  normalize(Q_s s + 0.25 |Q_s s| Q_o u), where s are the speaker
//            parameters, u the unit (speaker, emotion) offset direction, and
//            Q_s, Q_o disjoint orthonormal column blocks.
//  emotion:  P e for the shared emotion parameters e, P orthonormal.
class OracleFactors {
 public:
  static constexpr double kOffsetScale = 0.25;

  OracleFactors(GeneratorParams params, EncoderDims dims);

  const GeneratorParams& params() const { return params_; }
  const EncoderDims& dims() const { return dims_; }

  Eigen::VectorXf content_code(int token) const;
  ContentMatrix content_matrix(const std::vector<int>& tokens, std::size_t segments) const;
  SpeakerVector speaker_embedding(int speaker, Emotion emotion) const;
  EmotionVector emotion_embedding(Emotion emotion) const;

 private:
  GeneratorParams params_;
  EncoderDims dims_;
  Eigen::MatrixXd speaker_basis_;  // D_s x 6
  Eigen::MatrixXd emotion_basis_;  // D_e x 4
  Eigen::MatrixXd content_proj_;   // D_c x V (identity-padded when D_c >= V)
};

// Utterance-level acoustic measurements used to invert the generator.
struct AcousticFeatures {
  static constexpr int kCount = 5;
  // median log2 F0, detrended log2 F0 std, F0 slope (oct/s), voiced RMS dB,
  // log2 formant scale.
  std::array<double, kCount> values{};
  bool has_voicing = false;
};

struct CellEstimate {
  int speaker = 0;
  Emotion emotion = Emotion::kNeutral;
  double distance = 0.0;
  double formant_scale = 1.0;
};

// Generator inversion: measures pitch, modulation, level and formant scale,
// then picks the nearest (speaker, emotion) cell centroid. Centroids and
// per-feature spreads are calibrated on utterances rendered by the generator.
class OracleAnalyzer {
 public:
  explicit OracleAnalyzer(GeneratorParams params, int calibration_per_cell = 4);

  AcousticFeatures measure(const Waveform& wav) const;
  CellEstimate classify(const Waveform& wav) const;
  CellEstimate classify(const AcousticFeatures& f) const;
  // One token per token-length block; partial trailing blocks included.
  std::vector<int> decode_tokens(const Waveform& wav, double formant_scale) const;

  const GeneratorParams& params() const { return params_; }

 private:
  // Log harmonic amplitudes of one token block, averaged over its frames.
  struct BlockHarmonics {
    std::vector<double> freq_hz;
    std::vector<double> log_amp;
    std::vector<int> harmonic;
    std::vector<std::size_t> frame_start;
    bool voiced = false;
  };
  std::vector<BlockHarmonics> block_harmonics(const Waveform& wav) const;
  // Residual of the formant model after removing the mean log gain.
  double fit_error(const BlockHarmonics& b, int vowel, double scale) const;
  int nearest_vowel(const BlockHarmonics& b, double scale) const;

  GeneratorParams params_;
  std::vector<double> scale_grid_;
  std::vector<std::array<double, AcousticFeatures::kCount>> centroids_;  // per cell
  std::array<double, AcousticFeatures::kCount> spread_{};
};

// ---------------------------------------------------------------------------
// External embeddings

enum class EmbeddingKind { kContent, kSpeaker, kEmotion };
std::string_view kind_name(EmbeddingKind k);
EmbeddingKind parse_kind(std::string_view name);

struct EmbeddingRecord {
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> values;
  std::string provenance = "oracle";  // oracle | external
  std::optional<int> speaker;
  std::optional<std::string> emotion;
};

// On disk: <dir>/embeddings.json (manifest) + <dir>/embeddings.f32 (payload).
// Each manifest record names id, kind, rows, cols, byte offset; payload is
// row-major little-endian float32.
class EmbeddingStore {
 public:
  void put(const std::string& id, EmbeddingKind kind, EmbeddingRecord record);
  const EmbeddingRecord* find(std::string_view id, EmbeddingKind kind) const;
  const EmbeddingRecord& at(std::string_view id, EmbeddingKind kind) const;
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::vector<std::string> ids(EmbeddingKind kind) const;

  bool operator==(const EmbeddingStore& other) const;

  using Key = std::pair<std::string, EmbeddingKind>;
  const std::map<Key, EmbeddingRecord, std::less<>>& records() const { return records_; }

 private:
  std::map<Key, EmbeddingRecord, std::less<>> records_;
};

void save_store(const EmbeddingStore& store, const std::filesystem::path& dir);
// Accepts the directory or the embeddings.json path.
EmbeddingStore load_store(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Backend facade

class Encoders {
 public:
  static Encoders oracle(const GeneratorParams& params, const EncoderDims& dims);
  static Encoders external(EmbeddingStore store, const EncoderDims& dims, int hop = 320);

  Backend backend() const { return backend_; }
  const EncoderDims& dims() const { return dims_; }
  int hop() const { return hop_; }

  // `utterance_id` selects the record for the external backend; the oracle
  // backend reads only the waveform.
  ContentMatrix encode_content(const Waveform& wav, std::string_view utterance_id = {}) const;
  SpeakerVector encode_speaker(const Waveform& wav, std::string_view utterance_id = {}) const;
  EmotionVector encode_emotion(const Waveform& wav, std::string_view utterance_id = {}) const;

  struct All {
    ContentMatrix content;
    SpeakerVector speaker;
    EmotionVector emotion;
  };
  // All three representations; the oracle classifies the utterance once.
  All encode_all(const Waveform& wav, std::string_view utterance_id = {}) const;

  // Mean of per-utterance speaker vectors, renormalized.
  SpeakerVector encode_speaker_mean(std::span<const Waveform> wavs,
                                    std::span<const std::string> ids = {}) const;

  const OracleAnalyzer* analyzer() const { return analyzer_.get(); }
  const OracleFactors* factors() const { return factors_.get(); }

 private:
  void check_rate(const Waveform& wav) const;

  Backend backend_ = Backend::kOracle;
  EncoderDims dims_;
  int hop_ = 320;
  int sample_rate_ = kCorpusSampleRate;
  std::shared_ptr<const OracleFactors> factors_;
  std::shared_ptr<const OracleAnalyzer> analyzer_;
  std::shared_ptr<const EmbeddingStore> store_;
};

}  // namespace devc
