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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "devc/checkpoint.hpp"
#include "devc/conditioning.hpp"
#include "devc/denoiser.hpp"
#include "devc/encoders.hpp"
#include "devc/synth.hpp"

namespace devc {

struct TrainConfig {
  int steps = 20000;
  int batch_size = 8;
  double learning_rate = 2e-4;
  int crop_segments = 16;
  double waveform_scale = 1.0;
  std::uint64_t seed = 1;
  int checkpoint_every = 2000;
  int log_every = 10;
  double grad_clip = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double memory_budget_mb = 2048.0;
  std::filesystem::path manifest;
  std::filesystem::path embeddings;
  std::filesystem::path out_dir;
  Backend backend = Backend::kOracle;

  // Throws RangeError on non-positive numerics or when one batch of
  // activations would exceed the memory budget.
  void validate(const DecoderConfig& decoder, int hop) const;
  // Rough size of the activations kept for one batch, in MiB.
  double activation_mib(const DecoderConfig& decoder, int hop) const;
};

nlohmann::json to_json(const TrainConfig& c);
// Unknown keys are rejected with UsageError.
void merge_train_config(TrainConfig& c, const nlohmann::json& j);

// One training utterance: waveform plus its frozen conditioning, stored
// column-per-segment (D x S) as the denoiser consumes it.
struct TrainingExample {
  std::string id;
  std::vector<float> wav;
  Eigen::MatrixXf cond;
};

// Runs the encoders over the selected splits of the corpus.
EmbeddingStore embed_corpus(const CorpusManifest& manifest, const Encoders& encoders,
                            const std::vector<Split>& splits);

Conditioning conditioning_for(const EmbeddingStore& store, const std::string& id, const EncoderDims& dims,
                              int hop);

// Train-split utterances of seen speakers, waveforms trimmed to whole hops.
std::vector<TrainingExample> build_training_set(const CorpusManifest& manifest, const EmbeddingStore& store,
                                                const EncoderDims& dims, int hop);

std::uint64_t checksum(const std::vector<TrainingExample>& data);
std::uint64_t checksum(const EmbeddingStore& store);

Checkpoint initial_checkpoint(const DecoderConfig& decoder, const ScheduleSpec& schedule,
                              const EncoderDims& dims, int hop, std::uint64_t seed);

struct StepRecord {
  std::int64_t step = 0;
  double loss = 0.0;
  double wallclock = 0.0;
};

// Owns the decoder and optimizer state. Step k draws everything from
// derive_seed(seed, {k}), so resuming from a checkpoint replays exactly.
class Trainer {
 public:
  Trainer(Checkpoint state, TrainConfig config, const std::vector<TrainingExample>* data);

  // One Adam step on a fresh batch. Throws NumericError on a non-finite loss.
  double step();
  std::int64_t steps_done() const { return state_.step; }
  // Parameters and optimizer state synced into the checkpoint.
  const Checkpoint& state();
  const Denoiser<float>& model() const { return model_; }

 private:
  Checkpoint state_;
  TrainConfig config_;
  const std::vector<TrainingExample>* data_;
  NoiseSchedule schedule_;
  Denoiser<float> model_;
  AlignedVector<float> grad_;
  std::vector<std::size_t> eligible_;
};

struct TrainResult {
  std::filesystem::path checkpoint;
  std::vector<StepRecord> log;
};

// Runs until config.steps total steps, writing <out_dir>/train_log.jsonl,
// periodic <out_dir>/ckpt_<step>.json and <out_dir>/final.json.
TrainResult train(const TrainConfig& config, Checkpoint init, const std::vector<TrainingExample>& data,
                  const std::function<void(const StepRecord&)>& on_log = {});

// ---------------------------------------------------------------------------
// Conversion

enum class EmotionSource { kSource, kReference };
EmotionSource parse_emotion_source(std::string_view name);
std::string_view emotion_source_name(EmotionSource s);

struct ConversionRequest {
  std::filesystem::path source;
  std::filesystem::path reference;
  EmotionSource emotion_source = EmotionSource::kSource;
  std::filesystem::path checkpoint;
  std::filesystem::path output;
  std::uint64_t seed = 0;
};

class Converter {
 public:
  // Throws ShapeError when checkpoint and encoder dims disagree.
  Converter(const Checkpoint& ckpt, Encoders encoders);

  // Output has segment_count(source) * hop samples.
  Waveform convert(const Waveform& source, const Waveform& reference, EmotionSource emotion_source,
                   std::uint64_t seed, std::string_view source_id = {},
                   std::string_view reference_id = {}) const;
  Waveform synthesize(const Conditioning& cond, std::uint64_t seed) const;

  const Encoders& encoders() const { return encoders_; }
  const Denoiser<float>& model() const { return model_; }

 private:
  Denoiser<float> model_;
  NoiseSchedule schedule_;
  Encoders encoders_;
  int hop_;
  double waveform_scale_;
};

// Oracle encoders from the checkpoint's generator, or an external store.
Encoders encoders_for(const Checkpoint& ckpt, const EmbeddingStore* external);

// Loads, converts and writes request.output. External ids are file stems.
Waveform convert(const ConversionRequest& request, const EmbeddingStore* external = nullptr);

}  // namespace devc
