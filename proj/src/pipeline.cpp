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

#include "devc/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <random>

#include "devc/error.hpp"
#include "devc/rng.hpp"
#include "devc/sampler.hpp"

namespace devc {

namespace {

void fnv1a(std::uint64_t& h, const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

}  // namespace

double TrainConfig::activation_mib(const DecoderConfig& d, int hop) const {
  const double samples = static_cast<double>(crop_segments) * hop;
  const double per_sample = 5.0 * d.residual_channels * d.n_residual_blocks + 3.0 * d.residual_channels + 4.0;
  return static_cast<double>(batch_size) * samples * per_sample * sizeof(float) / (1024.0 * 1024.0);
}

void TrainConfig::validate(const DecoderConfig& decoder, int hop) const {
  if (steps < 0) throw RangeError("train: steps must be >= 0");
  if (batch_size <= 0 || crop_segments <= 0 || checkpoint_every <= 0 || log_every <= 0) {
    throw RangeError("train: batch_size, crop_segments, checkpoint_every and log_every must be positive");
  }
  if (!(learning_rate > 0.0) || !(grad_clip > 0.0) || !(adam_epsilon > 0.0) || !(waveform_scale > 0.0)) {
    throw RangeError("train: learning_rate, grad_clip, adam_epsilon and waveform_scale must be positive");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw RangeError("train: Adam betas must lie in [0, 1)");
  }
  const double need = activation_mib(decoder, hop);
  if (need > memory_budget_mb) {
    throw RangeError("train: batch of " + std::to_string(batch_size) + " x " + std::to_string(crop_segments) +
                     " segments needs ~" + std::to_string(static_cast<int>(need)) + " MiB, budget is " +
                     std::to_string(static_cast<int>(memory_budget_mb)) + " MiB");
  }
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"steps", c.steps},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"crop_segments", c.crop_segments},
          {"waveform_scale", c.waveform_scale},
          {"seed", c.seed},
          {"checkpoint_every", c.checkpoint_every},
          {"log_every", c.log_every},
          {"grad_clip", c.grad_clip},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon},
          {"memory_budget_mb", c.memory_budget_mb},
          {"manifest", c.manifest.string()},
          {"embeddings", c.embeddings.string()},
          {"out_dir", c.out_dir.string()},
          {"backend", std::string(backend_name(c.backend))}};
}

void merge_train_config(TrainConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("train config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "steps") c.steps = v;
      else if (key == "batch_size") c.batch_size = v;
      else if (key == "learning_rate") c.learning_rate = v;
      else if (key == "crop_segments") c.crop_segments = v;
      else if (key == "waveform_scale") c.waveform_scale = v;
      else if (key == "seed") c.seed = v;
      else if (key == "checkpoint_every") c.checkpoint_every = v;
      else if (key == "log_every") c.log_every = v;
      else if (key == "grad_clip") c.grad_clip = v;
      else if (key == "adam_beta1") c.adam_beta1 = v;
      else if (key == "adam_beta2") c.adam_beta2 = v;
      else if (key == "adam_epsilon") c.adam_epsilon = v;
      else if (key == "memory_budget_mb") c.memory_budget_mb = v;
      else if (key == "manifest") c.manifest = v.get<std::string>();
      else if (key == "embeddings") c.embeddings = v.get<std::string>();
      else if (key == "out_dir") c.out_dir = v.get<std::string>();
      else if (key == "backend") c.backend = parse_backend(v.get<std::string>());
      else throw UsageError("unknown train config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad train config value: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

EmbeddingStore embed_corpus(const CorpusManifest& manifest, const Encoders& encoders,
                            const std::vector<Split>& splits) {
  EmbeddingStore store;
  const std::string provenance(backend_name(encoders.backend()));
  for (const auto& u : manifest.utterances) {
    if (std::find(splits.begin(), splits.end(), u.split) == splits.end()) continue;
    const Waveform wav = read_wav(manifest.wav_path(u));
    const auto all = encoders.encode_all(wav, u.id);
    auto put = [&](EmbeddingKind kind, const Eigen::MatrixXf& m) {
      EmbeddingRecord r;
      r.values = m;
      r.provenance = provenance;
      r.speaker = u.speaker;
      r.emotion = std::string(emotion_name(u.emotion));
      store.put(u.id, kind, std::move(r));
    };
    put(EmbeddingKind::kContent, all.content.values);
    put(EmbeddingKind::kSpeaker, all.speaker.values.transpose());
    put(EmbeddingKind::kEmotion, all.emotion.values.transpose());
  }
  return store;
}

Conditioning conditioning_for(const EmbeddingStore& store, const std::string& id, const EncoderDims& dims,
                              int hop) {
  ContentMatrix content;
  content.values = store.at(id, EmbeddingKind::kContent).values;
  content.hop = hop;
  const auto& s = store.at(id, EmbeddingKind::kSpeaker).values;
  const auto& e = store.at(id, EmbeddingKind::kEmotion).values;
  SpeakerVector sv{Eigen::Map<const Eigen::VectorXf>(s.data(), s.size()), true};
  EmotionVector ev{Eigen::Map<const Eigen::VectorXf>(e.data(), e.size())};
  return assemble_conditioning(content, sv, ev, dims);
}

std::vector<TrainingExample> build_training_set(const CorpusManifest& manifest, const EmbeddingStore& store,
                                                const EncoderDims& dims, int hop) {
  std::vector<TrainingExample> out;
  for (const auto* u : manifest.select(std::nullopt, std::nullopt, Split::kTrain)) {
    if (!manifest.speaker_seen(u->speaker)) continue;
    Waveform wav = read_wav(manifest.wav_path(*u));
    const std::size_t segs = segment_count(wav.size(), hop);
    const Conditioning c = conditioning_for(store, u->id, dims, hop);
    if (static_cast<std::size_t>(c.segments()) != segs) {
      throw ShapeError("embedding for " + u->id + " has " + std::to_string(c.segments()) +
                       " segments, waveform has " + std::to_string(segs));
    }
    wav.samples.resize(segs * static_cast<std::size_t>(hop));
    out.push_back({u->id, std::move(wav.samples), c.values.transpose()});
  }
  if (out.empty()) throw DataError("training set is empty (no train-split utterances of seen speakers)");
  return out;
}

std::uint64_t checksum(const std::vector<TrainingExample>& data) {
  std::uint64_t h = kFnvOffset;
  for (const auto& d : data) {
    fnv1a(h, d.id.data(), d.id.size());
    fnv1a(h, d.cond.data(), static_cast<std::size_t>(d.cond.size()) * sizeof(float));
  }
  return h;
}

std::uint64_t checksum(const EmbeddingStore& store) {
  std::uint64_t h = kFnvOffset;
  for (const auto& [key, rec] : store.records()) {
    fnv1a(h, key.first.data(), key.first.size());
    const int kind = static_cast<int>(key.second);
    fnv1a(h, &kind, sizeof(kind));
    fnv1a(h, rec.values.data(), static_cast<std::size_t>(rec.values.size()) * sizeof(float));
  }
  return h;
}

Checkpoint initial_checkpoint(const DecoderConfig& decoder, const ScheduleSpec& schedule,
                              const EncoderDims& dims, int hop, std::uint64_t seed) {
  Checkpoint c;
  c.decoder = decoder;
  c.schedule = schedule;
  c.dims = dims;
  c.hop = hop;
  c.seed = seed;
  Denoiser<float> model(decoder);
  model.initialize(derive_seed(seed, {0x1417}));
  c.parameters.assign(model.parameters().begin(), model.parameters().end());
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

Trainer::Trainer(Checkpoint state, TrainConfig config, const std::vector<TrainingExample>* data)
    : state_(std::move(state)),
      config_(std::move(config)),
      data_(data),
      schedule_(state_.schedule.build()),
      model_(state_.decoder) {
  state_.validate();
  config_.validate(state_.decoder, state_.hop);
  std::copy(state_.parameters.begin(), state_.parameters.end(), model_.parameters().begin());
  grad_.assign(model_.num_parameters(), 0.0f);
  if (state_.step == 0) {
    state_.waveform_scale = config_.waveform_scale;
  } else if (state_.waveform_scale != config_.waveform_scale) {
    throw UsageError("resumed checkpoint was trained with waveform_scale " + std::to_string(state_.waveform_scale));
  }
  if (!state_.optimizer) {
    state_.optimizer = AdamState{std::vector<float>(grad_.size(), 0.0f), std::vector<float>(grad_.size(), 0.0f), 0};
  }
  for (std::size_t i = 0; i < data_->size(); ++i) {
    const auto& d = (*data_)[i];
    if (d.cond.rows() != state_.dims.total()) throw ShapeError("training example " + d.id + ": conditioning width mismatch");
    if (d.cond.cols() >= config_.crop_segments) eligible_.push_back(i);
  }
  if (eligible_.empty()) {
    throw DataError("no training utterance is at least " + std::to_string(config_.crop_segments) + " segments long");
  }
}

double Trainer::step() {
  const std::int64_t k = state_.step;
  Rng rng(derive_seed(config_.seed, {static_cast<std::uint64_t>(k)}));
  std::uniform_int_distribution<std::size_t> pick(0, eligible_.size() - 1);
  std::uniform_int_distribution<int> step_dist(1, schedule_.steps());
  std::normal_distribution<float> n01(0.0f, 1.0f);

  const auto hop = static_cast<std::size_t>(state_.hop);
  const auto seg = static_cast<Eigen::Index>(config_.crop_segments);
  const std::size_t len = static_cast<std::size_t>(seg) * hop;
  std::vector<float> x0(len), eps(len), xt(len), pred(len), dout(len);
  const auto scale = static_cast<float>(state_.waveform_scale);
  Denoiser<float>::Trace trace;
  std::fill(grad_.begin(), grad_.end(), 0.0f);
  const float inv_b = 1.0f / static_cast<float>(config_.batch_size);
  double loss = 0.0;

  for (int b = 0; b < config_.batch_size; ++b) {
    const auto& ex = (*data_)[eligible_[pick(rng)]];
    std::uniform_int_distribution<Eigen::Index> start_dist(0, ex.cond.cols() - seg);
    const Eigen::Index s0 = start_dist(rng);
    const int t = step_dist(rng);
    for (auto& e : eps) e = n01(rng);
    const float* clean = ex.wav.data() + static_cast<std::size_t>(s0) * hop;
    for (std::size_t i = 0; i < len; ++i) x0[i] = scale * clean[i];
    forward_sample<float>(x0, t, eps, schedule_, xt);
    const Eigen::MatrixXf cond = ex.cond.middleCols(s0, seg);
    model_.forward(xt, t, cond, pred, trace);
    double item = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const float d = pred[i] - eps[i];
      item += static_cast<double>(d) * d;
      dout[i] = 2.0f * d * inv_b;
    }
    loss += item / config_.batch_size;
    model_.backward(trace, dout, grad_);
  }
  if (!std::isfinite(loss)) {
    throw NumericError("non-finite training loss at step " + std::to_string(k));
  }

  double norm2 = 0.0;
  for (float g : grad_) norm2 += static_cast<double>(g) * g;
  const double norm = std::sqrt(norm2);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm at step " + std::to_string(k));
  const float clip = norm > config_.grad_clip ? static_cast<float>(config_.grad_clip / norm) : 1.0f;

  AdamState& a = *state_.optimizer;
  ++a.step;
  const double b1 = config_.adam_beta1, b2 = config_.adam_beta2;
  const double lr_t = config_.learning_rate * std::sqrt(1.0 - std::pow(b2, static_cast<double>(a.step))) /
                      (1.0 - std::pow(b1, static_cast<double>(a.step)));
  const auto fb1 = static_cast<float>(b1), fb2 = static_cast<float>(b2);
  const auto flr = static_cast<float>(lr_t), feps = static_cast<float>(config_.adam_epsilon);
  auto theta = model_.parameters();
  for (std::size_t i = 0; i < grad_.size(); ++i) {
    const float g = grad_[i] * clip;
    a.m[i] = fb1 * a.m[i] + (1.0f - fb1) * g;
    a.v[i] = fb2 * a.v[i] + (1.0f - fb2) * g * g;
    theta[i] -= flr * a.m[i] / (std::sqrt(a.v[i]) + feps);
  }
  ++state_.step;
  return loss;
}

const Checkpoint& Trainer::state() {
  state_.parameters.assign(model_.parameters().begin(), model_.parameters().end());
  state_.seed = config_.seed;
  state_.train_config = to_json(config_);
  return state_;
}

TrainResult train(const TrainConfig& config, Checkpoint init, const std::vector<TrainingExample>& data,
                  const std::function<void(const StepRecord&)>& on_log) {
  const std::uint64_t before = checksum(data);
  if (init.conditioning_checksum == 0 || init.step == 0) init.conditioning_checksum = before;
  Trainer trainer(std::move(init), config, &data);
  TrainResult result;
  std::filesystem::create_directories(config.out_dir);
  std::ofstream log(config.out_dir / "train_log.jsonl",
                    trainer.steps_done() > 0 ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot write training log in " + config.out_dir.string());

  const auto t0 = std::chrono::steady_clock::now();
  while (trainer.steps_done() < config.steps) {
    const double loss = trainer.step();
    const StepRecord rec{trainer.steps_done(), loss,
                         std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
    result.log.push_back(rec);
    if (rec.step % config.log_every == 0 || rec.step == config.steps) {
      log << nlohmann::json{{"step", rec.step}, {"loss", rec.loss}, {"wallclock", rec.wallclock}}.dump() << '\n';
      log.flush();
      if (on_log) on_log(rec);
    }
    if (rec.step % config.checkpoint_every == 0 && rec.step != config.steps) {
      save_checkpoint(trainer.state(), config.out_dir / ("ckpt_" + std::to_string(rec.step) + ".json"));
    }
  }
  if (checksum(data) != before) throw Error("encoder outputs changed during training");
  const Checkpoint& final_state = trainer.state();
  if (final_state.conditioning_checksum != before) {
    throw DataError("checkpoint was trained on different conditioning than the supplied embeddings");
  }
  result.checkpoint = config.out_dir / "final.json";
  save_checkpoint(final_state, result.checkpoint);
  return result;
}

// ---------------------------------------------------------------------------

EmotionSource parse_emotion_source(std::string_view name) {
  if (name == "source") return EmotionSource::kSource;
  if (name == "reference") return EmotionSource::kReference;
  throw UsageError("emotion source must be 'source' or 'reference', got '" + std::string(name) + "'");
}

std::string_view emotion_source_name(EmotionSource s) {
  return s == EmotionSource::kSource ? "source" : "reference";
}

Converter::Converter(const Checkpoint& ckpt, Encoders encoders)
    : model_(ckpt.decoder),
      schedule_(ckpt.schedule.build()),
      encoders_(std::move(encoders)),
      hop_(ckpt.hop),
      waveform_scale_(ckpt.waveform_scale) {
  ckpt.validate();
  if (!(encoders_.dims() == ckpt.dims)) {
    throw ShapeError("checkpoint encoder dims (" + std::to_string(ckpt.dims.content) + "/" +
                     std::to_string(ckpt.dims.speaker) + "/" + std::to_string(ckpt.dims.emotion) +
                     ") do not match the encoders (" + std::to_string(encoders_.dims().content) + "/" +
                     std::to_string(encoders_.dims().speaker) + "/" + std::to_string(encoders_.dims().emotion) +
                     ")");
  }
  if (encoders_.hop() != hop_) throw ShapeError("checkpoint hop does not match the encoders");
  std::copy(ckpt.parameters.begin(), ckpt.parameters.end(), model_.parameters().begin());
}

Waveform Converter::synthesize(const Conditioning& cond, std::uint64_t seed) const {
  if (cond.segments() == 0) throw DataError("cannot synthesize zero segments");
  const Eigen::MatrixXf c = cond.values.transpose();
  if (c.rows() != model_.config().conditioning_dim) throw ShapeError("conditioning width does not match the decoder");
  const std::size_t len = static_cast<std::size_t>(cond.segments()) * static_cast<std::size_t>(hop_);
  auto predict = [&](std::span<const float> xt, int t, std::span<float> out) { model_.forward(xt, t, c, out); };
  Waveform out;
  out.samples = reverse_sample<float>(len, schedule_, predict, seed);
  const auto inv = static_cast<float>(1.0 / waveform_scale_);
  for (float& v : out.samples) {
    if (!std::isfinite(v)) throw NumericError("reverse sampling produced non-finite samples");
    v *= inv;
  }
  return out;
}

Waveform Converter::convert(const Waveform& source, const Waveform& reference, EmotionSource emotion_source,
                            std::uint64_t seed, std::string_view source_id,
                            std::string_view reference_id) const {
  const std::size_t segs = segment_count(source.size(), hop_);
  if (segs == 0) throw DataError("source utterance is shorter than one hop");
  const auto src = encoders_.encode_all(source, source_id);
  const auto ref = encoders_.encode_all(reference, reference_id);
  const EmotionVector& emo = emotion_source == EmotionSource::kSource ? src.emotion : ref.emotion;
  return synthesize(assemble_conditioning(src.content, ref.speaker, emo, encoders_.dims()), seed);
}

Encoders encoders_for(const Checkpoint& ckpt, const EmbeddingStore* external) {
  if (ckpt.backend == Backend::kExternal) {
    if (external == nullptr) throw UsageError("checkpoint uses external embeddings; pass an embedding store");
    return Encoders::external(*external, ckpt.dims, ckpt.hop);
  }
  if (!ckpt.generator) throw DataError("oracle checkpoint carries no generator parameters");
  return Encoders::oracle(*ckpt.generator, ckpt.dims);
}

Waveform convert(const ConversionRequest& request, const EmbeddingStore* external) {
  const Checkpoint ckpt = load_checkpoint(request.checkpoint);
  const Converter converter(ckpt, encoders_for(ckpt, external));
  const Waveform source = read_wav(request.source);
  const Waveform reference = read_wav(request.reference);
  Waveform out = converter.convert(source, reference, request.emotion_source, request.seed,
                                   request.source.stem().string(), request.reference.stem().string());
  write_wav(out, request.output);
  return out;
}

}  // namespace devc
