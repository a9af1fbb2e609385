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

#include <gtest/gtest.h>

#include <memory>
#include <numeric>

#include "devc/error.hpp"
#include "devc/pipeline.hpp"
#include "test_util.hpp"

namespace devc {
namespace {

using testing::TempDir;

class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    CorpusConfig cc;
    cc.train_per_cell = 2;
    cc.reference_per_cell = 1;
    cc.test_per_cell = 1;
    manifest_ = new CorpusManifest(generate_corpus(cc, dir_->path() / "corpus"));
    encoders_ = new Encoders(Encoders::oracle(cc.generator, EncoderDims::toy()));
    store_ = new EmbeddingStore(embed_corpus(*manifest_, *encoders_, {Split::kTrain, Split::kTest}));
    data_ = new std::vector<TrainingExample>(build_training_set(*manifest_, *store_, EncoderDims::toy(), 320));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete store_;
    delete encoders_;
    delete manifest_;
    delete dir_;
  }

  static Checkpoint init() {
    Checkpoint c = initial_checkpoint(DecoderConfig::toy(28), {}, EncoderDims::toy(), 320, 1);
    c.generator = manifest_->config.generator;
    return c;
  }
  static TrainConfig small(int steps) {
    TrainConfig tc;
    tc.steps = steps;
    tc.batch_size = 2;
    tc.crop_segments = 2;
    tc.learning_rate = 1e-3;
    return tc;
  }

  static TempDir* dir_;
  static CorpusManifest* manifest_;
  static Encoders* encoders_;
  static EmbeddingStore* store_;
  static std::vector<TrainingExample>* data_;
};

TempDir* PipelineTest::dir_ = nullptr;
CorpusManifest* PipelineTest::manifest_ = nullptr;
Encoders* PipelineTest::encoders_ = nullptr;
EmbeddingStore* PipelineTest::store_ = nullptr;
std::vector<TrainingExample>* PipelineTest::data_ = nullptr;

TEST_F(PipelineTest, TrainingSetHoldsSeenSpeakersOnly) {
  EXPECT_EQ(data_->size(), 4u * 4u * 2u);
  for (const auto& ex : *data_) {
    const auto* u = manifest_->find(ex.id);
    ASSERT_NE(u, nullptr);
    EXPECT_TRUE(manifest_->speaker_seen(u->speaker));
    EXPECT_EQ(ex.wav.size(), static_cast<std::size_t>(ex.cond.cols()) * 320);
    EXPECT_EQ(ex.cond.rows(), 28);
  }
}

TEST_F(PipelineTest, ZeroStepsKeepsInitialization) {
  TrainConfig tc = small(0);
  tc.out_dir = dir_->path() / "zero";
  const Checkpoint c0 = init();
  const TrainResult r = train(tc, c0, *data_);
  const Checkpoint c1 = load_checkpoint(r.checkpoint);
  EXPECT_EQ(c1.step, 0);
  EXPECT_EQ(c1.parameters, c0.parameters);
}

TEST_F(PipelineTest, ResumeReplaysTheUnbrokenRun) {
  const TrainConfig tc = small(6);
  Trainer full(init(), tc, data_);
  std::vector<double> unbroken;
  for (int k = 0; k < 6; ++k) unbroken.push_back(full.step());

  Trainer first(init(), tc, data_);
  std::vector<double> resumed;
  for (int k = 0; k < 3; ++k) resumed.push_back(first.step());
  TempDir d;
  save_checkpoint(first.state(), d.path() / "mid.json");
  Trainer second(load_checkpoint(d.path() / "mid"), tc, data_);
  EXPECT_EQ(second.steps_done(), 3);
  for (int k = 0; k < 3; ++k) resumed.push_back(second.step());

  EXPECT_EQ(resumed, unbroken);
  EXPECT_EQ(second.state().parameters, full.state().parameters);
  EXPECT_EQ(second.state().optimizer->m, full.state().optimizer->m);
}

TEST_F(PipelineTest, CheckpointRoundTrip) {
  Trainer t(init(), small(2), data_);
  t.step();
  t.step();
  const Checkpoint a = t.state();
  TempDir d;
  save_checkpoint(a, d.path() / "c.json");
  EXPECT_TRUE(std::filesystem::exists(d.path() / "c.bin"));
  const Checkpoint b = load_checkpoint(d.path() / "c.json");
  EXPECT_EQ(b.step, 2);
  EXPECT_EQ(b.seed, a.seed);
  EXPECT_EQ(b.dims, a.dims);
  EXPECT_EQ(b.schedule, a.schedule);
  EXPECT_EQ(b.hop, a.hop);
  EXPECT_EQ(b.decoder.n_residual_blocks, a.decoder.n_residual_blocks);
  EXPECT_EQ(b.decoder.conditioning_dim, a.decoder.conditioning_dim);
  EXPECT_EQ(b.parameters, a.parameters);
  ASSERT_TRUE(b.optimizer.has_value());
  EXPECT_EQ(b.optimizer->m, a.optimizer->m);
  EXPECT_EQ(b.optimizer->v, a.optimizer->v);
  EXPECT_EQ(b.optimizer->step, a.optimizer->step);
  ASSERT_TRUE(b.generator.has_value());
  EXPECT_EQ(to_json(*b.generator), to_json(*a.generator));
  EXPECT_THROW(load_checkpoint(d.path() / "missing.json"), DataError);
}

TEST_F(PipelineTest, UntrainedLossMatchesCropDimension) {
  TrainConfig tc = small(1);
  tc.batch_size = 8;
  tc.crop_segments = 4;
  double acc = 0.0;
  const int trials = 8;
  for (int k = 0; k < trials; ++k) {
    tc.seed = 100 + static_cast<std::uint64_t>(k);
    Trainer t(init(), tc, data_);
    acc += t.step();
  }
  EXPECT_NEAR(acc / trials / (4.0 * 320.0), 1.0, 0.05);
}

TEST_F(PipelineTest, EncodersStayFrozen) {
  const auto before_data = checksum(*data_);
  const auto before_store = checksum(*store_);
  Trainer t(init(), small(3), data_);
  for (int k = 0; k < 3; ++k) t.step();
  EXPECT_EQ(checksum(*data_), before_data);
  EXPECT_EQ(checksum(*store_), before_store);
}

TEST_F(PipelineTest, OverfitsOneUtterance) {
  std::vector<TrainingExample> one(data_->begin(), data_->begin() + 1);
  TrainConfig tc;
  tc.steps = 2000;
  tc.batch_size = 4;
  tc.crop_segments = 2;
  tc.learning_rate = 1e-3;
  Trainer t(init(), tc, &one);
  std::vector<double> loss;
  for (int k = 0; k < tc.steps; ++k) loss.push_back(t.step());
  const double first = std::accumulate(loss.begin(), loss.begin() + 20, 0.0) / 20.0;
  const double last = std::accumulate(loss.end() - 200, loss.end(), 0.0) / 200.0;
  EXPECT_LT(last, 0.1 * first) << "first " << first << " last " << last;
}

TEST_F(PipelineTest, ConfigValidation) {
  const DecoderConfig dc = DecoderConfig::toy(28);
  TrainConfig tc;
  EXPECT_NO_THROW(tc.validate(dc, 320));
  tc.batch_size = 0;
  EXPECT_THROW(tc.validate(dc, 320), RangeError);
  tc = TrainConfig{};
  tc.learning_rate = -1.0;
  EXPECT_THROW(tc.validate(dc, 320), RangeError);
  tc = TrainConfig{};
  tc.crop_segments = 100000;
  EXPECT_THROW(tc.validate(dc, 320), RangeError);

  TrainConfig merged;
  merge_train_config(merged, {{"steps", 5}, {"batch_size", 3}});
  EXPECT_EQ(merged.steps, 5);
  EXPECT_EQ(merged.batch_size, 3);
  EXPECT_THROW(merge_train_config(merged, {{"stepz", 5}}), UsageError);
}

TEST_F(PipelineTest, ConversionLengthDependsOnSourceOnly) {
  const Converter conv(init(), *encoders_);
  auto utt = [](std::size_t len) {
    SynthUtteranceSpec s{0, Emotion::kNeutral, {0, 1, 2, 0}, 3};
    Waveform w = generate_utterance(s, GeneratorParams::defaults()).wav;
    w.samples.resize(len);
    return w;
  };
  for (std::size_t len : {320u, 639u, 640u, 1000u}) {
    for (std::size_t ref : {700u, 2000u}) {
      EXPECT_EQ(conv.convert(utt(len), utt(ref), EmotionSource::kSource, 1).size(), len / 320 * 320);
    }
  }
}

TEST_F(PipelineTest, ConversionErrors) {
  const Converter conv(init(), *encoders_);
  Waveform tiny;
  tiny.samples.assign(319, 0.01f);
  Waveform ok;
  ok.samples.assign(960, 0.01f);
  EXPECT_THROW(conv.convert(tiny, ok, EmotionSource::kSource, 1), DataError);

  Checkpoint wide = initial_checkpoint(DecoderConfig::toy(36), {}, EncoderDims{16, 16, 4}, 320, 1);
  wide.generator = manifest_->config.generator;
  EXPECT_THROW(Converter(wide, *encoders_), ShapeError);
}

TEST_F(PipelineTest, ConversionIsDeterministic) {
  TempDir d;
  save_checkpoint(init(), d.path() / "ckpt.json");
  const auto* src = manifest_->select(0, Emotion::kHappy, Split::kTest).front();
  const auto* ref = manifest_->select(5, Emotion::kSad, Split::kTest).front();
  ConversionRequest req;
  req.source = manifest_->wav_path(*src);
  req.reference = manifest_->wav_path(*ref);
  req.checkpoint = d.path() / "ckpt.json";
  req.seed = 9;
  req.output = d.path() / "a.wav";
  convert(req);
  req.output = d.path() / "b.wav";
  convert(req);
  req.seed = 10;
  req.output = d.path() / "c.wav";
  convert(req);
  EXPECT_EQ(testing::read_bytes(d.path() / "a.wav"), testing::read_bytes(d.path() / "b.wav"));
  EXPECT_NE(testing::read_bytes(d.path() / "a.wav"), testing::read_bytes(d.path() / "c.wav"));
}

}  // namespace
}  // namespace devc
