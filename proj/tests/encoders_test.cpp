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

#include <cmath>

#include "devc/encoders.hpp"
#include "devc/error.hpp"
#include "devc/rng.hpp"
#include "test_util.hpp"

namespace devc {
namespace {

using testing::TempDir;

const GeneratorParams& params() {
  static const GeneratorParams p = GeneratorParams::defaults();
  return p;
}

const Encoders& oracle() {
  static const Encoders e = Encoders::oracle(params(), EncoderDims::toy());
  return e;
}

Waveform render(int speaker, Emotion e, std::vector<int> tokens, std::uint64_t seed) {
  return generate_utterance({speaker, e, std::move(tokens), seed}, params()).wav;
}

TEST(OracleContent, InvariantAcrossSpeakerAndEmotion) {
  const std::vector<int> tokens = {0, 3, 1, 4, 0, 6, 2, 0};
  const ContentMatrix ref = oracle().encode_content(render(0, Emotion::kNeutral, tokens, 1));
  for (int s : {1, 2, 3, 5, 6}) {
    for (Emotion e : kAllEmotions) {
      EXPECT_EQ(oracle().encode_content(render(s, e, tokens, 17 + s)).values, ref.values)
          << "speaker " << s << " emotion " << emotion_name(e);
    }
  }
}

TEST(OracleContent, RowsFollowSegmentCount) {
  Waveform w = render(1, Emotion::kNeutral, {0, 1, 2, 0}, 3);
  w.samples.resize(10 * 320 + 17);
  const ContentMatrix m = oracle().encode_content(w);
  EXPECT_EQ(m.values.rows(), 10);
  EXPECT_EQ(m.values.cols(), 16);
}

TEST(OracleContent, OneHotCodes) {
  const OracleFactors& f = *oracle().factors();
  for (int tok = 0; tok < params().vocab_size(); ++tok) {
    const Eigen::VectorXf c = f.content_code(tok);
    EXPECT_FLOAT_EQ(c.sum(), 1.0f);
    EXPECT_FLOAT_EQ(c(tok), 1.0f);
  }
}

TEST(OracleSpeaker, SameCellIdenticalAndUnitNorm) {
  const SpeakerVector a = oracle().encode_speaker(render(2, Emotion::kSad, {0, 1, 2, 3, 4, 5, 0}, 5));
  const SpeakerVector b = oracle().encode_speaker(render(2, Emotion::kSad, {0, 6, 6, 2, 1, 3, 0}, 6));
  EXPECT_EQ(a.values, b.values);
  EXPECT_TRUE(a.unit_norm);
  EXPECT_NEAR(a.values.norm(), 1.0f, 1e-6f);
}

TEST(OracleSpeaker, DistanceOrdering) {
  const OracleFactors& f = *oracle().factors();
  for (int s = 0; s < params().num_speakers(); ++s) {
    double within = 0.0, cross_speaker = std::numeric_limits<double>::max();
    std::size_t n = 0;
    for (Emotion a : kAllEmotions) {
      for (Emotion b : kAllEmotions) {
        if (a == b) continue;
        within += (f.speaker_embedding(s, a).values - f.speaker_embedding(s, b).values).norm();
        ++n;
      }
      for (int o = 0; o < params().num_speakers(); ++o) {
        if (o == s) continue;
        for (Emotion b : kAllEmotions) {
          cross_speaker = std::min<double>(cross_speaker, (f.speaker_embedding(s, a).values - f.speaker_embedding(o, b).values).norm());
        }
      }
    }
    within /= static_cast<double>(n);
    EXPECT_GT(within, 0.0);
    EXPECT_LT(within, cross_speaker) << "speaker " << s;
  }
}

TEST(OracleEmotion, SpeakerIndependentAndDistinct) {
  const std::vector<int> tokens = {0, 2, 4, 6, 1, 3, 0};
  for (Emotion e : kAllEmotions) {
    const EmotionVector ref = oracle().encode_emotion(render(0, e, tokens, 8));
    for (int s = 1; s < params().num_speakers(); ++s) {
      EXPECT_EQ(oracle().encode_emotion(render(s, e, tokens, 8 + s)).values, ref.values);
    }
  }
  const OracleFactors& f = *oracle().factors();
  for (Emotion a : kAllEmotions) {
    for (Emotion b : kAllEmotions) {
      if (a != b) EXPECT_GT((f.emotion_embedding(a).values - f.emotion_embedding(b).values).norm(), 0.1f);
    }
  }
}

TEST(OracleAnalyzer, ClassifiesGeneratedUtterances) {
  int correct = 0, total = 0;
  for (int s = 0; s < params().num_speakers(); ++s) {
    for (Emotion e : kAllEmotions) {
      const std::uint64_t seed = derive_seed(99, {static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(emotion_index(e))});
      const CellEstimate c = oracle().analyzer()->classify(render(s, e, sample_tokens(params(), seed), seed));
      correct += c.speaker == s && c.emotion == e ? 1 : 0;
      ++total;
    }
  }
  EXPECT_GE(correct, total - 1);
}

TEST(Encoders, SampleRateMismatch) {
  Waveform w = render(0, Emotion::kNeutral, {0, 1, 0}, 1);
  w.sample_rate = 8000;
  EXPECT_THROW(oracle().encode_speaker(w), RangeError);
}

EmbeddingStore small_store(int rows, int dc) {
  EmbeddingStore store;
  EmbeddingRecord c;
  c.values = Eigen::MatrixXf::Random(rows, dc);
  c.provenance = "external";
  store.put("u1", EmbeddingKind::kContent, c);
  EmbeddingRecord s;
  s.values = Eigen::RowVectorXf::Random(8).normalized();
  s.speaker = 3;
  s.emotion = "sad";
  store.put("u1", EmbeddingKind::kSpeaker, s);
  EmbeddingRecord e;
  e.values = Eigen::RowVectorXf::Random(4);
  store.put("u1", EmbeddingKind::kEmotion, e);
  return store;
}

TEST(EmbeddingStore, SaveLoadRoundTrip) {
  TempDir dir;
  const EmbeddingStore store = small_store(5, 16);
  save_store(store, dir.path());
  EXPECT_EQ(load_store(dir.path()), store);
  EXPECT_EQ(load_store(dir / "embeddings.json"), store);
}

TEST(EmbeddingStore, EmptyStoreIsValid) {
  TempDir dir;
  save_store(EmbeddingStore{}, dir.path());
  const EmbeddingStore loaded = load_store(dir.path());
  EXPECT_TRUE(loaded.empty());
}

TEST(EmbeddingStore, DeclaredShapeBeyondPayload) {
  TempDir dir;
  EmbeddingStore store;
  EmbeddingRecord r;
  r.values = Eigen::RowVectorXf::Ones(64);
  store.put("x", EmbeddingKind::kEmotion, r);
  save_store(store, dir.path());
  std::ifstream is(dir / "embeddings.json");
  nlohmann::json j = nlohmann::json::parse(is);
  j["records"][0]["cols"] = 128;
  std::ofstream(dir / "embeddings.json") << j.dump();
  EXPECT_THROW(load_store(dir.path()), ShapeError);
}

TEST(EmbeddingStore, MalformedManifest) {
  TempDir dir;
  std::ofstream(dir / "embeddings.json") << "{not json";
  EXPECT_THROW(load_store(dir.path()), DataError);
  EXPECT_THROW(load_store(dir / "nowhere"), MissingFileError);
}

TEST(ExternalBackend, Passthrough) {
  const EmbeddingStore store = small_store(10, 256);
  const EncoderDims dims{256, 8, 4};
  const Encoders enc = Encoders::external(store, dims);
  Waveform w;
  w.samples.assign(3200, 0.0f);
  const auto all = enc.encode_all(w, "u1");
  EXPECT_EQ(all.content.values, store.at("u1", EmbeddingKind::kContent).values);
  EXPECT_EQ(all.speaker.values.transpose(), store.at("u1", EmbeddingKind::kSpeaker).values);
  EXPECT_EQ(all.emotion.values.transpose(), store.at("u1", EmbeddingKind::kEmotion).values);
  EXPECT_TRUE(all.speaker.unit_norm);
}

TEST(ExternalBackend, MissingRecordAndShape) {
  const Encoders enc = Encoders::external(small_store(10, 16), EncoderDims::toy());
  Waveform w;
  w.samples.assign(3200, 0.0f);
  EXPECT_THROW(enc.encode_content(w, "nope"), DataError);
  w.samples.assign(6400, 0.0f);
  EXPECT_THROW(enc.encode_content(w, "u1"), ShapeError);
  const Encoders wide = Encoders::external(small_store(10, 16), EncoderDims{32, 8, 4});
  w.samples.assign(3200, 0.0f);
  EXPECT_THROW(wide.encode_content(w, "u1"), ShapeError);
}

TEST(Encoders, SpeakerMeanIsNormalized) {
  std::vector<Waveform> wavs = {render(1, Emotion::kAngry, {0, 1, 2, 3, 4, 5, 0}, 1),
                                render(1, Emotion::kHappy, {0, 1, 2, 3, 4, 5, 0}, 2)};
  const SpeakerVector m = oracle().encode_speaker_mean(wavs);
  EXPECT_NEAR(m.values.norm(), 1.0f, 1e-6f);
  EXPECT_THROW(oracle().encode_speaker_mean(std::span<const Waveform>{}), DataError);
}

}  // namespace
}  // namespace devc
