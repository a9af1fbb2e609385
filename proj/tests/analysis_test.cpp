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

#include <algorithm>
#include <fstream>

#include "devc/analysis.hpp"
#include "devc/error.hpp"
#include "devc/rng.hpp"
#include "test_util.hpp"

namespace devc {
namespace {

using Grid = std::array<std::array<double, kNumEmotions>, kNumEmotions>;

// Rows and columns given in display order.
Grid from_display(const std::array<std::array<double, 4>, 4>& shown) {
  Grid g{};
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      g[static_cast<std::size_t>(emotion_index(kTableOrder[r]))]
       [static_cast<std::size_t>(emotion_index(kTableOrder[c]))] = shown[r][c];
    }
  }
  return g;
}

const std::array<std::array<double, 4>, 4> kPublished = {{
    {0.670, 0.724, 0.761, 0.739},
    {0.722, 0.719, 0.773, 0.754},
    {0.753, 0.765, 0.676, 0.703},
    {0.729, 0.751, 0.705, 0.667},
}};

TEST(Dominance, PublishedTableIsDominant) {
  const DominanceReport r = diagonal_dominance(from_display(kPublished));
  EXPECT_TRUE(r.dominant);
  EXPECT_TRUE(r.violations.empty());
}

TEST(Dominance, OneCellBelowDiagonal) {
  auto shown = kPublished;
  shown[1][3] = 0.700;  // happy row, sad column
  const DominanceReport r = diagonal_dominance(from_display(shown));
  EXPECT_FALSE(r.dominant);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_NE(r.violations[0].find("happy, sad"), std::string::npos) << r.violations[0];
}

TEST(Dominance, ColumnViolation) {
  auto shown = kPublished;
  shown[0][2] = 0.672;  // below the neutral diagonal in its column only
  const DominanceReport r = diagonal_dominance(from_display(shown));
  EXPECT_FALSE(r.dominant);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_NE(r.violations[0].find("column neutral"), std::string::npos) << r.violations[0];
}

TEST(Dominance, TiesAreNotDominant) {
  Grid g{};
  for (auto& row : g) row.fill(0.5);
  const DominanceReport r = diagonal_dominance(g);
  EXPECT_FALSE(r.dominant);
  EXPECT_EQ(r.violations.size(), 24u);
}

std::vector<LabeledEmbedding> make_set(const std::array<Eigen::VectorXf, kNumEmotions>& centers, int per_emotion,
                                       float noise, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<float> n(0.0f, noise);
  std::vector<LabeledEmbedding> out;
  for (Emotion e : kAllEmotions) {
    for (int k = 0; k < per_emotion; ++k) {
      Eigen::VectorXf v = centers[static_cast<std::size_t>(emotion_index(e))];
      for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += n(rng);
      out.push_back({std::string(emotion_name(e)) + std::to_string(k), e, v});
    }
  }
  return out;
}

TEST(DistanceTable, IdenticalEmbeddingsGiveZeros) {
  std::array<Eigen::VectorXf, kNumEmotions> c;
  c.fill(Eigen::VectorXf::Constant(6, 0.3f));
  const auto set = make_set(c, 5, 0.0f, 1);
  const DistanceTable t = distance_table(set, 2, 9);
  EXPECT_EQ(t.speaker, 2);
  EXPECT_EQ(t.group_size, 8u);
  for (auto n : t.per_emotion) EXPECT_EQ(n, 2u);
  for (const auto& row : t.values) {
    for (double v : row) EXPECT_EQ(v, 0.0);
  }
  EXPECT_FALSE(diagonal_dominance(t).dominant);
}

TEST(DistanceTable, TwoClusterConstruction) {
  // Angry and Happy share one point, Neutral and Sad another, 3 apart.
  std::array<Eigen::VectorXf, kNumEmotions> c;
  const Eigen::VectorXf p = Eigen::VectorXf::Zero(4), q = Eigen::VectorXf::Unit(4, 0) * 3.0f;
  c[static_cast<std::size_t>(emotion_index(Emotion::kAngry))] = p;
  c[static_cast<std::size_t>(emotion_index(Emotion::kHappy))] = p;
  c[static_cast<std::size_t>(emotion_index(Emotion::kNeutral))] = q;
  c[static_cast<std::size_t>(emotion_index(Emotion::kSad))] = q;
  const DistanceTable t = distance_table(make_set(c, 4, 0.0f, 2), 0, 3);
  const auto a = static_cast<std::size_t>(emotion_index(Emotion::kAngry));
  const auto h = static_cast<std::size_t>(emotion_index(Emotion::kHappy));
  const auto n = static_cast<std::size_t>(emotion_index(Emotion::kNeutral));
  EXPECT_EQ(t.values[a][h], 0.0);
  EXPECT_NEAR(t.values[a][n], 3.0, 1e-6);
  EXPECT_NEAR(t.values[n][h], 3.0, 1e-6);
  EXPECT_FALSE(diagonal_dominance(t).dominant);
}

TEST(DistanceTable, SeparatedClustersAreDominant) {
  std::array<Eigen::VectorXf, kNumEmotions> c;
  for (int e = 0; e < kNumEmotions; ++e) c[static_cast<std::size_t>(e)] = Eigen::VectorXf::Unit(8, e);
  const DistanceTable t = distance_table(make_set(c, 11, 0.05f, 4), 1, 5);
  EXPECT_EQ(t.group_size, 20u);
  EXPECT_TRUE(diagonal_dominance(t).dominant);
}

TEST(DistanceTable, InterleavingDoesNotMatter) {
  std::array<Eigen::VectorXf, kNumEmotions> c;
  for (int e = 0; e < kNumEmotions; ++e) c[static_cast<std::size_t>(e)] = Eigen::VectorXf::Unit(5, e);
  const auto set = make_set(c, 6, 0.2f, 6);
  const DistanceTable a = distance_table(set, 0, 7);
  // Round-robin over emotions, keeping each emotion's own order.
  std::vector<LabeledEmbedding> mixed;
  for (int k = 0; k < 6; ++k) {
    for (int e = kNumEmotions - 1; e >= 0; --e) mixed.push_back(set[static_cast<std::size_t>(e * 6 + k)]);
  }
  const DistanceTable b = distance_table(mixed, 0, 7);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(distance_table(set, 0, 8).values, a.values);
}

TEST(DistanceTable, ZeroSpreadClustersIgnoreTheSplit) {
  std::array<Eigen::VectorXf, kNumEmotions> c;
  for (int e = 0; e < kNumEmotions; ++e) c[static_cast<std::size_t>(e)] = Eigen::VectorXf::Unit(4, e) * (1.0f + e);
  const auto set = make_set(c, 5, 0.0f, 1);
  const DistanceTable a = distance_table(set, 0, 1), b = distance_table(set, 0, 99);
  for (std::size_t i = 0; i < kNumEmotions; ++i) {
    for (std::size_t j = 0; j < kNumEmotions; ++j) {
      EXPECT_NEAR(a.values[i][j], (c[i] - c[j]).norm(), 1e-6);
      EXPECT_EQ(a.values[i][j], b.values[i][j]);
    }
  }
}

TEST(DistanceTable, TooFewUtterances) {
  std::array<Eigen::VectorXf, kNumEmotions> c;
  c.fill(Eigen::VectorXf::Zero(3));
  auto set = make_set(c, 2, 0.0f, 1);
  set.erase(std::remove_if(set.begin(), set.end(), [](const auto& u) { return u.id == "sad1"; }), set.end());
  EXPECT_THROW(distance_table(set, 0, 1), DataError);
}

TEST(DistanceTable, JsonAndText) {
  std::array<Eigen::VectorXf, kNumEmotions> c;
  for (int e = 0; e < kNumEmotions; ++e) c[static_cast<std::size_t>(e)] = Eigen::VectorXf::Unit(4, e);
  const DistanceTable t = distance_table(make_set(c, 4, 0.1f, 3), 3, 1);
  const auto j = to_json(t);
  EXPECT_EQ(j["speaker"], 3);
  EXPECT_EQ(j["distances"].size(), 4u);
  const std::string text = format_table(t);
  for (Emotion e : kAllEmotions) EXPECT_NE(text.find(std::string(emotion_name(e))), std::string::npos);
}

EmbeddingStore emotion_store(int speakers, int per_speaker, Eigen::Index dim) {
  EmbeddingStore store;
  Rng rng(11);
  std::normal_distribution<float> n;
  for (int s = 0; s < speakers; ++s) {
    for (int k = 0; k < per_speaker; ++k) {
      EmbeddingRecord r;
      r.values.resize(1, dim);
      for (Eigen::Index i = 0; i < dim; ++i) r.values(0, i) = n(rng);
      r.speaker = s;
      r.emotion = std::string(emotion_name(kAllEmotions[static_cast<std::size_t>(k % kNumEmotions)]));
      store.put("s" + std::to_string(s) + "_" + std::to_string(k), EmbeddingKind::kEmotion, std::move(r));
    }
  }
  return store;
}

TEST(Export, FiftyPerSpeakerRoundTrip) {
  testing::TempDir dir;
  const EmbeddingStore store = emotion_store(8, 50, 16);
  const auto ids = store.ids(EmbeddingKind::kEmotion);
  ASSERT_EQ(ids.size(), 400u);
  const auto path = dir.path() / "emotion.tsv";
  export_embeddings(store, ids, EmbeddingKind::kEmotion, path);
  EXPECT_TRUE(std::filesystem::exists(path.string() + ".json"));

  const auto rows = import_embeddings(path);
  ASSERT_EQ(rows.size(), 400u);
  std::map<int, int> per_speaker;
  for (const auto& row : rows) {
    ++per_speaker[row.speaker];
    const auto& rec = store.at(row.id, EmbeddingKind::kEmotion);
    ASSERT_EQ(row.values.size(), 16u);
    EXPECT_EQ(row.emotion, *rec.emotion);
    for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(row.values[i], rec.values(0, static_cast<Eigen::Index>(i)));
  }
  EXPECT_EQ(per_speaker.size(), 8u);
  for (const auto& [s, n] : per_speaker) EXPECT_EQ(n, 50);
}

TEST(Export, EmptyIsHeaderOnly) {
  testing::TempDir dir;
  const auto path = dir.path() / "empty.tsv";
  export_embeddings(EmbeddingStore{}, {}, EmbeddingKind::kSpeaker, path);
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 1);
  EXPECT_TRUE(import_embeddings(path).empty());
}

TEST(Export, UnknownId) {
  testing::TempDir dir;
  const EmbeddingStore store = emotion_store(1, 2, 4);
  EXPECT_THROW(export_embeddings(store, {"nope"}, EmbeddingKind::kEmotion, dir.path() / "x.tsv"), DataError);
}

}  // namespace
}  // namespace devc
