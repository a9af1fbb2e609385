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

#include "devc/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "devc/error.hpp"
#include "devc/rng.hpp"

namespace devc {

DistanceTable distance_table(std::span<const LabeledEmbedding> utterances, int speaker, std::uint64_t seed) {
  std::array<std::vector<const LabeledEmbedding*>, kNumEmotions> by_emotion;
  for (const auto& u : utterances) by_emotion[static_cast<std::size_t>(emotion_index(u.emotion))].push_back(&u);
  DistanceTable t;
  t.speaker = speaker;
  std::array<std::vector<const LabeledEmbedding*>, kNumEmotions> g1, g2;
  for (Emotion e : kAllEmotions) {
    const auto i = static_cast<std::size_t>(emotion_index(e));
    auto& list = by_emotion[i];
    if (list.size() < 2) {
      throw DataError("distance_table: speaker " + std::to_string(speaker) + " has " + std::to_string(list.size()) +
                      " " + std::string(emotion_name(e)) + " utterances, need at least 2");
    }
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(speaker), i}));
    std::shuffle(list.begin(), list.end(), rng);
    const std::size_t half = list.size() / 2;
    g1[i].assign(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(half));
    g2[i].assign(list.begin() + static_cast<std::ptrdiff_t>(half), list.begin() + static_cast<std::ptrdiff_t>(2 * half));
    t.per_emotion[i] = half;
    t.group_size += half;
  }
  for (std::size_t i = 0; i < kNumEmotions; ++i) {
    for (std::size_t j = 0; j < kNumEmotions; ++j) {
      double acc = 0.0;
      for (const auto* a : g1[i]) {
        for (const auto* b : g2[j]) {
          if (a->values.size() != b->values.size()) throw ShapeError("distance_table: dimension mismatch");
          acc += (a->values.cast<double>() - b->values.cast<double>()).norm();
        }
      }
      t.values[i][j] = acc / static_cast<double>(g1[i].size() * g2[j].size());
    }
  }
  return t;
}

DominanceReport diagonal_dominance(const std::array<std::array<double, kNumEmotions>, kNumEmotions>& v) {
  DominanceReport r;
  auto name = [](std::size_t i) { return std::string(emotion_name(kAllEmotions[i])); };
  char buf[160];
  for (std::size_t i = 0; i < kNumEmotions; ++i) {
    for (std::size_t j = 0; j < kNumEmotions; ++j) {
      if (j == i) continue;
      if (!(v[i][i] < v[i][j])) {
        std::snprintf(buf, sizeof buf, "row %s: (%s, %s) = %.4f is not above the diagonal %.4f", name(i).c_str(),
                      name(i).c_str(), name(j).c_str(), v[i][j], v[i][i]);
        r.violations.emplace_back(buf);
      }
      if (!(v[i][i] < v[j][i])) {
        std::snprintf(buf, sizeof buf, "column %s: (%s, %s) = %.4f is not above the diagonal %.4f",
                      name(i).c_str(), name(j).c_str(), name(i).c_str(), v[j][i], v[i][i]);
        r.violations.emplace_back(buf);
      }
    }
  }
  r.dominant = r.violations.empty();
  return r;
}

nlohmann::json to_json(const DistanceTable& t) {
  nlohmann::json j;
  j["speaker"] = t.speaker;
  j["group_size"] = t.group_size;
  auto& order = j["emotions"] = nlohmann::json::array();
  for (Emotion e : kTableOrder) order.push_back(std::string(emotion_name(e)));
  auto& rows = j["distances"] = nlohmann::json::array();
  for (Emotion a : kTableOrder) {
    auto row = nlohmann::json::array();
    for (Emotion b : kTableOrder) {
      row.push_back(t.values[static_cast<std::size_t>(emotion_index(a))][static_cast<std::size_t>(emotion_index(b))]);
    }
    rows.push_back(row);
  }
  const auto dom = diagonal_dominance(t);
  j["diagonal_dominance"] = dom.dominant;
  j["violations"] = dom.violations;
  return j;
}

std::string format_table(const DistanceTable& t) {
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof buf, "speaker %d", t.speaker);
  os << buf << '\n';
  std::snprintf(buf, sizeof buf, "%-8s", "");
  os << buf;
  for (Emotion e : kTableOrder) {
    std::snprintf(buf, sizeof buf, " %8s", std::string(emotion_name(e)).c_str());
    os << buf;
  }
  os << '\n';
  for (Emotion a : kTableOrder) {
    std::snprintf(buf, sizeof buf, "%-8s", std::string(emotion_name(a)).c_str());
    os << buf;
    for (Emotion b : kTableOrder) {
      std::snprintf(buf, sizeof buf, " %8.3f",
                    t.values[static_cast<std::size_t>(emotion_index(a))][static_cast<std::size_t>(emotion_index(b))]);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

std::vector<LabeledEmbedding> speaker_embeddings(const EmbeddingStore& store, const CorpusManifest& manifest,
                                                 int speaker, std::size_t max_per_speaker, std::uint64_t seed) {
  std::vector<LabeledEmbedding> out;
  const std::size_t per_emotion = std::max<std::size_t>(max_per_speaker / kNumEmotions, 1);
  for (Emotion e : kAllEmotions) {
    std::vector<const UtteranceRecord*> list;
    for (const auto* u : manifest.select(speaker, e, std::nullopt)) {
      if (store.find(u->id, EmbeddingKind::kSpeaker) != nullptr) list.push_back(u);
    }
    Rng rng(derive_seed(seed, {0xa5a1, static_cast<std::uint64_t>(speaker),
                               static_cast<std::uint64_t>(emotion_index(e))}));
    std::shuffle(list.begin(), list.end(), rng);
    if (list.size() > per_emotion) list.resize(per_emotion);
    for (const auto* u : list) {
      const auto& rec = store.at(u->id, EmbeddingKind::kSpeaker);
      out.push_back({u->id, e, Eigen::Map<const Eigen::VectorXf>(rec.values.data(), rec.values.size())});
    }
  }
  return out;
}

void export_embeddings(const EmbeddingStore& store, const std::vector<std::string>& ids, EmbeddingKind kind,
                       const std::filesystem::path& path) {
  std::vector<const EmbeddingRecord*> recs;
  Eigen::Index dim = -1;
  for (const auto& id : ids) {
    const EmbeddingRecord* r = store.find(id, kind);
    if (r == nullptr) throw DataError("export_embeddings: unknown id '" + id + "'");
    const Eigen::Index d = r->values.size();
    if (dim >= 0 && d != dim) throw ShapeError("export_embeddings: mixed dimensions in selection");
    dim = d;
    recs.push_back(r);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << "id\tspeaker\temotion";
  for (Eigen::Index k = 0; k < std::max<Eigen::Index>(dim, 0); ++k) os << "\tv" << k;
  os << '\n';
  char buf[32];
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = *recs[i];
    os << ids[i] << '\t' << (r.speaker ? std::to_string(*r.speaker) : "") << '\t' << r.emotion.value_or("");
    for (Eigen::Index k = 0; k < r.values.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(r.values.data()[k]));
      os << '\t' << buf;
    }
    os << '\n';
  }
  if (!os) throw DataError("write failed for " + path.string());
  nlohmann::json side = {{"kind", std::string(kind_name(kind))},
                         {"dims", std::max<Eigen::Index>(dim, 0)},
                         {"count", recs.size()},
                         {"columns", {"id", "speaker", "emotion"}}};
  std::ofstream js(path.string() + ".json", std::ios::trunc);
  js << side.dump(1) << '\n';
}

std::vector<ExportedRow> import_embeddings(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw MissingFileError("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  std::vector<ExportedRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, '\t')) cols.push_back(c);
    if (line.back() == '\t') cols.emplace_back();
    if (cols.size() < 3) throw DataError("malformed embedding row in " + path.string());
    ExportedRow r;
    r.id = cols[0];
    r.speaker = cols[1].empty() ? -1 : std::stoi(cols[1]);
    r.emotion = cols[2];
    for (std::size_t k = 3; k < cols.size(); ++k) r.values.push_back(std::stof(cols[k]));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace devc
