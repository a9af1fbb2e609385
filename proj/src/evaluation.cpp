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

#include "devc/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "devc/error.hpp"
#include "devc/rng.hpp"

namespace devc {

namespace {

struct Candidate {
  const UtteranceRecord* source;
  int target;
};

std::vector<int> speakers_where(const CorpusManifest& m, bool seen) {
  std::vector<int> out;
  for (int s = 0; s < m.config.generator.num_speakers(); ++s) {
    if (m.speaker_seen(s) == seen) out.push_back(s);
  }
  return out;
}

Emotion nearest_emotion(const Eigen::VectorXf& v, const std::map<Emotion, Eigen::VectorXf>& protos) {
  Emotion best = Emotion::kNeutral;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& [e, p] : protos) {
    const double d = (v - p).squaredNorm();
    if (d < best_d) best_d = d, best = e;
  }
  return best;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

std::string_view condition_name(Condition c) {
  switch (c) {
    case Condition::kS2S: return "S2S";
    case Condition::kS2U: return "S2U";
    case Condition::kU2U: return "U2U";
  }
  return "?";
}

EvalReport evaluate(const CorpusManifest& manifest, const Converter& converter, const EvalConfig& config,
                    const Converter* baseline) {
  if (config.pairs_per_cell <= 0) throw RangeError("evaluate: pairs_per_cell must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  const Encoders& enc = converter.encoders();
  const GeneratorParams& gen = manifest.config.generator;
  EvalReport report;

  std::map<std::string, Waveform> cache;
  auto load = [&](const UtteranceRecord& u) -> const Waveform& {
    auto it = cache.find(u.id);
    if (it == cache.end()) it = cache.emplace(u.id, read_wav(manifest.wav_path(u))).first;
    return it->second;
  };

  // Enrollment, emotion prototypes and SV calibration from real utterances.
  std::vector<LabeledVector> enrollment_vectors;
  std::map<Emotion, std::pair<Eigen::VectorXf, int>> emo_sum;
  for (const auto* u : manifest.select(std::nullopt, std::nullopt, Split::kReference)) {
    const auto all = enc.encode_all(load(*u), u->id);
    enrollment_vectors.emplace_back(u->speaker, all.speaker.values);
    auto [it, fresh] = emo_sum.try_emplace(u->emotion, Eigen::VectorXf::Zero(all.emotion.values.size()), 0);
    it->second.first += all.emotion.values;
    it->second.second += 1;
  }
  if (enrollment_vectors.empty()) throw DataError("evaluate: manifest has no reference split");
  const auto enrollment = enroll(enrollment_vectors);
  std::map<Emotion, Eigen::VectorXf> protos;
  for (const auto& [e, s] : emo_sum) protos[e] = s.first / static_cast<float>(s.second);

  std::vector<LabeledVector> genuine;
  for (const auto* u : manifest.select(std::nullopt, std::nullopt, Split::kTest)) {
    genuine.emplace_back(u->speaker, enc.encode_speaker(load(*u), u->id).values);
  }
  report.calibration = calibrate_sv(enrollment, genuine);

  const auto seen = speakers_where(manifest, true);
  const auto unseen = speakers_where(manifest, false);
  auto write_out = [&](const Waveform& w, const std::string& name) {
    if (!config.wav_dir) return;
    std::filesystem::create_directories(*config.wav_dir);
    write_wav(w, *config.wav_dir / (name + ".wav"));
  };

  for (Condition cond : kAllConditions) {
    const auto& src_set = cond == Condition::kU2U ? unseen : seen;
    const auto& tgt_set = cond == Condition::kS2S ? seen : unseen;
    if (src_set.empty() || tgt_set.empty()) continue;
    for (Emotion emo : kAllEmotions) {
      std::vector<Candidate> cands;
      for (int s : src_set) {
        for (const auto* u : manifest.select(s, emo, Split::kTest)) {
          for (int t : tgt_set) {
            if (t != s) cands.push_back({u, t});
          }
        }
      }
      if (cands.empty()) continue;
      Rng rng(derive_seed(config.seed, {static_cast<std::uint64_t>(cond), static_cast<std::uint64_t>(emotion_index(emo))}));
      std::shuffle(cands.begin(), cands.end(), rng);
      const std::size_t n = std::min(cands.size(), static_cast<std::size_t>(config.pairs_per_cell));
      for (std::size_t k = 0; k < n; ++k) {
        const auto& c = cands[k];
        const auto refs = manifest.select(c.target, emo, Split::kTest);
        if (refs.empty()) throw DataError("evaluate: target speaker has no test utterance for reference");
        const UtteranceRecord& ref = *refs[std::uniform_int_distribution<std::size_t>(0, refs.size() - 1)(rng)];
        const Waveform& src_wav = load(*c.source);
        const std::uint64_t seed = derive_seed(config.seed, {static_cast<std::uint64_t>(cond),
                                                             static_cast<std::uint64_t>(emotion_index(emo)), k, 7});
        const Waveform out =
            converter.convert(src_wav, load(ref), config.emotion_source, seed, c.source->id, ref.id);
        const Emotion target_emotion = config.emotion_source == EmotionSource::kSource ? c.source->emotion : ref.emotion;
        const SynthUtterance truth =
            generate_utterance({c.target, target_emotion, c.source->tokens, c.source->seed}, gen);

        PairResult r;
        r.condition = cond;
        r.emotion = emo;
        r.source_id = c.source->id;
        r.reference_id = ref.id;
        r.source_speaker = c.source->speaker;
        r.target_speaker = c.target;
        r.mcd = mcd(truth.wav, out);
        const F0Track ft = extract_f0(truth.wav), fo = extract_f0(out);
        r.vde = vde(ft, fo);
        r.ffe = ffe(ft, fo);
        try {
          r.f0_rmse = f0_rmse(ft, fo);
        } catch (const DataError&) {
        }
        const auto all = enc.encode_all(out, {});
        r.speaker_cosine = cosine(all.speaker.values, enrollment.at(c.target));
        r.speaker_accepted = r.speaker_cosine >= report.calibration.threshold;
        r.classified_emotion = nearest_emotion(all.emotion.values, protos);
        r.emotion_correct = r.classified_emotion == target_emotion;
        if (enc.analyzer() != nullptr) r.classified_speaker = enc.analyzer()->classify(out).speaker;
        report.pairs.push_back(r);
        write_out(out, std::string(condition_name(cond)) + "_" + c.source->id + "_to_spk" + std::to_string(c.target));
      }
    }
  }

  // Self-reconstruction: source doubles as reference.
  std::vector<const UtteranceRecord*> selfs;
  for (int s : seen) {
    for (const auto* u : manifest.select(s, std::nullopt, Split::kTest)) selfs.push_back(u);
  }
  Rng rng(derive_seed(config.seed, {0x5e1f}));
  std::shuffle(selfs.begin(), selfs.end(), rng);
  selfs.resize(std::min(selfs.size(), static_cast<std::size_t>(std::max(config.self_recon_pairs, 0))));
  std::vector<double> self_mcd, base_mcd;
  for (std::size_t k = 0; k < selfs.size(); ++k) {
    const Waveform& w = load(*selfs[k]);
    const std::uint64_t seed = derive_seed(config.seed, {0x5e1f, k});
    self_mcd.push_back(mcd(w, converter.convert(w, w, EmotionSource::kSource, seed, selfs[k]->id, selfs[k]->id)));
    if (baseline != nullptr) {
      base_mcd.push_back(mcd(w, baseline->convert(w, w, EmotionSource::kSource, seed, selfs[k]->id, selfs[k]->id)));
    }
  }
  report.self_recon_pairs = selfs.size();
  report.self_recon_mcd = mean_of(self_mcd);
  if (baseline != nullptr) report.baseline_self_recon_mcd = mean_of(base_mcd);

  // Aggregates.
  for (Condition cond : kAllConditions) {
    std::size_t n = 0, sv = 0, em = 0;
    for (Emotion emo : kAllEmotions) {
      CellSummary cell{cond, emo};
      std::vector<double> m, v, f, r;
      std::size_t cs = 0, ce = 0;
      for (const auto& p : report.pairs) {
        if (p.condition != cond || p.emotion != emo) continue;
        m.push_back(p.mcd);
        v.push_back(p.vde);
        f.push_back(p.ffe);
        if (p.f0_rmse) r.push_back(*p.f0_rmse);
        cs += p.speaker_accepted ? 1 : 0;
        ce += p.emotion_correct ? 1 : 0;
      }
      if (m.empty()) continue;
      cell.count = m.size();
      cell.mcd = mean_of(m);
      cell.vde = mean_of(v);
      cell.ffe = mean_of(f);
      cell.f0_rmse = r.empty() ? std::nan("") : mean_of(r);
      cell.sv_accuracy = static_cast<double>(cs) / static_cast<double>(cell.count);
      cell.emotion_accuracy = static_cast<double>(ce) / static_cast<double>(cell.count);
      report.cells.push_back(cell);
      n += cell.count;
      sv += cs;
      em += ce;
    }
    if (n > 0) {
      report.sv_accuracy[cond] = static_cast<double>(sv) / static_cast<double>(n);
      report.emotion_accuracy[cond] = static_cast<double>(em) / static_cast<double>(n);
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["calibration"] = {{"threshold", r.calibration.threshold},
                      {"eer", r.calibration.eer},
                      {"target_trials", r.calibration.target_trials},
                      {"nontarget_trials", r.calibration.nontarget_trials}};
  auto& cells = j["cells"] = nlohmann::json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"condition", std::string(condition_name(c.condition))},
                     {"emotion", std::string(emotion_name(c.emotion))},
                     {"count", c.count},
                     {"mcd_db", c.mcd},
                     {"vde", c.vde},
                     {"ffe", c.ffe},
                     {"f0_rmse_hz", std::isnan(c.f0_rmse) ? nlohmann::json(nullptr) : nlohmann::json(c.f0_rmse)},
                     {"sv_accuracy", c.sv_accuracy},
                     {"emotion_accuracy", c.emotion_accuracy}});
  }
  auto& cond = j["conditions"] = nlohmann::json::object();
  for (const auto& [c, v] : r.sv_accuracy) {
    cond[std::string(condition_name(c))] = {{"sv_accuracy", v}, {"emotion_accuracy", r.emotion_accuracy.at(c)}};
  }
  auto& pairs = j["pairs"] = nlohmann::json::array();
  for (const auto& p : r.pairs) {
    pairs.push_back({{"condition", std::string(condition_name(p.condition))},
                     {"emotion", std::string(emotion_name(p.emotion))},
                     {"source", p.source_id},
                     {"reference", p.reference_id},
                     {"source_speaker", p.source_speaker},
                     {"target_speaker", p.target_speaker},
                     {"mcd_db", p.mcd},
                     {"vde", p.vde},
                     {"ffe", p.ffe},
                     {"f0_rmse_hz", p.f0_rmse ? nlohmann::json(*p.f0_rmse) : nlohmann::json(nullptr)},
                     {"speaker_cosine", p.speaker_cosine},
                     {"speaker_accepted", p.speaker_accepted},
                     {"classified_speaker", p.classified_speaker},
                     {"classified_emotion", std::string(emotion_name(p.classified_emotion))},
                     {"emotion_correct", p.emotion_correct}});
  }
  j["self_reconstruction"] = {{"pairs", r.self_recon_pairs}, {"mcd_db", r.self_recon_mcd}};
  if (r.baseline_self_recon_mcd) j["self_reconstruction"]["baseline_mcd_db"] = *r.baseline_self_recon_mcd;
  j["seconds"] = r.seconds;
  return j;
}

std::string format_table(const EvalReport& r) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-5s %-8s %5s %9s %7s %7s %11s %7s %7s\n", "Cond", "Emotion", "N", "MCD(dB)",
                "VDE", "FFE", "F0RMSE(Hz)", "SV", "EmoAcc");
  os << line;
  for (const auto& c : r.cells) {
    std::snprintf(line, sizeof line, "%-5s %-8s %5zu %9.2f %7.3f %7.3f %11.2f %7.3f %7.3f\n",
                  std::string(condition_name(c.condition)).c_str(), std::string(emotion_name(c.emotion)).c_str(),
                  c.count, c.mcd, c.vde, c.ffe, c.f0_rmse, c.sv_accuracy, c.emotion_accuracy);
    os << line;
  }
  for (const auto& [c, v] : r.sv_accuracy) {
    std::snprintf(line, sizeof line, "%-5s %-8s %5s %9s %7s %7s %11s %7.3f %7.3f\n",
                  std::string(condition_name(c)).c_str(), "all", "", "", "", "", "", v, r.emotion_accuracy.at(c));
    os << line;
  }
  std::snprintf(line, sizeof line, "self-reconstruction MCD %.2f dB over %zu utterances", r.self_recon_mcd,
                r.self_recon_pairs);
  os << line;
  if (r.baseline_self_recon_mcd) {
    std::snprintf(line, sizeof line, " (untrained %.2f dB)", *r.baseline_self_recon_mcd);
    os << line;
  }
  os << '\n';
  return os.str();
}

}  // namespace devc
