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

#include "devc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "devc/error.hpp"
#include "devc/rng.hpp"

namespace devc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::uint64_t kOffsetTag = 0x0ff5e7;

double uniform_pm1(std::uint64_t seed) {
  Rng rng(seed);
  return std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
}

void check_speaker(const GeneratorParams& p, int speaker) {
  if (speaker < 0 || speaker >= p.num_speakers()) {
    throw DataError("unknown speaker id " + std::to_string(speaker));
  }
}

void check_emotion(Emotion e) {
  const int i = static_cast<int>(e);
  if (i < 0 || i >= kNumEmotions) throw DataError("unknown emotion id " + std::to_string(i));
}

}  // namespace

double resonance_gain(double f, double centre, double bandwidth) {
  const double c2 = centre * centre;
  const double d = c2 - f * f;
  return c2 / std::sqrt(d * d + bandwidth * bandwidth * f * f);
}

std::string_view emotion_name(Emotion e) {
  switch (e) {
    case Emotion::kNeutral: return "neutral";
    case Emotion::kAngry: return "angry";
    case Emotion::kHappy: return "happy";
    case Emotion::kSad: return "sad";
  }
  throw DataError("unknown emotion id " + std::to_string(static_cast<int>(e)));
}

Emotion parse_emotion(std::string_view name) {
  for (Emotion e : kAllEmotions) {
    if (emotion_name(e) == name) return e;
  }
  throw DataError("unknown emotion '" + std::string(name) + "'");
}

GeneratorParams GeneratorParams::defaults() {
  GeneratorParams p;
  p.vowels = {{730, 1090}, {270, 2290}, {300, 870}, {530, 1840},
              {570, 840},  {660, 1720}, {490, 1350}};
  p.speakers = {
      {95.0, 0.85, true},   {140.0, 1.18, true},  {205.0, 0.85, true},  {300.0, 1.18, true},
      {95.0, 1.18, false},  {140.0, 0.85, false}, {205.0, 1.18, false}, {300.0, 0.85, false},
  };
  p.emotions[emotion_index(Emotion::kNeutral)] = {1.00, 0.005, 5.0, 0.0, 0.0};
  p.emotions[emotion_index(Emotion::kAngry)] = {1.12, 0.015, 7.0, 5.0, 0.0};
  p.emotions[emotion_index(Emotion::kHappy)] = {1.25, 0.030, 5.5, 2.0, 0.0};
  p.emotions[emotion_index(Emotion::kSad)] = {0.90, 0.010, 4.0, -6.0, 0.0};
  return p;
}

nlohmann::json to_json(const GeneratorParams& p) {
  nlohmann::json j;
  j["sample_rate"] = p.sample_rate;
  j["hop"] = p.hop;
  j["token_hops"] = p.token_hops;
  auto& vowels = j["vowels"] = nlohmann::json::array();
  for (const auto& v : p.vowels) vowels.push_back({{"f1", v.f1}, {"f2", v.f2}});
  j["bandwidth1_hz"] = p.bandwidth1_hz;
  j["bandwidth2_hz"] = p.bandwidth2_hz;
  auto& spk = j["speakers"] = nlohmann::json::array();
  for (const auto& s : p.speakers) {
    spk.push_back({{"f0_hz", s.f0_hz}, {"formant_scale", s.formant_scale}, {"seen", s.seen}});
  }
  auto& emo = j["emotions"] = nlohmann::json::object();
  for (Emotion e : kAllEmotions) {
    const auto& ep = p.emotions[emotion_index(e)];
    emo[std::string(emotion_name(e))] = {{"f0_factor", ep.f0_factor},
                                         {"vibrato_depth", ep.vibrato_depth},
                                         {"vibrato_rate_hz", ep.vibrato_rate_hz},
                                         {"gain_db", ep.gain_db},
                                         {"declination", ep.declination}};
  }
  j["offset_f0_octaves"] = p.offset_f0_octaves;
  j["offset_vibrato"] = p.offset_vibrato;
  j["offset_gain_db"] = p.offset_gain_db;
  j["base_rms"] = p.base_rms;
  j["harmonic_ceiling_hz"] = p.harmonic_ceiling_hz;
  j["f0_jitter"] = p.f0_jitter;
  j["min_voiced_tokens"] = p.min_voiced_tokens;
  j["max_voiced_tokens"] = p.max_voiced_tokens;
  j["pause_probability"] = p.pause_probability;
  j["master_seed"] = p.master_seed;
  return j;
}

GeneratorParams generator_params_from_json(const nlohmann::json& j) {
  try {
    GeneratorParams p;
    p.sample_rate = j.at("sample_rate").get<int>();
    p.hop = j.at("hop").get<int>();
    p.token_hops = j.at("token_hops").get<int>();
    for (const auto& v : j.at("vowels")) p.vowels.push_back({v.at("f1"), v.at("f2")});
    p.bandwidth1_hz = j.at("bandwidth1_hz");
    p.bandwidth2_hz = j.at("bandwidth2_hz");
    for (const auto& s : j.at("speakers")) {
      p.speakers.push_back({s.at("f0_hz"), s.at("formant_scale"), s.at("seen")});
    }
    for (Emotion e : kAllEmotions) {
      const auto& ej = j.at("emotions").at(std::string(emotion_name(e)));
      p.emotions[emotion_index(e)] = {ej.at("f0_factor"), ej.at("vibrato_depth"),
                                      ej.at("vibrato_rate_hz"), ej.at("gain_db"),
                                      ej.at("declination")};
    }
    p.offset_f0_octaves = j.at("offset_f0_octaves");
    p.offset_vibrato = j.at("offset_vibrato");
    p.offset_gain_db = j.at("offset_gain_db");
    p.base_rms = j.at("base_rms");
    p.harmonic_ceiling_hz = j.at("harmonic_ceiling_hz");
    p.f0_jitter = j.at("f0_jitter");
    p.min_voiced_tokens = j.at("min_voiced_tokens");
    p.max_voiced_tokens = j.at("max_voiced_tokens");
    p.pause_probability = j.at("pause_probability");
    p.master_seed = j.at("master_seed").get<std::uint64_t>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("generator params: ") + e.what());
  }
}

CellOffset cell_offset(const GeneratorParams& p, int speaker, Emotion emotion) {
  check_speaker(p, speaker);
  check_emotion(emotion);
  const auto s = static_cast<std::uint64_t>(speaker);
  const auto e = static_cast<std::uint64_t>(emotion_index(emotion));
  CellOffset o;
  o.f0_octaves = p.offset_f0_octaves * uniform_pm1(derive_seed(p.master_seed, {kOffsetTag, s, e, 0}));
  o.vibrato = p.offset_vibrato * uniform_pm1(derive_seed(p.master_seed, {kOffsetTag, s, e, 1}));
  o.gain_db = p.offset_gain_db * uniform_pm1(derive_seed(p.master_seed, {kOffsetTag, s, e, 2}));
  return o;
}

CellAcoustics cell_acoustics(const GeneratorParams& p, int speaker, Emotion emotion) {
  const CellOffset o = cell_offset(p, speaker, emotion);
  const auto& sp = p.speakers[static_cast<std::size_t>(speaker)];
  const auto& ep = p.emotions[emotion_index(emotion)];
  CellAcoustics a;
  a.f0_hz = sp.f0_hz * ep.f0_factor * std::exp2(o.f0_octaves);
  a.formant_scale = sp.formant_scale;
  a.vibrato_depth = std::max(0.0, ep.vibrato_depth + o.vibrato);
  a.vibrato_rate_hz = ep.vibrato_rate_hz;
  a.gain_db = ep.gain_db + o.gain_db;
  a.declination = ep.declination;
  return a;
}

std::array<double, 3> speaker_parameters(const GeneratorParams& p, int speaker) {
  check_speaker(p, speaker);
  const auto& sp = p.speakers[static_cast<std::size_t>(speaker)];
  return {std::log2(sp.f0_hz / 160.0) / 0.4, (sp.formant_scale - 1.0) / 0.1, 0.5};
}

std::array<double, 4> emotion_parameters(const GeneratorParams& p, Emotion emotion) {
  check_emotion(emotion);
  const auto& ep = p.emotions[emotion_index(emotion)];
  return {std::log2(ep.f0_factor) / 0.2, ep.vibrato_depth / 0.02, ep.gain_db / 4.0,
          ep.declination / 0.2};
}

std::array<double, 3> cell_offset_direction(const GeneratorParams& p, int speaker,
                                            Emotion emotion) {
  const CellOffset o = cell_offset(p, speaker, emotion);
  std::array<double, 3> d = {o.f0_octaves / p.offset_f0_octaves, o.vibrato / p.offset_vibrato,
                             o.gain_db / p.offset_gain_db};
  double n = 0.0;
  for (double x : d) n += x * x;
  n = std::sqrt(n);
  if (n < 1e-12) return {1.0, 0.0, 0.0};
  for (double& x : d) x /= n;
  return d;
}

std::vector<int> sample_tokens(const GeneratorParams& p, std::uint64_t seed) {
  Rng rng(seed);
  const int v = p.vocab_size();
  if (v < 2) throw DataError("generator needs at least one voiced token");
  std::uniform_int_distribution<int> count(p.min_voiced_tokens, p.max_voiced_tokens);
  std::uniform_int_distribution<int> vowel(1, v - 1);
  std::bernoulli_distribution pause(p.pause_probability);
  const int n = count(rng);
  std::vector<int> tokens{0};
  for (int i = 0; i < n; ++i) {
    if (i > 0 && tokens.back() != 0 && pause(rng)) tokens.push_back(0);
    tokens.push_back(vowel(rng));
  }
  tokens.push_back(0);
  return tokens;
}

SynthUtterance generate_utterance(const SynthUtteranceSpec& spec, const GeneratorParams& p) {
  check_speaker(p, spec.speaker_id);
  check_emotion(spec.emotion);
  if (spec.content_tokens.empty()) throw DataError("generate_utterance: empty content tokens");
  for (int t : spec.content_tokens) {
    if (t < 0 || t >= p.vocab_size()) {
      throw DataError("generate_utterance: token " + std::to_string(t) + " out of vocabulary");
    }
  }

  const CellAcoustics a = cell_acoustics(p, spec.speaker_id, spec.emotion);
  Rng rng(spec.seed);
  const double phase0 = std::uniform_real_distribution<double>(0.0, kTwoPi)(rng);
  const double jitter = std::uniform_real_distribution<double>(-p.f0_jitter, p.f0_jitter)(rng);

  const std::size_t token_len = static_cast<std::size_t>(p.token_samples());
  const std::size_t n = spec.content_tokens.size() * token_len;
  const double fs = p.sample_rate;
  const double duration = static_cast<double>(n) / fs;
  const std::size_t ramp = static_cast<std::size_t>(p.sample_rate / 200);   // 5 ms
  const std::size_t glide = static_cast<std::size_t>(p.sample_rate / 100);  // 10 ms

  auto token_at = [&](std::ptrdiff_t i) -> int {
    if (i < 0 || static_cast<std::size_t>(i) >= spec.content_tokens.size()) return 0;
    return spec.content_tokens[static_cast<std::size_t>(i)];
  };

  SynthUtterance out;
  out.speaker_id = spec.speaker_id;
  out.emotion = spec.emotion;
  out.content_tokens = spec.content_tokens;
  out.wav.sample_rate = p.sample_rate;
  out.wav.samples.assign(n, 0.0f);

  std::vector<double> f0_track(n, 0.0);
  std::vector<double> sines;
  double phase = 0.0;
  double energy = 0.0;
  std::size_t voiced_samples = 0;
  std::vector<double> raw(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double tau = static_cast<double>(i) / fs;
    const double f0 = a.f0_hz * (1.0 + jitter) * std::exp2(a.declination * (tau - 0.5 * duration)) *
                      (1.0 + a.vibrato_depth * std::sin(kTwoPi * a.vibrato_rate_hz * tau + phase0));
    phase += kTwoPi * f0 / fs;
    if (phase > kTwoPi) phase -= kTwoPi;

    const auto ti = static_cast<std::ptrdiff_t>(i / token_len);
    const std::size_t pos = i % token_len;
    const int tok = token_at(ti);
    if (tok == 0) continue;
    f0_track[i] = f0;

    // Amplitude ramps where a voiced token borders silence.
    double env = 1.0;
    if (token_at(ti - 1) == 0 && pos < ramp) env = static_cast<double>(pos) / ramp;
    if (token_at(ti + 1) == 0 && token_len - 1 - pos < ramp) {
      env = std::min(env, static_cast<double>(token_len - 1 - pos) / ramp);
    }

    const auto& cur = p.vowels[static_cast<std::size_t>(tok - 1)];
    double f1 = cur.f1, f2 = cur.f2;
    const int prev = token_at(ti - 1);
    if (prev != 0 && pos < glide) {
      const auto& pv = p.vowels[static_cast<std::size_t>(prev - 1)];
      const double w = static_cast<double>(pos) / glide;
      f1 = pv.f1 + w * (cur.f1 - pv.f1);
      f2 = pv.f2 + w * (cur.f2 - pv.f2);
    }
    f1 *= a.formant_scale;
    f2 *= a.formant_scale;
    const double b1 = p.bandwidth1_hz * a.formant_scale;
    const double b2 = p.bandwidth2_hz * a.formant_scale;

    // sin(k*phase) by the Chebyshev recurrence.
    const int harmonics = static_cast<int>(p.harmonic_ceiling_hz / f0);
    const double c = 2.0 * std::cos(phase);
    double s_prev = 0.0, s_cur = std::sin(phase);
    double acc = 0.0;
    for (int k = 1; k <= harmonics; ++k) {
      const double fk = k * f0;
      acc += s_cur * resonance_gain(fk, f1, b1) * resonance_gain(fk, f2, b2) / k;
      const double s_next = c * s_cur - s_prev;
      s_prev = s_cur;
      s_cur = s_next;
    }
    raw[i] = env * acc;
    energy += raw[i] * raw[i];
    ++voiced_samples;
  }

  const double rms = voiced_samples > 0 ? std::sqrt(energy / static_cast<double>(voiced_samples)) : 0.0;
  const double scale = rms > 0.0 ? p.base_rms * std::pow(10.0, a.gain_db / 20.0) / rms : 0.0;
  for (std::size_t i = 0; i < n; ++i) out.wav.samples[i] = static_cast<float>(raw[i] * scale);

  const std::size_t hops = n / static_cast<std::size_t>(p.hop);
  out.f0_per_hop.assign(hops, 0.0f);
  for (std::size_t h = 0; h < hops; ++h) {
    double sum = 0.0;
    std::size_t voiced = 0;
    for (std::size_t i = h * p.hop; i < (h + 1) * p.hop; ++i) {
      if (f0_track[i] > 0.0) {
        sum += f0_track[i];
        ++voiced;
      }
    }
    if (voiced * 2 > static_cast<std::size_t>(p.hop)) out.f0_per_hop[h] = static_cast<float>(sum / voiced);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kReference: return "reference";
    case Split::kTest: return "test";
    case Split::kHeldout: return "heldout";
  }
  return "unknown";
}

Split parse_split(std::string_view name) {
  for (Split s : {Split::kTrain, Split::kReference, Split::kTest, Split::kHeldout}) {
    if (split_name(s) == name) return s;
  }
  throw DataError("unknown split '" + std::string(name) + "'");
}

CorpusConfig CorpusConfig::paper_shaped() {
  CorpusConfig c;
  c.train_per_cell = 300;
  c.reference_per_cell = 20;
  c.test_per_cell = 30;
  return c;
}

std::vector<const UtteranceRecord*> CorpusManifest::select(std::optional<int> speaker,
                                                           std::optional<Emotion> emotion,
                                                           std::optional<Split> split) const {
  std::vector<const UtteranceRecord*> out;
  for (const auto& u : utterances) {
    if (speaker && u.speaker != *speaker) continue;
    if (emotion && u.emotion != *emotion) continue;
    if (split && u.split != *split) continue;
    out.push_back(&u);
  }
  return out;
}

const UtteranceRecord* CorpusManifest::find(std::string_view id) const {
  for (const auto& u : utterances) {
    if (u.id == id) return &u;
  }
  return nullptr;
}

bool CorpusManifest::speaker_seen(int speaker) const {
  const auto& spk = config.generator.speakers;
  if (speaker < 0 || speaker >= static_cast<int>(spk.size())) {
    throw DataError("unknown speaker id " + std::to_string(speaker));
  }
  return spk[static_cast<std::size_t>(speaker)].seen;
}

CorpusManifest plan_corpus(const CorpusConfig& config) {
  const auto& g = config.generator;
  if (g.num_speakers() < 2) throw DataError("corpus needs at least two speakers");
  if (config.train_per_cell < 0 || config.reference_per_cell < 0 || config.test_per_cell < 0) {
    throw DataError("split sizes must be non-negative");
  }
  CorpusManifest m;
  m.config = config;
  for (int s = 0; s < g.num_speakers(); ++s) {
    const bool seen = g.speakers[static_cast<std::size_t>(s)].seen;
    for (Emotion e : kAllEmotions) {
      const std::pair<Split, int> quotas[] = {
          {seen ? Split::kTrain : Split::kHeldout, config.train_per_cell},
          {Split::kReference, config.reference_per_cell},
          {Split::kTest, config.test_per_cell}};
      for (const auto& [split, count] : quotas) {
        for (int i = 0; i < count; ++i) {
          UtteranceRecord u;
          char id[96];
          std::snprintf(id, sizeof(id), "spk%d_%s_%s_%03d", s, emotion_name(e).data(),
                        split_name(split).data(), i);
          u.id = id;
          u.path = "wav/" + std::string(split_name(split)) + "/" + u.id + ".wav";
          u.speaker = s;
          u.emotion = e;
          u.split = split;
          u.seed = derive_seed(g.master_seed,
                               {static_cast<std::uint64_t>(s),
                                static_cast<std::uint64_t>(emotion_index(e)),
                                static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(i)});
          u.tokens = sample_tokens(g, derive_seed(u.seed, {0x70c}));
          u.num_samples = u.tokens.size() * static_cast<std::size_t>(g.token_samples());
          m.utterances.push_back(std::move(u));
        }
      }
    }
  }
  return m;
}

CorpusManifest generate_corpus(const CorpusConfig& config, const std::filesystem::path& out_dir) {
  CorpusManifest m = plan_corpus(config);
  m.root = out_dir;
  std::error_code ec;
  for (Split s : {Split::kTrain, Split::kReference, Split::kTest, Split::kHeldout}) {
    std::filesystem::create_directories(out_dir / "wav" / std::string(split_name(s)), ec);
    if (ec) throw DataError("cannot create output directory " + out_dir.string() + ": " + ec.message());
  }
  for (const auto& u : m.utterances) {
    const SynthUtterance utt = generate_utterance(u.spec(), config.generator);
    write_wav(utt.wav, m.wav_path(u));
  }
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

nlohmann::json to_json(const CorpusManifest& m) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["seed"] = m.config.generator.master_seed;
  j["generator"] = to_json(m.config.generator);
  j["splits"] = {{"train", m.config.train_per_cell},
                 {"reference", m.config.reference_per_cell},
                 {"test", m.config.test_per_cell}};
  auto& spk = j["speakers"] = nlohmann::json::array();
  for (int s = 0; s < m.config.generator.num_speakers(); ++s) {
    spk.push_back({{"id", s}, {"seen", m.config.generator.speakers[static_cast<std::size_t>(s)].seen}});
  }
  auto& emo = j["emotions"] = nlohmann::json::array();
  for (Emotion e : kAllEmotions) emo.push_back(std::string(emotion_name(e)));

  // Per (speaker, emotion) path lists, then per-utterance metadata.
  auto& cells = j["cells"] = nlohmann::json::array();
  for (int s = 0; s < m.config.generator.num_speakers(); ++s) {
    for (Emotion e : kAllEmotions) {
      nlohmann::json c = {{"speaker", s}, {"emotion", std::string(emotion_name(e))}};
      for (Split sp : {Split::kTrain, Split::kReference, Split::kTest, Split::kHeldout}) {
        auto& list = c[std::string(split_name(sp))] = nlohmann::json::array();
        for (const auto* u : m.select(s, e, sp)) list.push_back(u->path);
      }
      cells.push_back(std::move(c));
    }
  }
  auto& utts = j["utterances"] = nlohmann::json::array();
  for (const auto& u : m.utterances) {
    utts.push_back({{"id", u.id},
                    {"path", u.path},
                    {"speaker", u.speaker},
                    {"emotion", std::string(emotion_name(u.emotion))},
                    {"split", std::string(split_name(u.split))},
                    {"tokens", u.tokens},
                    {"seed", u.seed},
                    {"num_samples", u.num_samples}});
  }
  return j;
}

void save_manifest(const CorpusManifest& m, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write manifest " + path.string());
  f << to_json(m).dump(1) << '\n';
  if (!f) throw DataError("write failed for manifest " + path.string());
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw MissingFileError("cannot open manifest " + path.string());
  CorpusManifest m;
  m.root = path.parent_path();
  try {
    const nlohmann::json j = nlohmann::json::parse(f);
    if (j.at("format_version").get<int>() != 1) throw DataError("unsupported manifest version");
    m.config.generator = generator_params_from_json(j.at("generator"));
    m.config.train_per_cell = j.at("splits").at("train");
    m.config.reference_per_cell = j.at("splits").at("reference");
    m.config.test_per_cell = j.at("splits").at("test");
    for (const auto& u : j.at("utterances")) {
      UtteranceRecord r;
      r.id = u.at("id");
      r.path = u.at("path");
      r.speaker = u.at("speaker");
      r.emotion = parse_emotion(u.at("emotion").get<std::string>());
      r.split = parse_split(u.at("split").get<std::string>());
      r.tokens = u.at("tokens").get<std::vector<int>>();
      r.seed = u.at("seed").get<std::uint64_t>();
      r.num_samples = u.at("num_samples").get<std::size_t>();
      m.utterances.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest " + path.string() + ": " + e.what());
  }
  validate_manifest(m);
  return m;
}

void validate_manifest(const CorpusManifest& m) {
  std::set<std::string> paths;
  for (const auto& u : m.utterances) {
    if (!paths.insert(u.path).second) throw DataError("manifest: duplicate path " + u.path);
    if (u.split == Split::kTrain && !m.speaker_seen(u.speaker)) {
      throw DataError("manifest: unseen speaker " + std::to_string(u.speaker) + " in train split");
    }
  }
  const auto& g = m.config.generator;
  for (int s = 0; s < g.num_speakers(); ++s) {
    const bool seen = m.speaker_seen(s);
    for (Emotion e : kAllEmotions) {
      const auto count = [&](Split sp) { return static_cast<int>(m.select(s, e, sp).size()); };
      const bool ok = count(seen ? Split::kTrain : Split::kHeldout) == m.config.train_per_cell &&
                      count(seen ? Split::kHeldout : Split::kTrain) == 0 &&
                      count(Split::kReference) == m.config.reference_per_cell &&
                      count(Split::kTest) == m.config.test_per_cell;
      if (!ok) {
        throw DataError("manifest: split sizes do not match configuration for speaker " +
                        std::to_string(s) + " / " + std::string(emotion_name(e)));
      }
    }
  }
}

}  // namespace devc
