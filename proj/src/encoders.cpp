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

#include "devc/encoders.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "devc/error.hpp"
#include "devc/pitch.hpp"
#include "devc/rng.hpp"
#include "devc/spectrum.hpp"

namespace devc {

namespace {

constexpr std::uint64_t kBasisSeed = 0x5eed0fba515ULL;
constexpr std::uint64_t kCalibrationTag = 0xca11b;
constexpr int kEnvelopeWindow = 512;
constexpr int kHarmonicFft = 2048;
constexpr double kBandLoHz = 150.0;
constexpr double kBandHiHz = 4000.0;
constexpr double kCensorDb = 25.0;
// Features that enter the cell distance: median F0, level, formant scale.
constexpr std::array<bool, AcousticFeatures::kCount> kClassifyFeature = {true, false, false, true, true};

Eigen::MatrixXd orthonormal_columns(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd g(rows, cols);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = n01(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
}

}  // namespace

Backend parse_backend(std::string_view name) {
  if (name == "oracle") return Backend::kOracle;
  if (name == "external") return Backend::kExternal;
  throw UsageError("unknown encoder backend '" + std::string(name) + "'");
}

std::string_view backend_name(Backend b) { return b == Backend::kOracle ? "oracle" : "external"; }

// ---------------------------------------------------------------------------

OracleFactors::OracleFactors(GeneratorParams params, EncoderDims dims)
    : params_(std::move(params)), dims_(dims) {
  if (dims_.speaker < 6) throw RangeError("oracle speaker embedding needs D_s >= 6");
  if (dims_.emotion < 4) throw RangeError("oracle emotion embedding needs D_e >= 4");
  if (dims_.content < 1) throw RangeError("oracle content code needs D_c >= 1");
  speaker_basis_ = orthonormal_columns(dims_.speaker, 6, derive_seed(kBasisSeed, {1}));
  emotion_basis_ = orthonormal_columns(dims_.emotion, 4, derive_seed(kBasisSeed, {2}));
  const int v = params_.vocab_size();
  if (dims_.content >= v) {
    content_proj_ = Eigen::MatrixXd::Identity(dims_.content, v);
  } else {
    Rng rng(derive_seed(kBasisSeed, {3}));
    std::normal_distribution<double> n01;
    content_proj_.resize(dims_.content, v);
    for (Eigen::Index i = 0; i < content_proj_.size(); ++i) content_proj_.data()[i] = n01(rng);
    content_proj_.colwise().normalize();
  }
}

Eigen::VectorXf OracleFactors::content_code(int token) const {
  if (token < 0 || token >= params_.vocab_size()) {
    throw DataError("content token " + std::to_string(token) + " out of vocabulary");
  }
  return content_proj_.col(token).cast<float>();
}

ContentMatrix OracleFactors::content_matrix(const std::vector<int>& tokens,
                                            std::size_t segments) const {
  ContentMatrix m;
  m.hop = params_.hop;
  m.values.setZero(static_cast<Eigen::Index>(segments), dims_.content);
  for (std::size_t r = 0; r < segments; ++r) {
    const std::size_t b = r / static_cast<std::size_t>(params_.token_hops);
    const int tok = b < tokens.size() ? tokens[b] : 0;
    m.values.row(static_cast<Eigen::Index>(r)) = content_code(tok).transpose();
  }
  return m;
}

SpeakerVector OracleFactors::speaker_embedding(int speaker, Emotion emotion) const {
  const auto s = speaker_parameters(params_, speaker);
  const auto u = cell_offset_direction(params_, speaker, emotion);
  const Eigen::Vector3d sv(s[0], s[1], s[2]);
  const Eigen::Vector3d uv(u[0], u[1], u[2]);
  const Eigen::VectorXd base = speaker_basis_.leftCols(3) * sv;
  const Eigen::VectorXd offset = kOffsetScale * base.norm() * (speaker_basis_.rightCols(3) * uv);
  SpeakerVector out;
  out.values = (base + offset).normalized().cast<float>();
  out.unit_norm = true;
  return out;
}

EmotionVector OracleFactors::emotion_embedding(Emotion emotion) const {
  const auto e = emotion_parameters(params_, emotion);
  const Eigen::Vector4d ev(e[0], e[1], e[2], e[3]);
  return {(emotion_basis_ * ev).cast<float>()};
}

// ---------------------------------------------------------------------------

OracleAnalyzer::OracleAnalyzer(GeneratorParams params, int calibration_per_cell)
    : params_(std::move(params)) {
  if (calibration_per_cell < 2) throw RangeError("oracle calibration needs >= 2 utterances per cell");
  for (int i = 0; i <= 45; ++i) scale_grid_.push_back(0.80 + 0.01 * i);

  // Cell centroids and pooled within-cell spread.
  const int cells = params_.num_speakers() * kNumEmotions;
  centroids_.assign(static_cast<std::size_t>(cells), {});
  std::array<double, AcousticFeatures::kCount> within{};
  std::size_t count = 0;
  for (int s = 0; s < params_.num_speakers(); ++s) {
    for (Emotion e : kAllEmotions) {
      std::vector<AcousticFeatures> feats;
      for (int k = 0; k < calibration_per_cell; ++k) {
        const std::uint64_t seed = derive_seed(
            params_.master_seed, {kCalibrationTag, static_cast<std::uint64_t>(s),
                                  static_cast<std::uint64_t>(emotion_index(e)),
                                  static_cast<std::uint64_t>(k)});
        const SynthUtteranceSpec spec{s, e, sample_tokens(params_, derive_seed(seed, {1})), seed};
        feats.push_back(measure(generate_utterance(spec, params_).wav));
      }
      auto& mu = centroids_[static_cast<std::size_t>(s * kNumEmotions + emotion_index(e))];
      for (const auto& f : feats) {
        for (int j = 0; j < AcousticFeatures::kCount; ++j) mu[j] += f.values[j] / feats.size();
      }
      for (const auto& f : feats) {
        for (int j = 0; j < AcousticFeatures::kCount; ++j) {
          within[j] += (f.values[j] - mu[j]) * (f.values[j] - mu[j]);
        }
        ++count;
      }
    }
  }
  for (int j = 0; j < AcousticFeatures::kCount; ++j) {
    double lo = std::numeric_limits<double>::max(), hi = std::numeric_limits<double>::lowest();
    for (const auto& mu : centroids_) {
      lo = std::min(lo, mu[j]);
      hi = std::max(hi, mu[j]);
    }
    const double pooled = std::sqrt(within[j] / static_cast<double>(count));
    spread_[j] = std::max({pooled, 0.02 * (hi - lo), 1e-6});
  }
}

std::vector<OracleAnalyzer::BlockHarmonics> OracleAnalyzer::block_harmonics(const Waveform& wav) const {
  const F0Track track = extract_f0(wav);
  const auto block = static_cast<std::size_t>(params_.token_samples());
  const auto glide = static_cast<std::size_t>(params_.sample_rate / 100);
  const double bin_hz = static_cast<double>(params_.sample_rate) / kHarmonicFft;
  const double top_hz = std::min(kBandHiHz, params_.harmonic_ceiling_hz);
  const std::size_t blocks = (wav.size() + block - 1) / block;
  std::vector<BlockHarmonics> out(blocks);
  std::vector<double> frame(kEnvelopeWindow);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t b0 = b * block;
    const std::size_t len = std::min(block, wav.size() - b0);
    std::size_t frames = 0, voiced = 0;
    auto& h = out[b];
    for (std::size_t f = 0; f < track.size(); ++f) {
      const std::size_t start = f * static_cast<std::size_t>(track.hop);
      if (start < b0 || start + kEnvelopeWindow > b0 + len) continue;
      ++frames;
      if (!track.voiced[f]) continue;
      ++voiced;
      if (start < b0 + glide) continue;
      for (int i = 0; i < kEnvelopeWindow; ++i) frame[static_cast<std::size_t>(i)] = wav.samples[start + static_cast<std::size_t>(i)];
      const auto p = hann_power_spectrum(frame, kHarmonicFft);
      // Peaks are followed harmonic by harmonic so F0 errors do not accumulate.
      const double f0_track = track.f0[f];
      double f0 = f0_track;
      const std::size_t first = h.freq_hz.size();
      const int harmonics = static_cast<int>(top_hz / f0_track);
      for (int k = 1; k <= harmonics; ++k) {
        const double centre = k * f0;
        const auto lo = static_cast<std::size_t>(std::max(1.0, std::floor((centre - 0.3 * f0_track) / bin_hz)));
        const auto hi = std::min(p.size() - 2, static_cast<std::size_t>(std::ceil((centre + 0.3 * f0_track) / bin_hz)));
        std::size_t best = lo;
        for (std::size_t i = lo; i <= hi; ++i) {
          if (p[i] > p[best]) best = i;
        }
        const double l0 = std::log(p[best - 1] + 1e-20), l1 = std::log(p[best] + 1e-20),
                     l2 = std::log(p[best + 1] + 1e-20);
        const double denom = l0 - 2.0 * l1 + l2;
        const double shift = denom < 0.0 ? std::clamp(0.5 * (l0 - l2) / denom, -0.5, 0.5) : 0.0;
        const double peak_hz = (static_cast<double>(best) + shift) * bin_hz;
        f0 = std::clamp(peak_hz / k, 0.97 * f0_track, 1.03 * f0_track);
        if (peak_hz < kBandLoHz) continue;
        h.freq_hz.push_back(peak_hz);
        h.log_amp.push_back(0.5 * (l1 - 0.25 * (l0 - l2) * shift));
        h.harmonic.push_back(k);
      }
      if (h.freq_hz.size() > first) h.frame_start.push_back(first);
    }
    h.voiced = frames > 0 && 2 * voiced >= frames && !h.frame_start.empty();
  }
  return out;
}

double OracleAnalyzer::fit_error(const BlockHarmonics& b, int vowel, double scale) const {
  const auto& v = params_.vowels[static_cast<std::size_t>(vowel - 1)];
  const double f1 = v.f1 * scale, f2 = v.f2 * scale;
  const double b1 = params_.bandwidth1_hz * scale, b2 = params_.bandwidth2_hz * scale;
  const double floor = -kCensorDb / 20.0 * std::log(10.0);
  std::vector<double> model;
  double err = 0.0;
  for (std::size_t fi = 0; fi < b.frame_start.size(); ++fi) {
    const std::size_t lo = b.frame_start[fi];
    const std::size_t hi = fi + 1 < b.frame_start.size() ? b.frame_start[fi + 1] : b.freq_hz.size();
    model.resize(hi - lo);
    double ymax = -std::numeric_limits<double>::infinity(), mmax = ymax;
    for (std::size_t i = lo; i < hi; ++i) {
      const double f = b.freq_hz[i];
      model[i - lo] = std::log(resonance_gain(f, f1, b1) * resonance_gain(f, f2, b2) / b.harmonic[i]);
      ymax = std::max(ymax, b.log_amp[i]);
      mmax = std::max(mmax, model[i - lo]);
    }
    // Amplitudes far below the frame maximum are censored at a common floor.
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double r = std::max(b.log_amp[i] - ymax, floor) - std::max(model[i - lo] - mmax, floor);
      sum += r;
      sum2 += r * r;
    }
    err += sum2 - sum * sum / static_cast<double>(hi - lo);
  }
  return err;
}

int OracleAnalyzer::nearest_vowel(const BlockHarmonics& b, double scale) const {
  int best = 1;
  double best_d = std::numeric_limits<double>::max();
  for (int v = 1; v < params_.vocab_size(); ++v) {
    const double d = fit_error(b, v, scale);
    if (d < best_d) {
      best_d = d;
      best = v;
    }
  }
  return best;
}

AcousticFeatures OracleAnalyzer::measure(const Waveform& wav) const {
  if (wav.sample_rate != params_.sample_rate) {
    throw RangeError("oracle encoder: sample rate " + std::to_string(wav.sample_rate) +
                     " does not match corpus rate " + std::to_string(params_.sample_rate));
  }
  AcousticFeatures out;
  if (wav.samples.empty()) return out;
  const F0Track track = extract_f0(wav);
  std::vector<double> times, logf0, level;
  for (std::size_t f = 0; f < track.size(); ++f) {
    if (!track.voiced[f]) continue;
    const std::size_t start = f * static_cast<std::size_t>(track.hop);
    times.push_back(static_cast<double>(start + kEnvelopeWindow / 2) / wav.sample_rate);
    logf0.push_back(std::log2(track.f0[f]));
    double e = 0.0;
    std::size_t n = 0;
    for (std::size_t i = start; i < std::min(wav.size(), start + kEnvelopeWindow); ++i, ++n) {
      e += static_cast<double>(wav.samples[i]) * wav.samples[i];
    }
    level.push_back(e / static_cast<double>(std::max<std::size_t>(n, 1)));
  }
  if (logf0.size() < 3) return out;
  out.has_voicing = true;

  std::vector<double> sorted = logf0;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
  const double median = sorted[sorted.size() / 2];
  const double n = static_cast<double>(logf0.size());
  const double tm = std::accumulate(times.begin(), times.end(), 0.0) / n;
  const double fm = std::accumulate(logf0.begin(), logf0.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < logf0.size(); ++i) {
    sxx += (times[i] - tm) * (times[i] - tm);
    sxy += (times[i] - tm) * (logf0[i] - fm);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  double resid = 0.0;
  for (std::size_t i = 0; i < logf0.size(); ++i) {
    const double r = logf0[i] - (fm + slope * (times[i] - tm));
    resid += r * r;
  }
  out.values[0] = median;
  out.values[1] = std::sqrt(resid / n);
  out.values[2] = slope;
  out.values[3] = 10.0 * std::log10(std::accumulate(level.begin(), level.end(), 0.0) / n + 1e-12);

  // Formant scale: best harmonic-model fit summed over voiced blocks.
  const auto blocks = block_harmonics(wav);
  std::vector<double> score(scale_grid_.size(), 0.0);
  bool any = false;
  for (const auto& b : blocks) {
    if (!b.voiced) continue;
    any = true;
    for (std::size_t si = 0; si < scale_grid_.size(); ++si) {
      double best = std::numeric_limits<double>::max();
      for (int v = 1; v < params_.vocab_size(); ++v) best = std::min(best, fit_error(b, v, scale_grid_[si]));
      score[si] += best;
    }
  }
  double scale = 1.0;
  if (any) {
    const auto it = std::min_element(score.begin(), score.end());
    const auto i = static_cast<std::size_t>(it - score.begin());
    double shift = 0.0;
    if (i > 0 && i + 1 < score.size()) {
      const double denom = score[i - 1] - 2.0 * score[i] + score[i + 1];
      if (denom > 0.0) shift = std::clamp(0.5 * (score[i - 1] - score[i + 1]) / denom, -0.5, 0.5);
    }
    scale = scale_grid_[i] + 0.01 * shift;
  }
  out.values[4] = std::log2(scale);
  return out;
}

CellEstimate OracleAnalyzer::classify(const AcousticFeatures& f) const {
  CellEstimate best;
  best.distance = std::numeric_limits<double>::infinity();
  if (!f.has_voicing) return best;
  for (int s = 0; s < params_.num_speakers(); ++s) {
    for (Emotion e : kAllEmotions) {
      const auto& mu = centroids_[static_cast<std::size_t>(s * kNumEmotions + emotion_index(e))];
      double d = 0.0;
      for (int j = 0; j < AcousticFeatures::kCount; ++j) {
        if (!kClassifyFeature[j]) continue;
        const double z = (f.values[j] - mu[j]) / spread_[j];
        d += z * z;
      }
      if (d < best.distance) best = {s, e, d, std::exp2(f.values[4])};
    }
  }
  return best;
}

CellEstimate OracleAnalyzer::classify(const Waveform& wav) const { return classify(measure(wav)); }

std::vector<int> OracleAnalyzer::decode_tokens(const Waveform& wav, double formant_scale) const {
  const auto blocks = block_harmonics(wav);
  std::vector<int> tokens(blocks.size(), 0);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].voiced) tokens[b] = nearest_vowel(blocks[b], formant_scale);
  }
  return tokens;
}

// ---------------------------------------------------------------------------

std::string_view kind_name(EmbeddingKind k) {
  switch (k) {
    case EmbeddingKind::kContent: return "content";
    case EmbeddingKind::kSpeaker: return "speaker";
    case EmbeddingKind::kEmotion: return "emotion";
  }
  return "unknown";
}

EmbeddingKind parse_kind(std::string_view name) {
  for (EmbeddingKind k : {EmbeddingKind::kContent, EmbeddingKind::kSpeaker, EmbeddingKind::kEmotion}) {
    if (kind_name(k) == name) return k;
  }
  throw DataError("unknown embedding kind '" + std::string(name) + "'");
}

void EmbeddingStore::put(const std::string& id, EmbeddingKind kind, EmbeddingRecord record) {
  if (!record.values.allFinite()) throw NumericError("embedding " + id + " has non-finite values");
  records_[Key{id, kind}] = std::move(record);
}

const EmbeddingRecord* EmbeddingStore::find(std::string_view id, EmbeddingKind kind) const {
  const auto it = records_.find(Key{std::string(id), kind});
  return it == records_.end() ? nullptr : &it->second;
}

const EmbeddingRecord& EmbeddingStore::at(std::string_view id, EmbeddingKind kind) const {
  const EmbeddingRecord* r = find(id, kind);
  if (r == nullptr) {
    throw DataError("embedding store has no " + std::string(kind_name(kind)) + " record for '" +
                    std::string(id) + "'");
  }
  return *r;
}

std::vector<std::string> EmbeddingStore::ids(EmbeddingKind kind) const {
  std::vector<std::string> out;
  for (const auto& [key, rec] : records_) {
    if (key.second == kind) out.push_back(key.first);
  }
  return out;
}

bool EmbeddingStore::operator==(const EmbeddingStore& other) const {
  if (records_.size() != other.records_.size()) return false;
  for (auto a = records_.begin(), b = other.records_.begin(); a != records_.end(); ++a, ++b) {
    if (a->first != b->first) return false;
    const auto& x = a->second;
    const auto& y = b->second;
    if (x.values.rows() != y.values.rows() || x.values.cols() != y.values.cols()) return false;
    if (x.values != y.values || x.provenance != y.provenance || x.speaker != y.speaker ||
        x.emotion != y.emotion) {
      return false;
    }
  }
  return true;
}

void save_store(const EmbeddingStore& store, const std::filesystem::path& dir) {
  static_assert(std::endian::native == std::endian::little, "payload layout assumes little-endian");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create embedding directory " + dir.string());
  nlohmann::json j;
  j["format_version"] = 1;
  j["dtype"] = "float32";
  j["byte_order"] = "little";
  j["layout"] = "row-major";
  j["payload"] = "embeddings.f32";
  auto& recs = j["records"] = nlohmann::json::array();
  std::ofstream payload(dir / "embeddings.f32", std::ios::binary | std::ios::trunc);
  if (!payload) throw DataError("cannot write embedding payload in " + dir.string());
  std::uint64_t offset = 0;
  for (const auto& [key, rec] : store.records()) {
    nlohmann::json r = {{"id", key.first},
                        {"kind", std::string(kind_name(key.second))},
                        {"rows", rec.values.rows()},
                        {"cols", rec.values.cols()},
                        {"offset", offset},
                        {"provenance", rec.provenance}};
    if (rec.speaker) r["speaker"] = *rec.speaker;
    if (rec.emotion) r["emotion"] = *rec.emotion;
    recs.push_back(std::move(r));
    const auto bytes = static_cast<std::streamsize>(rec.values.size() * sizeof(float));
    payload.write(reinterpret_cast<const char*>(rec.values.data()), bytes);
    offset += static_cast<std::uint64_t>(bytes);
  }
  if (!payload) throw DataError("embedding payload write failed");
  std::ofstream manifest(dir / "embeddings.json", std::ios::trunc);
  manifest << j.dump(1) << '\n';
  if (!manifest) throw DataError("embedding manifest write failed");
}

EmbeddingStore load_store(const std::filesystem::path& path) {
  const std::filesystem::path manifest_path =
      std::filesystem::is_directory(path) ? path / "embeddings.json" : path;
  std::ifstream mf(manifest_path);
  if (!mf) throw MissingFileError("cannot open embedding manifest " + manifest_path.string());
  EmbeddingStore store;
  try {
    const nlohmann::json j = nlohmann::json::parse(mf);
    if (j.at("format_version").get<int>() != 1) throw DataError("unsupported embedding store version");
    if (j.at("dtype").get<std::string>() != "float32") throw ShapeError("embedding dtype must be float32");
    if (j.value("byte_order", "little") != "little") throw ShapeError("embedding payload must be little-endian");
    const auto payload_path = manifest_path.parent_path() / j.at("payload").get<std::string>();
    std::ifstream pf(payload_path, std::ios::binary);
    if (!pf) throw MissingFileError("cannot open embedding payload " + payload_path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(pf)), std::istreambuf_iterator<char>());
    for (const auto& r : j.at("records")) {
      const std::string id = r.at("id");
      const EmbeddingKind kind = parse_kind(r.at("kind").get<std::string>());
      const auto rows = r.at("rows").get<std::int64_t>();
      const auto cols = r.at("cols").get<std::int64_t>();
      const auto offset = r.at("offset").get<std::uint64_t>();
      if (rows < 0 || cols < 0) throw ShapeError("embedding " + id + ": negative shape");
      const std::uint64_t need = static_cast<std::uint64_t>(rows * cols) * sizeof(float);
      if (offset + need > bytes.size()) {
        throw ShapeError("embedding " + id + ": declared shape " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " exceeds payload (" + std::to_string(bytes.size()) +
                         " bytes)");
      }
      EmbeddingRecord rec;
      rec.values.resize(rows, cols);
      std::memcpy(rec.values.data(), bytes.data() + offset, need);
      rec.provenance = r.value("provenance", "external");
      if (r.contains("speaker")) rec.speaker = r.at("speaker").get<int>();
      if (r.contains("emotion")) rec.emotion = r.at("emotion").get<std::string>();
      store.put(id, kind, std::move(rec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed embedding manifest " + manifest_path.string() + ": " + e.what());
  }
  return store;
}

// ---------------------------------------------------------------------------

Encoders Encoders::oracle(const GeneratorParams& params, const EncoderDims& dims) {
  Encoders e;
  e.backend_ = Backend::kOracle;
  e.dims_ = dims;
  e.hop_ = params.hop;
  e.sample_rate_ = params.sample_rate;
  e.factors_ = std::make_shared<OracleFactors>(params, dims);
  e.analyzer_ = std::make_shared<OracleAnalyzer>(params);
  return e;
}

Encoders Encoders::external(EmbeddingStore store, const EncoderDims& dims, int hop) {
  Encoders e;
  e.backend_ = Backend::kExternal;
  e.dims_ = dims;
  e.hop_ = hop;
  e.store_ = std::make_shared<EmbeddingStore>(std::move(store));
  return e;
}

void Encoders::check_rate(const Waveform& wav) const {
  if (wav.sample_rate != sample_rate_) {
    throw RangeError("encoder: sample rate " + std::to_string(wav.sample_rate) + " != " +
                     std::to_string(sample_rate_));
  }
}

Encoders::All Encoders::encode_all(const Waveform& wav, std::string_view id) const {
  check_rate(wav);
  const std::size_t segments = segment_count(wav.size(), hop_);
  if (backend_ == Backend::kOracle) {
    const CellEstimate cell = analyzer_->classify(wav);
    const auto& spk = factors_->params().speakers[static_cast<std::size_t>(cell.speaker)];
    const auto tokens = analyzer_->decode_tokens(wav, spk.formant_scale);
    return {factors_->content_matrix(tokens, segments),
            factors_->speaker_embedding(cell.speaker, cell.emotion),
            factors_->emotion_embedding(cell.emotion)};
  }
  All out;
  const auto& c = store_->at(id, EmbeddingKind::kContent);
  if (c.values.cols() != dims_.content) {
    throw ShapeError("external content record for '" + std::string(id) + "' has width " +
                     std::to_string(c.values.cols()) + ", expected " + std::to_string(dims_.content));
  }
  if (!wav.samples.empty() && static_cast<std::size_t>(c.values.rows()) != segments) {
    throw ShapeError("external content record for '" + std::string(id) + "' has " +
                     std::to_string(c.values.rows()) + " rows, waveform has " +
                     std::to_string(segments) + " segments");
  }
  out.content.values = c.values;
  out.content.hop = hop_;
  const auto& s = store_->at(id, EmbeddingKind::kSpeaker);
  const auto& e = store_->at(id, EmbeddingKind::kEmotion);
  if (s.values.size() != dims_.speaker) throw ShapeError("external speaker record has wrong dimension");
  if (e.values.size() != dims_.emotion) throw ShapeError("external emotion record has wrong dimension");
  out.speaker.values = Eigen::Map<const Eigen::VectorXf>(s.values.data(), s.values.size());
  out.speaker.unit_norm = std::abs(out.speaker.values.norm() - 1.0f) <= 1e-6f;
  out.emotion.values = Eigen::Map<const Eigen::VectorXf>(e.values.data(), e.values.size());
  return out;
}

ContentMatrix Encoders::encode_content(const Waveform& wav, std::string_view id) const {
  return encode_all(wav, id).content;
}

SpeakerVector Encoders::encode_speaker(const Waveform& wav, std::string_view id) const {
  return encode_all(wav, id).speaker;
}

EmotionVector Encoders::encode_emotion(const Waveform& wav, std::string_view id) const {
  return encode_all(wav, id).emotion;
}

SpeakerVector Encoders::encode_speaker_mean(std::span<const Waveform> wavs,
                                            std::span<const std::string> ids) const {
  if (wavs.empty()) throw DataError("encode_speaker_mean: no utterances");
  Eigen::VectorXf acc = Eigen::VectorXf::Zero(dims_.speaker);
  for (std::size_t i = 0; i < wavs.size(); ++i) {
    acc += encode_speaker(wavs[i], i < ids.size() ? std::string_view(ids[i]) : std::string_view{}).values;
  }
  return {acc.normalized(), true};
}

}  // namespace devc
