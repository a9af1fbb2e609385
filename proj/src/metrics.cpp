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

#include "devc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "devc/error.hpp"
#include "devc/spectrum.hpp"

namespace devc {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Eigen::MatrixXd mel_filterbank(const CepstrumConfig& c, int sample_rate) {
  const int bins = c.n_fft / 2 + 1;
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(c.mel_bands, bins);
  const double lo = hz_to_mel(c.min_hz), hi = hz_to_mel(std::min(c.max_hz, sample_rate / 2.0));
  std::vector<double> edges(static_cast<std::size_t>(c.mel_bands) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(edges.size() - 1));
  }
  for (int b = 0; b < c.mel_bands; ++b) {
    const double l = edges[static_cast<std::size_t>(b)], m = edges[static_cast<std::size_t>(b) + 1],
                 r = edges[static_cast<std::size_t>(b) + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / c.n_fft;
      if (f > l && f < r) fb(b, k) = f <= m ? (f - l) / (m - l) : (r - f) / (r - m);
    }
  }
  return fb;
}

std::size_t aligned_length(std::size_t a, std::size_t b) {
  const std::size_t lo = std::min(a, b), hi = std::max(a, b);
  if (lo == 0) throw DataError("F0 track is empty");
  if (static_cast<double>(hi - lo) > 0.2 * static_cast<double>(hi)) {
    throw DataError("F0 tracks differ in length by more than 20% (" + std::to_string(a) + " vs " +
                    std::to_string(b) + " frames)");
  }
  return lo;
}

}  // namespace

CepstraMatrix mel_cepstrum(const Waveform& wav, const CepstrumConfig& c) {
  if (wav.samples.empty()) throw DataError("mel_cepstrum: empty waveform");
  if (wav.sample_rate != kCorpusSampleRate) {
    throw RangeError("mel_cepstrum: expected 16000 Hz, got " + std::to_string(wav.sample_rate));
  }
  if (c.order + 1 > c.mel_bands) throw RangeError("mel_cepstrum: order exceeds band count");
  const Eigen::MatrixXd fb = mel_filterbank(c, wav.sample_rate);
  const std::size_t frames = analysis_frame_count(wav.size(), c.hop, c.window);
  const int bands = c.mel_bands;
  Eigen::MatrixXd dct(c.order + 1, bands);
  for (int n = 0; n <= c.order; ++n) {
    for (int b = 0; b < bands; ++b) {
      dct(n, b) = std::cos(std::numbers::pi * n * (b + 0.5) / bands) / bands;
    }
  }
  CepstraMatrix out(static_cast<Eigen::Index>(frames), c.order + 1);
  std::vector<double> frame(static_cast<std::size_t>(c.window));
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t start = f * static_cast<std::size_t>(c.hop);
    for (std::size_t i = 0; i < frame.size(); ++i) {
      frame[i] = start + i < wav.size() ? wav.samples[start + i] : 0.0;
    }
    const auto p = hann_power_spectrum(frame, c.n_fft);
    const Eigen::VectorXd energy = fb * Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
    Eigen::VectorXd log_amp(bands);
    for (int b = 0; b < bands; ++b) log_amp(b) = 0.5 * std::log(energy(b) + 1e-30);
    out.row(static_cast<Eigen::Index>(f)) = (dct * log_amp).transpose();
  }
  return out;
}

DtwPath dtw_align(const CepstraMatrix& a, const CepstraMatrix& b) {
  if (a.rows() == 0 || b.rows() == 0) throw DataError("dtw_align: empty input");
  if (a.cols() != b.cols()) throw ShapeError("dtw_align: cepstral orders differ");
  const auto n = static_cast<std::size_t>(a.rows()), m = static_cast<std::size_t>(b.rows());
  const Eigen::Index k = a.cols() - 1;
  auto dist = [&](std::size_t i, std::size_t j) {
    return (a.row(static_cast<Eigen::Index>(i)).tail(k) - b.row(static_cast<Eigen::Index>(j)).tail(k)).norm();
  };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> acc(n * m, kInf);
  std::vector<unsigned char> from(n * m, 0);  // 0 diag, 1 up (i-1), 2 left (j-1)
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = dist(i, j);
      if (i == 0 && j == 0) {
        acc[0] = d;
        continue;
      }
      double best = kInf;
      unsigned char dir = 0;
      if (i > 0 && j > 0 && acc[(i - 1) * m + j - 1] < best) best = acc[(i - 1) * m + j - 1], dir = 0;
      if (i > 0 && acc[(i - 1) * m + j] < best) best = acc[(i - 1) * m + j], dir = 1;
      if (j > 0 && acc[i * m + j - 1] < best) best = acc[i * m + j - 1], dir = 2;
      acc[i * m + j] = best + d;
      from[i * m + j] = dir;
    }
  }
  DtwPath path;
  path.cost = acc[n * m - 1];
  std::size_t i = n - 1, j = m - 1;
  path.pairs.emplace_back(i, j);
  while (i > 0 || j > 0) {
    const unsigned char dir = from[i * m + j];
    if (dir == 0) --i, --j;
    else if (dir == 1) --i;
    else --j;
    path.pairs.emplace_back(i, j);
  }
  std::reverse(path.pairs.begin(), path.pairs.end());
  return path;
}

double mcd_cepstra(const CepstraMatrix& reference, const CepstraMatrix& converted) {
  const DtwPath path = dtw_align(reference, converted);
  const Eigen::Index k = reference.cols() - 1;
  double acc = 0.0;
  for (const auto& [i, j] : path.pairs) {
    const double d2 = (reference.row(static_cast<Eigen::Index>(i)).tail(k) -
                       converted.row(static_cast<Eigen::Index>(j)).tail(k))
                          .squaredNorm();
    acc += kMcdConstant * std::sqrt(2.0 * d2);
  }
  return acc / static_cast<double>(path.pairs.size());
}

double mcd(const Waveform& reference, const Waveform& converted, const CepstrumConfig& config) {
  return mcd_cepstra(mel_cepstrum(reference, config), mel_cepstrum(converted, config));
}

double vde(const F0Track& ref, const F0Track& conv) {
  const std::size_t n = aligned_length(ref.size(), conv.size());
  std::size_t errors = 0;
  for (std::size_t i = 0; i < n; ++i) errors += ref.voiced[i] != conv.voiced[i] ? 1 : 0;
  return static_cast<double>(errors) / static_cast<double>(n);
}

double ffe(const F0Track& ref, const F0Track& conv, double threshold) {
  const std::size_t n = aligned_length(ref.size(), conv.size());
  std::size_t errors = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ref.voiced[i] != conv.voiced[i]) {
      ++errors;
    } else if (ref.voiced[i] && std::abs(conv.f0[i] - ref.f0[i]) > threshold * ref.f0[i]) {
      ++errors;
    }
  }
  return static_cast<double>(errors) / static_cast<double>(n);
}

double f0_rmse(const F0Track& ref, const F0Track& conv) {
  const std::size_t n = aligned_length(ref.size(), conv.size());
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ref.voiced[i] && conv.voiced[i]) {
      acc += (conv.f0[i] - ref.f0[i]) * (conv.f0[i] - ref.f0[i]);
      ++count;
    }
  }
  if (count == 0) throw DataError("f0_rmse: no mutually voiced frames");
  return std::sqrt(acc / static_cast<double>(count));
}

// ---------------------------------------------------------------------------

double cosine(const Eigen::VectorXf& a, const Eigen::VectorXf& b) {
  if (a.size() != b.size()) throw ShapeError("cosine: dimension mismatch");
  const double na = a.cast<double>().norm(), nb = b.cast<double>().norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.cast<double>().dot(b.cast<double>()) / (na * nb);
}

std::map<int, Eigen::VectorXf> enroll(std::span<const LabeledVector> vectors) {
  std::map<int, Eigen::VectorXd> sums;
  for (const auto& [spk, v] : vectors) {
    auto [it, fresh] = sums.try_emplace(spk, Eigen::VectorXd::Zero(v.size()));
    if (it->second.size() != v.size()) throw ShapeError("enroll: dimension mismatch");
    it->second += v.cast<double>().normalized();
  }
  std::map<int, Eigen::VectorXf> out;
  for (const auto& [spk, s] : sums) out[spk] = s.normalized().cast<float>();
  return out;
}

SvCalibration calibrate_sv(const std::map<int, Eigen::VectorXf>& enrollment,
                           std::span<const LabeledVector> genuine) {
  std::vector<double> target, nontarget;
  for (const auto& [spk, v] : genuine) {
    for (const auto& [enrolled, mean] : enrollment) {
      (enrolled == spk ? target : nontarget).push_back(cosine(v, mean));
    }
  }
  if (target.empty() || nontarget.empty()) {
    throw DataError("SV calibration needs both same-speaker and different-speaker trials");
  }
  std::vector<double> all = target;
  all.insert(all.end(), nontarget.begin(), nontarget.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<double> candidates{all.front() - 1e-6};
  for (std::size_t i = 0; i + 1 < all.size(); ++i) candidates.push_back(0.5 * (all[i] + all[i + 1]));
  candidates.push_back(all.back() + 1e-6);

  SvCalibration best;
  best.target_trials = target.size();
  best.nontarget_trials = nontarget.size();
  double best_err = std::numeric_limits<double>::infinity();
  for (double th : candidates) {
    const auto fr = std::count_if(target.begin(), target.end(), [&](double s) { return s < th; });
    const auto fa = std::count_if(nontarget.begin(), nontarget.end(), [&](double s) { return s >= th; });
    const double frr = static_cast<double>(fr) / static_cast<double>(target.size());
    const double far = static_cast<double>(fa) / static_cast<double>(nontarget.size());
    const double err = std::max(frr, far);
    if (err < best_err) {
      best_err = err;
      best.threshold = th;
      best.eer = 0.5 * (frr + far);
    }
  }
  return best;
}

double sv_accuracy(std::span<const LabeledVector> trials, const std::map<int, Eigen::VectorXf>& enrollment,
                   const SvCalibration& calibration) {
  if (trials.empty()) throw DataError("sv_accuracy: no trials");
  std::size_t accepted = 0;
  for (const auto& [spk, v] : trials) {
    const auto it = enrollment.find(spk);
    if (it == enrollment.end()) throw DataError("sv_accuracy: speaker " + std::to_string(spk) + " not enrolled");
    accepted += cosine(v, it->second) >= calibration.threshold ? 1 : 0;
  }
  return static_cast<double>(accepted) / static_cast<double>(trials.size());
}

}  // namespace devc
