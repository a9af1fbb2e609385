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
#include <functional>
#include <limits>
#include <numbers>

#include "devc/error.hpp"
#include "devc/metrics.hpp"
#include "devc/pitch.hpp"
#include "devc/rng.hpp"

namespace devc {
namespace {

Waveform tone(double hz, double amp, std::size_t n) {
  Waveform w;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.samples[i] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / 16000.0));
  }
  return w;
}

TEST(Pitch, PureTone) {
  const F0Track t = extract_f0(tone(200.0, 0.5, 16000));
  std::vector<double> f;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t.voiced[i]) f.push_back(t.f0[i]);
  }
  EXPECT_GE(static_cast<double>(f.size()), 0.95 * static_cast<double>(t.size()));
  std::nth_element(f.begin(), f.begin() + static_cast<std::ptrdiff_t>(f.size() / 2), f.end());
  EXPECT_NEAR(f[f.size() / 2], 200.0, 4.0);
}

TEST(Pitch, LowNoiseAndSilence) {
  Rng rng(4);
  std::normal_distribution<float> n(0.0f, 0.002f);
  Waveform noise;
  noise.samples.resize(16000);
  for (auto& v : noise.samples) v = n(rng);
  const F0Track tn = extract_f0(noise);
  const auto unvoiced = std::count(tn.voiced.begin(), tn.voiced.end(), false);
  EXPECT_GE(static_cast<double>(unvoiced), 0.9 * static_cast<double>(tn.size()));

  Waveform silence;
  silence.samples.assign(8000, 0.0f);
  const F0Track ts = extract_f0(silence);
  for (std::size_t i = 0; i < ts.size(); ++i) EXPECT_FALSE(ts.voiced[i]);
}

TEST(Pitch, VoicedIffPositive) {
  const F0Track t = extract_f0(tone(130.0, 0.3, 8000));
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(t.voiced[i], t.f0[i] > 0.0);
    if (t.voiced[i]) {
      EXPECT_GE(t.f0[i], 50.0);
      EXPECT_LE(t.f0[i], 600.0);
    }
  }
}

TEST(Pitch, Errors) {
  EXPECT_THROW(extract_f0(Waveform{}), DataError);
  Waveform w = tone(100.0, 0.5, 1000);
  w.sample_rate = 8000;
  EXPECT_THROW(extract_f0(w), RangeError);
}

TEST(Cepstrum, FrameCountAndIdentity) {
  for (std::size_t n : {400u, 401u, 559u, 560u, 16000u}) {
    const auto c = mel_cepstrum(tone(300.0, 0.3, n));
    EXPECT_EQ(static_cast<std::size_t>(c.rows()), (n - 400) / 160 + 1);
    EXPECT_EQ(c.cols(), 25);
  }
  const Waveform w = tone(220.0, 0.4, 4000);
  EXPECT_EQ(mel_cepstrum(w), mel_cepstrum(w));
  EXPECT_THROW(mel_cepstrum(Waveform{}), DataError);
}

TEST(Cepstrum, AmplitudeScalingMovesOnlyC0) {
  for (double hz : {150.0, 440.0, 1000.0}) {
    Waveform a = tone(hz, 0.2, 6400), b = a;
    for (auto& v : b.samples) v *= 2.0f;
    const auto ca = mel_cepstrum(a), cb = mel_cepstrum(b);
    for (Eigen::Index f = 0; f < ca.rows(); ++f) {
      EXPECT_NEAR(cb(f, 0) - ca(f, 0), std::log(2.0), 1e-3);
      for (Eigen::Index k = 1; k < ca.cols(); ++k) EXPECT_NEAR(ca(f, k), cb(f, k), 1e-3);
    }
  }
}

CepstraMatrix random_cepstra(Rng& rng, Eigen::Index frames, Eigen::Index order = 24) {
  std::normal_distribution<double> n;
  CepstraMatrix c(frames, order + 1);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = n(rng);
  return c;
}

double brute_force_dtw(const CepstraMatrix& a, const CepstraMatrix& b) {
  const Eigen::Index k = a.cols() - 1;
  double best = std::numeric_limits<double>::infinity();
  std::function<void(Eigen::Index, Eigen::Index, double)> walk = [&](Eigen::Index i, Eigen::Index j, double acc) {
    acc += (a.row(i).tail(k) - b.row(j).tail(k)).norm();
    if (i == a.rows() - 1 && j == b.rows() - 1) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < a.rows()) walk(i + 1, j, acc);
    if (j + 1 < b.rows()) walk(i, j + 1, acc);
    if (i + 1 < a.rows() && j + 1 < b.rows()) walk(i + 1, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

TEST(Dtw, IdentityIsDiagonal) {
  Rng rng(1);
  const auto a = random_cepstra(rng, 7);
  const DtwPath p = dtw_align(a, a);
  EXPECT_EQ(p.cost, 0.0);
  ASSERT_EQ(p.pairs.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(p.pairs[i], std::make_pair(i, i));
}

TEST(Dtw, DuplicatedFrameCostsNothing) {
  Rng rng(2);
  const auto a = random_cepstra(rng, 6);
  CepstraMatrix b(7, a.cols());
  b.topRows(3) = a.topRows(3);
  b.row(3) = a.row(2);
  b.bottomRows(3) = a.bottomRows(3);
  const DtwPath p = dtw_align(a, b);
  EXPECT_EQ(p.cost, 0.0);
  EXPECT_NE(std::find(p.pairs.begin(), p.pairs.end(), std::make_pair<std::size_t, std::size_t>(2, 3)), p.pairs.end());
}

TEST(Dtw, MatchesBruteForce) {
  Rng rng(3);
  std::uniform_int_distribution<int> len(1, 6);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_cepstra(rng, len(rng), 4), b = random_cepstra(rng, len(rng), 4);
    EXPECT_NEAR(dtw_align(a, b).cost, brute_force_dtw(a, b), 1e-9);
  }
}

TEST(Dtw, EmptyInput) {
  EXPECT_THROW(dtw_align(CepstraMatrix(0, 25), CepstraMatrix(3, 25)), DataError);
}

TEST(Mcd, ZeroForIdentical) {
  const Waveform w = tone(180.0, 0.3, 4800);
  EXPECT_EQ(mcd(w, w), 0.0);
}

TEST(Mcd, SingleCoefficientOffset) {
  Rng rng(5);
  const auto a = random_cepstra(rng, 9);
  CepstraMatrix b = a;
  b.col(0).array() += 7.0;  // excluded
  b.col(5).array() += 1.0;
  EXPECT_NEAR(mcd_cepstra(a, b), 10.0 / std::log(10.0) * std::sqrt(2.0), 1e-6);
}

TEST(Mcd, AmplitudeInvariant) {
  Waveform a = tone(210.0, 0.2, 4800), b = tone(330.0, 0.2, 4800);
  Waveform b2 = b;
  for (auto& v : b2.samples) v *= 0.5f;
  EXPECT_NEAR(mcd(a, b), mcd(a, b2), 1e-3);
}

F0Track track(std::vector<double> f0) { return F0Track::from_values(std::move(f0)); }

TEST(PitchMetrics, VdeHandCases) {
  std::vector<double> f(10, 100.0);
  EXPECT_EQ(vde(track(f), track(f)), 0.0);
  std::vector<double> g = f;
  g[1] = 0.0;
  g[6] = 0.0;
  EXPECT_DOUBLE_EQ(vde(track(f), track(g)), 0.2);
  std::vector<double> h = {100, 0, 100, 0}, k = {0, 120, 0, 90};
  EXPECT_DOUBLE_EQ(vde(track(h), track(k)), 1.0);
}

TEST(PitchMetrics, FfeHandCases) {
  std::vector<double> f(10, 100.0);
  EXPECT_EQ(ffe(track(f), track(f)), 0.0);
  std::vector<double> g = f;
  g[0] = 0.0;
  g[4] = 125.0;
  EXPECT_DOUBLE_EQ(ffe(track(f), track(g)), 0.2);
  std::vector<double> h = f;
  h[4] = 115.0;
  EXPECT_EQ(ffe(track(f), track(h)), 0.0);
}

TEST(PitchMetrics, F0RmseHandCases) {
  EXPECT_DOUBLE_EQ(f0_rmse(track(std::vector<double>(5, 100.0)), track(std::vector<double>(5, 110.0))), 10.0);
  EXPECT_EQ(f0_rmse(track({100, 200}), track({100, 200})), 0.0);
  EXPECT_DOUBLE_EQ(f0_rmse(track({100, 200}), track({110, 190})), 10.0);
  EXPECT_THROW(f0_rmse(track({100, 0}), track({0, 100})), DataError);
}

TEST(PitchMetrics, LengthHandling) {
  std::vector<double> a(10, 100.0), b(9, 100.0), c(5, 100.0);
  EXPECT_EQ(vde(track(a), track(b)), 0.0);
  EXPECT_THROW(vde(track(a), track(c)), DataError);
}

TEST(PitchMetrics, VdeNeverExceedsFfe) {
  Rng rng(6);
  std::uniform_int_distribution<int> len(1, 40);
  std::uniform_real_distribution<double> hz(60.0, 400.0), coin(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = len(rng);
    std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      a[static_cast<std::size_t>(i)] = coin(rng) < 0.3 ? 0.0 : hz(rng);
      b[static_cast<std::size_t>(i)] = coin(rng) < 0.3 ? 0.0 : hz(rng);
    }
    EXPECT_LE(vde(track(a), track(b)), ffe(track(a), track(b)));
  }
}

TEST(SpeakerVerification, CalibratedThresholdSeparatesGenuine) {
  Rng rng(7);
  std::normal_distribution<float> n(0.0f, 0.05f);
  std::vector<Eigen::VectorXf> centers;
  for (int s = 0; s < 4; ++s) centers.push_back(Eigen::VectorXf::Unit(8, s) + Eigen::VectorXf::Constant(8, 0.2f));
  auto draw = [&](int s) {
    Eigen::VectorXf v = centers[static_cast<std::size_t>(s)];
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += n(rng);
    return LabeledVector{s, v.normalized()};
  };
  std::vector<LabeledVector> enroll_set, genuine, same, other;
  for (int s = 0; s < 4; ++s) {
    for (int k = 0; k < 5; ++k) {
      enroll_set.push_back(draw(s));
      genuine.push_back(draw(s));
      same.push_back(draw(s));
      LabeledVector impostor = draw((s + 1) % 4);
      impostor.first = s;
      other.push_back(impostor);
    }
  }
  const auto means = enroll(enroll_set);
  const SvCalibration cal = calibrate_sv(means, genuine);
  EXPECT_EQ(cal.eer, 0.0);
  EXPECT_EQ(sv_accuracy(same, means, cal), 1.0);
  EXPECT_EQ(sv_accuracy(other, means, cal), 0.0);
}

TEST(SpeakerVerification, GapMidpoint) {
  std::map<int, Eigen::VectorXf> means = {{0, Eigen::Vector2f(1.0f, 0.0f)}, {1, Eigen::Vector2f(0.0f, 1.0f)}};
  const std::vector<LabeledVector> genuine = {{0, Eigen::Vector2f(1.0f, 0.0f)}, {1, Eigen::Vector2f(0.0f, 1.0f)}};
  const SvCalibration cal = calibrate_sv(means, genuine);
  EXPECT_NEAR(cal.threshold, 0.5, 1e-12);
  EXPECT_EQ(cal.target_trials, 2u);
  EXPECT_EQ(cal.nontarget_trials, 2u);
}

TEST(SpeakerVerification, Errors) {
  std::map<int, Eigen::VectorXf> one = {{0, Eigen::Vector2f(1.0f, 0.0f)}};
  const std::vector<LabeledVector> g = {{0, Eigen::Vector2f(1.0f, 0.0f)}};
  EXPECT_THROW(calibrate_sv(one, g), DataError);
  EXPECT_THROW(sv_accuracy(std::span<const LabeledVector>{}, one, SvCalibration{}), DataError);
}

}  // namespace
}  // namespace devc
