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

#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "devc/audio.hpp"
#include "devc/pitch.hpp"

namespace devc {

struct CepstrumConfig {
  int hop = 160;
  int window = 400;
  int n_fft = 512;
  int mel_bands = 40;
  int order = 24;  // coefficients 0..order
  double min_hz = 0.0;
  double max_hz = 8000.0;
};

// Frames x (order + 1). Column 0 is the log-energy term.
using CepstraMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Hann window -> power spectrum -> triangular mel bands -> natural-log
// amplitude -> DCT-II. Frame count is analysis_frame_count(len, hop, window).
CepstraMatrix mel_cepstrum(const Waveform& wav, const CepstrumConfig& config = {});

struct DtwPath {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double cost = 0.0;
};

// Frame cost: Euclidean distance over coefficients 1..M. Steps (1,0), (0,1),
// (1,1); the path starts at (0,0) and ends at (n-1, m-1).
DtwPath dtw_align(const CepstraMatrix& a, const CepstraMatrix& b);

inline constexpr double kMcdConstant = 4.342944819032518;  // 10 / ln 10

// Mean over the DTW path of (10/ln10) sqrt(2 sum_{i>=1} (c_i - c'_i)^2).
double mcd_cepstra(const CepstraMatrix& reference, const CepstraMatrix& converted);
double mcd(const Waveform& reference, const Waveform& converted, const CepstrumConfig& config = {});

// Track pairs are truncated to the shorter length; a length gap above 20%
// of the longer track is a DataError.
double vde(const F0Track& ref, const F0Track& conv);
double ffe(const F0Track& ref, const F0Track& conv, double threshold = 0.2);
// Throws DataError without mutually voiced frames.
double f0_rmse(const F0Track& ref, const F0Track& conv);

// ---------------------------------------------------------------------------
// Speaker verification

using LabeledVector = std::pair<int, Eigen::VectorXf>;

double cosine(const Eigen::VectorXf& a, const Eigen::VectorXf& b);

// Per-speaker normalized mean of enrollment vectors.
std::map<int, Eigen::VectorXf> enroll(std::span<const LabeledVector> vectors);

struct SvCalibration {
  double threshold = 0.0;
  double eer = 0.0;
  std::size_t target_trials = 0;
  std::size_t nontarget_trials = 0;
};

// Scores every genuine utterance against every enrolled speaker. The
// threshold minimizes max(FAR, FRR) over midpoints between sorted scores;
// for separable classes this is the midpoint of the gap.
SvCalibration calibrate_sv(const std::map<int, Eigen::VectorXf>& enrollment,
                           std::span<const LabeledVector> genuine);

// Fraction of trials (target speaker, vector) whose cosine to the target's
// enrollment mean reaches the threshold.
double sv_accuracy(std::span<const LabeledVector> trials, const std::map<int, Eigen::VectorXf>& enrollment,
                   const SvCalibration& calibration);

}  // namespace devc
