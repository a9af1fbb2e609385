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

#include <vector>

#include "devc/audio.hpp"

namespace devc {

struct PitchConfig {
  int hop = 160;      // 10 ms at 16 kHz
  int window = 512;   // 32 ms
  double min_f0 = 50.0;
  double max_f0 = 600.0;
  double voicing_threshold = 0.3;
  double energy_floor = 3e-3;  // frame RMS below this is unvoiced
  double balance_floor = 0.1;  // frames whose half energies differ more are unvoiced
};

struct F0Track {
  std::vector<double> f0;   // Hz, 0 where unvoiced
  std::vector<bool> voiced;
  int hop = 160;
  int sample_rate = kCorpusSampleRate;

  std::size_t size() const { return f0.size(); }
  static F0Track from_values(std::vector<double> f0) {
    F0Track t;
    t.voiced.resize(f0.size());
    for (std::size_t i = 0; i < f0.size(); ++i) t.voiced[i] = f0[i] > 0.0;
    t.f0 = std::move(f0);
    return t;
  }
};

// Frames start every `hop` samples; count = floor((len - window) / hop) + 1,
// or one zero-padded frame when the signal is shorter than a window.
std::size_t analysis_frame_count(std::size_t num_samples, int hop, int window);

// Time-domain normalized autocorrelation pitch tracker. Throws DataError on
// an empty waveform and RangeError unless the rate is 16 kHz.
F0Track extract_f0(const Waveform& wav, const PitchConfig& config = {});

}  // namespace devc
