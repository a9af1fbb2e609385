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

#include "devc/pitch.hpp"

#include <algorithm>
#include <cmath>

#include "devc/error.hpp"

namespace devc {

std::size_t analysis_frame_count(std::size_t num_samples, int hop, int window) {
  if (num_samples == 0) return 0;
  const auto w = static_cast<std::size_t>(window);
  if (num_samples < w) return 1;
  return (num_samples - w) / static_cast<std::size_t>(hop) + 1;
}

F0Track extract_f0(const Waveform& wav, const PitchConfig& cfg) {
  if (wav.samples.empty()) throw DataError("extract_f0: empty waveform");
  if (wav.sample_rate != kCorpusSampleRate) {
    throw RangeError("extract_f0: expected 16000 Hz, got " + std::to_string(wav.sample_rate));
  }
  const int w = cfg.window;
  const int lag_min = static_cast<int>(std::floor(wav.sample_rate / cfg.max_f0));
  const int lag_max = std::min(w - 2, static_cast<int>(std::ceil(wav.sample_rate / cfg.min_f0)));
  const std::size_t frames = analysis_frame_count(wav.size(), cfg.hop, w);

  F0Track track;
  track.hop = cfg.hop;
  track.sample_rate = wav.sample_rate;
  track.f0.assign(frames, 0.0);
  track.voiced.assign(frames, false);

  std::vector<double> x(static_cast<std::size_t>(w));
  std::vector<double> r(static_cast<std::size_t>(lag_max + 2), 0.0);
  std::vector<double> csum(static_cast<std::size_t>(w) + 1);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t start = f * static_cast<std::size_t>(cfg.hop);
    double mean = 0.0;
    for (int i = 0; i < w; ++i) {
      const std::size_t k = start + static_cast<std::size_t>(i);
      x[static_cast<std::size_t>(i)] = k < wav.size() ? wav.samples[k] : 0.0;
      mean += x[static_cast<std::size_t>(i)];
    }
    mean /= w;
    double energy = 0.0;
    csum[0] = 0.0;
    for (int i = 0; i < w; ++i) {
      x[static_cast<std::size_t>(i)] -= mean;
      energy += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
      csum[static_cast<std::size_t>(i) + 1] = energy;
    }
    if (std::sqrt(energy / w) < cfg.energy_floor) continue;
    const double head = csum[static_cast<std::size_t>(w / 2)];
    if (std::min(head, energy - head) < cfg.balance_floor * std::max(head, energy - head)) continue;

    for (int lag = lag_min - 1; lag <= lag_max + 1; ++lag) {
      const int n = w - lag;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i + lag)];
      const double e0 = csum[static_cast<std::size_t>(n)];
      const double e1 = csum[static_cast<std::size_t>(w)] - csum[static_cast<std::size_t>(lag)];
      r[static_cast<std::size_t>(lag)] = e0 > 0.0 && e1 > 0.0 ? acc / std::sqrt(e0 * e1) : 0.0;
    }

    double best = -1.0;
    for (int lag = lag_min; lag <= lag_max; ++lag) best = std::max(best, r[static_cast<std::size_t>(lag)]);
    if (best < cfg.voicing_threshold) continue;

    // Shortest-lag local maximum close to the global one avoids octave drops.
    int pick = -1;
    for (int lag = lag_min; lag <= lag_max; ++lag) {
      const double v = r[static_cast<std::size_t>(lag)];
      if (v >= r[static_cast<std::size_t>(lag - 1)] && v >= r[static_cast<std::size_t>(lag + 1)] &&
          v >= 0.9 * best) {
        pick = lag;
        break;
      }
    }
    if (pick < 0) continue;
    const double ym = r[static_cast<std::size_t>(pick - 1)];
    const double y0 = r[static_cast<std::size_t>(pick)];
    const double yp = r[static_cast<std::size_t>(pick + 1)];
    const double denom = ym - 2.0 * y0 + yp;
    const double shift = std::abs(denom) > 1e-12 ? std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5) : 0.0;
    const double f0 = wav.sample_rate / (pick + shift);
    if (f0 < cfg.min_f0 || f0 > cfg.max_f0) continue;
    track.f0[f] = f0;
    track.voiced[f] = true;
  }
  return track;
}

}  // namespace devc
