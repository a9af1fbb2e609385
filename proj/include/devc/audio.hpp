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
#include <cstdint>
#include <filesystem>
#include <vector>

namespace devc {

inline constexpr int kCorpusSampleRate = 16000;

// Mono real-valued signal. Samples are nominally in [-1, 1]; the writer
// clips before quantizing.
struct Waveform {
  std::vector<float> samples;
  int sample_rate = kCorpusSampleRate;

  std::size_t size() const { return samples.size(); }
  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
  bool operator==(const Waveform&) const = default;
};

struct FrameGrid {
  int hop = 320;
  int window = 320;

  // hop > 0 and window >= hop.
  bool valid() const { return hop > 0 && window >= hop; }
};

// S = floor(num_samples / hop). Throws RangeError for an invalid grid.
std::size_t segment_count(const Waveform& wav, const FrameGrid& grid);
std::size_t segment_count(std::size_t num_samples, int hop);

// RIFF PCM, mono, 16-bit little-endian.
Waveform read_wav(const std::filesystem::path& path);
void write_wav(const Waveform& wav, const std::filesystem::path& path);

// Clip-then-quantize used by write_wav, exposed for tests.
std::int16_t quantize_sample(float x);

}  // namespace devc
