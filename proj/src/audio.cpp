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

#include "devc/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "devc/error.hpp"

namespace devc {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

std::size_t segment_count(std::size_t num_samples, int hop) {
  if (hop <= 0) throw RangeError("segment_count: hop must be positive");
  return num_samples / static_cast<std::size_t>(hop);
}

std::size_t segment_count(const Waveform& wav, const FrameGrid& grid) {
  if (!grid.valid()) throw RangeError("segment_count: invalid frame grid");
  return segment_count(wav.samples.size(), grid.hop);
}

std::int16_t quantize_sample(float x) {
  if (!std::isfinite(x)) throw NumericError("write_wav: non-finite sample");
  const double c = std::clamp(static_cast<double>(x), -1.0, 1.0);
  const double q = std::round(c * 32768.0);
  return static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0));
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("read_wav: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw UnsupportedFormatError("read_wav: not a RIFF/WAVE file: " + path.string());
  }

  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::uint32_t size = read_u32(hdr + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw UnsupportedFormatError("read_wav: truncated chunk");
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (size < 16) throw UnsupportedFormatError("read_wav: short fmt chunk");
      const std::uint16_t format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      // 0xFFFE (extensible) is accepted when it wraps plain PCM.
      if (format != 1 && format != 0xFFFE) {
        throw UnsupportedFormatError("read_wav: compressed or non-PCM format " +
                                     std::to_string(format));
      }
      if (channels != 1) {
        throw NotMonoError("read_wav: expected mono, got " + std::to_string(channels) +
                           " channels");
      }
      if (bits != 16) {
        throw UnsupportedFormatError("read_wav: unsupported bit depth " + std::to_string(bits));
      }
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (!have_fmt) throw UnsupportedFormatError("read_wav: data chunk before fmt chunk");
      Waveform wav;
      wav.sample_rate = static_cast<int>(rate);
      const std::size_t n = size / 2;
      wav.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto v = static_cast<std::int16_t>(read_u16(bytes.data() + body + 2 * i));
        wav.samples[i] = static_cast<float>(v) / 32768.0f;
      }
      return wav;
    }
    pos = body + size + (size & 1u);
  }
  throw UnsupportedFormatError("read_wav: no data chunk in " + path.string());
}

void write_wav(const Waveform& wav, const std::filesystem::path& path) {
  if (wav.sample_rate <= 0) throw RangeError("write_wav: sample rate must be positive");
  const auto n = static_cast<std::uint32_t>(wav.samples.size());
  std::vector<unsigned char> out;
  out.reserve(44 + 2 * static_cast<std::size_t>(n));
  put_tag(out, "RIFF");
  put_u32(out, 36 + 2 * n);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(wav.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(wav.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, 2 * n);
  for (float x : wav.samples) put_u16(out, static_cast<std::uint16_t>(quantize_sample(x)));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("write_wav: cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("write_wav: write failed for " + path.string());
}

}  // namespace devc
