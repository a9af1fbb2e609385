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

#include "devc/checkpoint.hpp"

#include <bit>
#include <fstream>

#include "devc/error.hpp"

namespace devc {

namespace {

std::filesystem::path payload_path(const std::filesystem::path& json_path) {
  auto p = json_path;
  p.replace_extension(".bin");
  return p;
}

std::filesystem::path resolve_json(const std::filesystem::path& path) {
  if (path.extension() == ".json") return path;
  auto p = path;
  p += ".json";
  return p;
}

void write_floats(std::ofstream& out, const std::vector<float>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

std::vector<float> read_floats(std::ifstream& in, std::size_t n, const std::string& what) {
  std::vector<float> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != n * sizeof(float)) {
    throw ShapeError("checkpoint payload too short while reading " + what);
  }
  return v;
}

}  // namespace

nlohmann::json to_json(const DecoderConfig& c) {
  return {{"n_residual_blocks", c.n_residual_blocks},
          {"residual_channels", c.residual_channels},
          {"dilation_cycle_length", c.dilation_cycle_length},
          {"step_embed_dim", c.step_embed_dim},
          {"conditioning_dim", c.conditioning_dim}};
}

DecoderConfig decoder_config_from_json(const nlohmann::json& j) {
  DecoderConfig c;
  c.n_residual_blocks = j.at("n_residual_blocks");
  c.residual_channels = j.at("residual_channels");
  c.dilation_cycle_length = j.at("dilation_cycle_length");
  c.step_embed_dim = j.at("step_embed_dim");
  c.conditioning_dim = j.at("conditioning_dim");
  c.validate();
  return c;
}

nlohmann::json to_json(const EncoderDims& d) {
  return {{"content", d.content}, {"speaker", d.speaker}, {"emotion", d.emotion}};
}

EncoderDims encoder_dims_from_json(const nlohmann::json& j) {
  EncoderDims d;
  d.content = j.at("content");
  d.speaker = j.at("speaker");
  d.emotion = j.at("emotion");
  if (d.content <= 0 || d.speaker <= 0 || d.emotion <= 0) throw RangeError("encoder dims must be positive");
  return d;
}

void Checkpoint::validate() const {
  decoder.validate();
  if (decoder.conditioning_dim != dims.total()) {
    throw ShapeError("checkpoint: decoder conditioning_dim " + std::to_string(decoder.conditioning_dim) +
                     " != encoder dims total " + std::to_string(dims.total()));
  }
  if (hop <= 0) throw RangeError("checkpoint: hop must be positive");
  if (!(waveform_scale > 0.0) || !std::isfinite(waveform_scale)) {
    throw RangeError("checkpoint: waveform_scale must be positive");
  }
  const std::size_t n = Denoiser<float>(decoder).num_parameters();
  if (parameters.size() != n) {
    throw ShapeError("checkpoint: " + std::to_string(parameters.size()) + " parameters, decoder expects " +
                     std::to_string(n));
  }
  if (optimizer && (optimizer->m.size() != n || optimizer->v.size() != n)) {
    throw ShapeError("checkpoint: optimizer state size mismatch");
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "payload layout assumes little-endian");
  ckpt.validate();
  const auto json_path = resolve_json(path);
  if (json_path.has_parent_path()) std::filesystem::create_directories(json_path.parent_path());
  nlohmann::json j;
  j["format_version"] = Checkpoint::kFormatVersion;
  j["decoder"] = to_json(ckpt.decoder);
  j["schedule"] = {{"steps", ckpt.schedule.steps},
                   {"beta_start", ckpt.schedule.beta_start},
                   {"beta_end", ckpt.schedule.beta_end}};
  j["encoder_dims"] = to_json(ckpt.dims);
  j["hop"] = ckpt.hop;
  j["waveform_scale"] = ckpt.waveform_scale;
  j["backend"] = std::string(backend_name(ckpt.backend));
  if (ckpt.generator) j["generator"] = to_json(*ckpt.generator);
  j["step"] = ckpt.step;
  j["seed"] = ckpt.seed;
  j["num_parameters"] = ckpt.parameters.size();
  j["optimizer"] = ckpt.optimizer ? nlohmann::json{{"type", "adam"}, {"step", ckpt.optimizer->step}}
                                  : nlohmann::json(nullptr);
  j["conditioning_checksum"] = ckpt.conditioning_checksum;
  j["train_config"] = ckpt.train_config;
  j["payload"] = payload_path(json_path).filename().string();
  j["dtype"] = "float32";

  std::ofstream bin(payload_path(json_path), std::ios::binary | std::ios::trunc);
  if (!bin) throw DataError("cannot write checkpoint payload " + payload_path(json_path).string());
  write_floats(bin, ckpt.parameters);
  if (ckpt.optimizer) {
    write_floats(bin, ckpt.optimizer->m);
    write_floats(bin, ckpt.optimizer->v);
  }
  if (!bin) throw DataError("checkpoint payload write failed");
  std::ofstream js(json_path, std::ios::trunc);
  js << j.dump(1) << '\n';
  if (!js) throw DataError("cannot write checkpoint " + json_path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto json_path = resolve_json(path);
  std::ifstream js(json_path);
  if (!js) throw MissingFileError("cannot open checkpoint " + json_path.string());
  Checkpoint c;
  try {
    const auto j = nlohmann::json::parse(js);
    if (j.at("format_version").get<int>() != Checkpoint::kFormatVersion) {
      throw DataError("unsupported checkpoint format version");
    }
    if (j.value("dtype", "float32") != "float32") throw ShapeError("checkpoint dtype must be float32");
    c.decoder = decoder_config_from_json(j.at("decoder"));
    c.schedule = {j.at("schedule").at("steps"), j.at("schedule").at("beta_start"),
                  j.at("schedule").at("beta_end")};
    c.dims = encoder_dims_from_json(j.at("encoder_dims"));
    c.hop = j.at("hop");
    c.waveform_scale = j.value("waveform_scale", 1.0);
    c.backend = parse_backend(j.value("backend", "oracle"));
    if (j.contains("generator")) c.generator = generator_params_from_json(j.at("generator"));
    c.step = j.value("step", std::int64_t{0});
    c.seed = j.value("seed", std::uint64_t{0});
    c.conditioning_checksum = j.value("conditioning_checksum", std::uint64_t{0});
    c.train_config = j.value("train_config", nlohmann::json::object());
    const std::size_t n = j.at("num_parameters");
    const auto bin_path = json_path.parent_path() / j.at("payload").get<std::string>();
    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) throw MissingFileError("cannot open checkpoint payload " + bin_path.string());
    c.parameters = read_floats(bin, n, "parameters");
    if (!j.at("optimizer").is_null()) {
      AdamState a;
      a.step = j.at("optimizer").at("step");
      a.m = read_floats(bin, n, "adam m");
      a.v = read_floats(bin, n, "adam v");
      c.optimizer = std::move(a);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint " + json_path.string() + ": " + e.what());
  }
  c.schedule.build();
  c.validate();
  return c;
}

}  // namespace devc
