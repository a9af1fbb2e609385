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

#include <Eigen/Dense>

namespace devc {

struct EncoderDims {
  int content = 16;
  int speaker = 8;
  int emotion = 4;

  int total() const { return content + speaker + emotion; }
  bool operator==(const EncoderDims&) const = default;

  static EncoderDims toy() { return {16, 8, 4}; }
  static EncoderDims paper() { return {256, 256, 128}; }
};

// S x D_c, one row per hop-sized segment.
struct ContentMatrix {
  Eigen::MatrixXf values;
  int hop = 320;

  Eigen::Index segments() const { return values.rows(); }
};

struct SpeakerVector {
  Eigen::VectorXf values;
  bool unit_norm = false;
};

struct EmotionVector {
  Eigen::VectorXf values;
};

}  // namespace devc
