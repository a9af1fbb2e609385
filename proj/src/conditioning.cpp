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

#include "devc/conditioning.hpp"

#include <string>

#include "devc/error.hpp"

namespace devc {

Eigen::MatrixXf upsample_embedding(const Eigen::VectorXf& v, Eigen::Index segments) {
  if (segments <= 0) throw RangeError("upsample_embedding: segment count must be >= 1");
  return v.transpose().replicate(segments, 1);
}

Conditioning assemble_conditioning(const ContentMatrix& content, const SpeakerVector& speaker,
                                   const EmotionVector& emotion, const EncoderDims& dims) {
  auto check = [](const char* block, Eigen::Index got, int want) {
    if (got != want) {
      throw ShapeError(std::string("assemble_conditioning: ") + block + " block has width " +
                       std::to_string(got) + ", expected " + std::to_string(want));
    }
  };
  check("content", content.values.cols(), dims.content);
  check("speaker", speaker.values.size(), dims.speaker);
  check("emotion", emotion.values.size(), dims.emotion);
  const Eigen::Index s = content.values.rows();
  if (s == 0) throw RangeError("assemble_conditioning: content matrix has no segments");

  Conditioning c;
  c.dims = dims;
  c.values.resize(s, dims.total());
  c.values.leftCols(dims.content) = content.values;
  c.values.middleCols(dims.content, dims.speaker) = upsample_embedding(speaker.values, s);
  c.values.rightCols(dims.emotion) = upsample_embedding(emotion.values, s);
  return c;
}

}  // namespace devc
