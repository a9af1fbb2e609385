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

#include "devc/embeddings.hpp"

namespace devc {

// S x (D_c + D_s + D_e), column blocks [content | speaker | emotion]. The
// speaker and emotion blocks repeat one utterance-level vector on every row.
struct Conditioning {
  Eigen::MatrixXf values;
  EncoderDims dims;

  Eigen::Index segments() const { return values.rows(); }
  auto content_block() const { return values.leftCols(dims.content); }
  auto speaker_block() const { return values.middleCols(dims.content, dims.speaker); }
  auto emotion_block() const { return values.rightCols(dims.emotion); }
};

// Repeats an utterance-level vector S times. Throws RangeError when S == 0.
Eigen::MatrixXf upsample_embedding(const Eigen::VectorXf& v, Eigen::Index segments);

// Throws ShapeError naming the offending block when widths disagree with dims.
Conditioning assemble_conditioning(const ContentMatrix& content, const SpeakerVector& speaker,
                                   const EmotionVector& emotion, const EncoderDims& dims);

}  // namespace devc
