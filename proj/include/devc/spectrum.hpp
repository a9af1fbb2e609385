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

#include <span>
#include <vector>

namespace devc {

// Power spectrum (|X_k|^2, k = 0..n_fft/2) of a Hann-windowed frame,
// zero-padded to n_fft. n_fft must be a power of two >= frame.size().
std::vector<double> hann_power_spectrum(std::span<const double> frame, int n_fft);

// Real cepstrum smoothing of a log spectrum (bins 0..n_fft/2): keeps
// quefrencies below `lifter` and returns the smoothed log spectrum.
std::vector<double> lifter_log_spectrum(std::span<const double> log_spectrum, int lifter);

}  // namespace devc
