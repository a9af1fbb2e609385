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

#include "devc/schedule.hpp"

#include <string>

namespace devc {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) throw RangeError("noise schedule needs at least one step");
  const std::size_t n = betas_.size();
  alphas_.resize(n);
  alpha_bars_.resize(n);
  sigma2_.resize(n);
  double ab = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double b = betas_[i];
    if (!(b > 0.0 && b < 1.0)) throw RangeError("beta must lie in (0, 1)");
    if (i > 0 && b < betas_[i - 1]) throw RangeError("betas must be non-decreasing");
    const double prev = ab;
    alphas_[i] = 1.0 - b;
    ab *= alphas_[i];
    alpha_bars_[i] = ab;
    sigma2_[i] = b * ((1.0 - prev) / (1.0 - ab));
  }
}

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw RangeError("make_schedule: T must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw RangeError("make_schedule: need 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(static_cast<std::size_t>(steps));
  for (int t = 1; t <= steps; ++t) {
    betas[static_cast<std::size_t>(t - 1)] =
        steps == 1 ? beta_start
                   : beta_start + (t - 1) * (beta_end - beta_start) / (steps - 1);
  }
  return NoiseSchedule(std::move(betas));
}

}  // namespace devc
