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

#include <cstdint>
#include <span>
#include <vector>

#include "devc/rng.hpp"
#include "devc/schedule.hpp"

namespace devc {

// Ancestral sampling from a given x_T. `predict(x_t, t, eps_out)` returns the
// noise estimate. z = 0 on the last step.
template <typename T, typename Predictor>
std::vector<T> reverse_sample_from(std::vector<T> x, const NoiseSchedule& schedule,
                                   Predictor&& predict, NormalSource<T>& noise) {
  std::vector<T> eps(x.size()), mu(x.size());
  for (int t = schedule.steps(); t >= 1; --t) {
    predict(std::span<const T>(x), t, std::span<T>(eps));
    posterior_mean<T>(x, t, eps, schedule, mu);
    if (t > 1) {
      const T sigma = static_cast<T>(schedule.sigma(t));
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = mu[i] + sigma * noise();
    } else {
      x = mu;
    }
  }
  return x;
}

// x_T ~ N(0, I) drawn from `seed`, then ancestral sampling.
template <typename T, typename Predictor>
std::vector<T> reverse_sample(std::size_t length, const NoiseSchedule& schedule,
                              Predictor&& predict, std::uint64_t seed) {
  NormalSource<T> noise(seed);
  std::vector<T> x(length);
  for (auto& v : x) v = noise();
  return reverse_sample_from<T>(std::move(x), schedule, std::forward<Predictor>(predict), noise);
}

}  // namespace devc
