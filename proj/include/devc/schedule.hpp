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

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "devc/error.hpp"

namespace devc {

// Fixed-variance diffusion schedule. Steps are 1-based: t in [1, T].
class NoiseSchedule {
 public:
  NoiseSchedule() = default;
  explicit NoiseSchedule(std::vector<double> betas);

  int steps() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const { return betas_[index(t)]; }
  double alpha(int t) const { return alphas_[index(t)]; }
  // alpha_bar(0) == 1 by convention.
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars_[index(t)]; }
  // Posterior variance beta_t (1 - abar_{t-1}) / (1 - abar_t); zero at t = 1.
  double sigma2(int t) const { return sigma2_[index(t)]; }
  double sigma(int t) const { return std::sqrt(sigma2(t)); }

  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }

  double beta_start() const { return betas_.front(); }
  double beta_end() const { return betas_.back(); }

  void check_step(int t) const {
    if (t < 1 || t > steps()) {
      throw RangeError("diffusion step " + std::to_string(t) + " outside [1, " +
                       std::to_string(steps()) + "]");
    }
  }

 private:
  std::size_t index(int t) const {
    check_step(t);
    return static_cast<std::size_t>(t - 1);
  }

  std::vector<double> betas_, alphas_, alpha_bars_, sigma2_;
};

// Linear betas from beta_start to beta_end. Throws RangeError unless
// T >= 1 and 0 < beta_start <= beta_end < 1.
NoiseSchedule make_schedule(int steps, double beta_start, double beta_end);

// Defaults: T = 50, beta in [1e-4, 0.05].
inline constexpr int kDefaultSteps = 50;
inline constexpr double kDefaultBetaStart = 1e-4;
inline constexpr double kDefaultBetaEnd = 0.05;

inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": size mismatch (" + std::to_string(a) + " vs " +
                     std::to_string(b) + ")");
  }
}

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
template <typename T>
void forward_sample(std::span<const T> x0, int t, std::span<const T> eps,
                    const NoiseSchedule& schedule, std::span<T> xt) {
  require_same_size(x0.size(), eps.size(), "forward_sample");
  require_same_size(x0.size(), xt.size(), "forward_sample");
  schedule.check_step(t);
  const double ab = schedule.alpha_bar(t);
  const T a = static_cast<T>(std::sqrt(ab));
  const T b = static_cast<T>(std::sqrt(1.0 - ab));
  for (std::size_t i = 0; i < x0.size(); ++i) xt[i] = a * x0[i] + b * eps[i];
}

template <typename T>
std::vector<T> forward_sample(std::span<const T> x0, int t, std::span<const T> eps,
                              const NoiseSchedule& schedule) {
  std::vector<T> xt(x0.size());
  forward_sample<T>(x0, t, eps, schedule, xt);
  return xt;
}

// One corruption step: x_t = sqrt(alpha_t) x_{t-1} + sqrt(beta_t) eps.
template <typename T>
void forward_step(std::span<const T> x_prev, int t, std::span<const T> eps,
                  const NoiseSchedule& schedule, std::span<T> xt) {
  require_same_size(x_prev.size(), eps.size(), "forward_step");
  require_same_size(x_prev.size(), xt.size(), "forward_step");
  schedule.check_step(t);
  const T a = static_cast<T>(std::sqrt(schedule.alpha(t)));
  const T b = static_cast<T>(std::sqrt(schedule.beta(t)));
  for (std::size_t i = 0; i < x_prev.size(); ++i) xt[i] = a * x_prev[i] + b * eps[i];
}

// mu = (x_t - beta_t / sqrt(1 - abar_t) * eps_pred) / sqrt(alpha_t).
template <typename T>
void posterior_mean(std::span<const T> xt, int t, std::span<const T> eps_pred,
                    const NoiseSchedule& schedule, std::span<T> mu) {
  require_same_size(xt.size(), eps_pred.size(), "posterior_mean");
  require_same_size(xt.size(), mu.size(), "posterior_mean");
  schedule.check_step(t);
  const double beta = schedule.beta(t);
  const double c_eps = beta / std::sqrt(1.0 - schedule.alpha_bar(t));
  const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha(t));
  for (std::size_t i = 0; i < xt.size(); ++i) {
    mu[i] = static_cast<T>((xt[i] - c_eps * eps_pred[i]) * inv_sqrt_alpha);
  }
}

template <typename T>
std::vector<T> posterior_mean(std::span<const T> xt, int t, std::span<const T> eps_pred,
                              const NoiseSchedule& schedule) {
  std::vector<T> mu(xt.size());
  posterior_mean<T>(xt, t, eps_pred, schedule, mu);
  return mu;
}

// Bayes-optimal noise predictor when x0 ~ N(0, I): sqrt(1 - abar_t) x_t.
template <typename T>
void analytic_gaussian_denoiser(std::span<const T> xt, int t, const NoiseSchedule& schedule,
                                std::span<T> eps_hat) {
  require_same_size(xt.size(), eps_hat.size(), "analytic_gaussian_denoiser");
  schedule.check_step(t);
  const T c = static_cast<T>(std::sqrt(1.0 - schedule.alpha_bar(t)));
  for (std::size_t i = 0; i < xt.size(); ++i) eps_hat[i] = c * xt[i];
}

// Squared L2 norm of (eps - eps_pred) summed over elements, averaged over
// `batch` equally sized entries laid out contiguously.
template <typename T>
double diffusion_loss(std::span<const T> eps, std::span<const T> eps_pred, std::size_t batch = 1) {
  require_same_size(eps.size(), eps_pred.size(), "diffusion_loss");
  if (batch == 0 || eps.size() % batch != 0) throw ShapeError("diffusion_loss: bad batch size");
  double acc = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double d = static_cast<double>(eps[i]) - static_cast<double>(eps_pred[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(batch);
}

}  // namespace devc
