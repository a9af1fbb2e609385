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

#include "devc/spectrum.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "devc/error.hpp"

namespace devc {

std::vector<double> hann_power_spectrum(std::span<const double> frame, int n_fft) {
  if (n_fft <= 0 || (n_fft & (n_fft - 1)) != 0 || frame.size() > static_cast<std::size_t>(n_fft)) {
    throw RangeError("hann_power_spectrum: n_fft must be a power of two >= frame size");
  }
  const std::size_t n = frame.size();
  std::vector<double> buf(static_cast<std::size_t>(n_fft), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                          static_cast<double>(n));
    buf[i] = frame[i] * w;
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, buf);
  std::vector<double> power(static_cast<std::size_t>(n_fft / 2 + 1));
  for (std::size_t k = 0; k < power.size(); ++k) power[k] = std::norm(spec[k]);
  return power;
}

std::vector<double> lifter_log_spectrum(std::span<const double> log_spectrum, int lifter) {
  const std::size_t half = log_spectrum.size();
  if (half < 2) throw RangeError("lifter_log_spectrum: spectrum too short");
  const std::size_t n = 2 * (half - 1);
  std::vector<std::complex<double>> full(n);
  for (std::size_t k = 0; k < half; ++k) full[k] = log_spectrum[k];
  for (std::size_t k = half; k < n; ++k) full[k] = log_spectrum[n - k];
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> cep;
  fft.inv(cep, full);
  for (std::size_t q = 0; q < n; ++q) {
    const std::size_t dist = std::min(q, n - q);
    if (dist >= static_cast<std::size_t>(lifter)) cep[q] = 0.0;
  }
  std::vector<std::complex<double>> smooth;
  fft.fwd(smooth, cep);
  std::vector<double> out(half);
  for (std::size_t k = 0; k < half; ++k) out[k] = smooth[k].real();
  return out;
}

}  // namespace devc
