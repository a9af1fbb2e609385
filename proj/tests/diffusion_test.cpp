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

#include <gtest/gtest.h>

#include <vector>

#include "devc/denoiser.hpp"

namespace devc {
namespace {

TEST(Denoiser, GradientMatchesFiniteDifferences) {
  DecoderConfig cfg{2, 3, 2, 4, 3};
  Denoiser<double> net(cfg);
  net.initialize(7);
  Rng rng(3);
  std::normal_distribution<double> n01;
  for (double& p : net.parameters()) p += 0.3 * n01(rng);

  const int segs = 3, hop = 4, len = segs * hop;
  std::vector<double> x(len), target(len), out(len);
  for (auto& v : x) v = n01(rng);
  for (auto& v : target) v = n01(rng);
  Denoiser<double>::Matrix cond(cfg.conditioning_dim, segs);
  for (Eigen::Index i = 0; i < cond.size(); ++i) cond.data()[i] = n01(rng);

  auto loss = [&]() {
    net.forward(x, 5, cond, out);
    double l = 0;
    for (int i = 0; i < len; ++i) l += (out[i] - target[i]) * (out[i] - target[i]);
    return l;
  };

  Denoiser<double>::Trace tr;
  net.forward(x, 5, cond, out, tr);
  std::vector<double> dout(len), grad(net.num_parameters(), 0.0);
  for (int i = 0; i < len; ++i) dout[i] = 2.0 * (out[i] - target[i]);
  net.backward(tr, dout, grad);

  auto params = net.parameters();
  double worst = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    const double h = 1e-6;
    params[i] = keep + h;
    const double lp = loss();
    params[i] = keep - h;
    const double lm = loss();
    params[i] = keep;
    const double fd = (lp - lm) / (2 * h);
    const double err = std::abs(fd - grad[i]) / std::max(1.0, std::abs(fd));
    worst = std::max(worst, err);
    EXPECT_LT(err, 1e-5) << "parameter " << i << " fd " << fd << " analytic " << grad[i];
  }
  std::cout << "worst relative error " << worst << "\n";
}

}  // namespace
}  // namespace devc
