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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "devc/error.hpp"
#include "devc/rng.hpp"

namespace devc {

// Storage for buffers mapped as Eigen matrices.
template <class T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

struct DecoderConfig {
  int n_residual_blocks = 8;
  int residual_channels = 32;
  int dilation_cycle_length = 8;
  int step_embed_dim = 64;
  int conditioning_dim = 28;

  // Width of the two fully connected layers of the step encoder.
  int step_hidden_dim() const { return 4 * step_embed_dim; }
  int dilation(int block) const { return 1 << (block % dilation_cycle_length); }

  void validate() const {
    if (n_residual_blocks <= 0 || residual_channels <= 0 || dilation_cycle_length <= 0 ||
        step_embed_dim <= 0 || conditioning_dim <= 0) {
      throw RangeError("decoder config: all sizes must be positive");
    }
    if (step_embed_dim % 2 != 0) throw RangeError("decoder config: step_embed_dim must be even");
    if (dilation_cycle_length > 30) throw RangeError("decoder config: dilation cycle too long");
  }
  bool operator==(const DecoderConfig&) const = default;

  static DecoderConfig toy(int conditioning_dim) { return {8, 32, 8, 64, conditioning_dim}; }
  static DecoderConfig paper(int conditioning_dim) { return {64, 128, 10, 128, conditioning_dim}; }
};

// Interleaved sin/cos of t against the ladder 10^(4k / (dim/2 - 1)).
inline std::vector<double> step_embedding(int t, int dim) {
  if (dim <= 0 || dim % 2 != 0) throw RangeError("step_embedding: dim must be positive and even");
  const int half = dim / 2;
  std::vector<double> e(static_cast<std::size_t>(dim));
  for (int k = 0; k < half; ++k) {
    const double scale = half > 1 ? std::pow(10.0, 4.0 * k / (half - 1)) : 1.0;
    e[static_cast<std::size_t>(2 * k)] = std::sin(t * scale);
    e[static_cast<std::size_t>(2 * k + 1)] = std::cos(t * scale);
  }
  return e;
}

// The noise predictor eps_theta(x_t, t, c): PreNet, step encoder, a stack of
// gated dilated residual blocks with additive step and conditioning inputs,
// summed skips, and a two-layer pointwise PostNet.
//
// All parameters live in one flat buffer; the layout is fixed by the config.
// Conditioning is passed transposed, D_cond x S, one column per segment.
template <typename Scalar>
class Denoiser {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  using MatMap = Eigen::Map<Matrix>;
  using ConstMatMap = Eigen::Map<const Matrix>;

  struct BlockTrace {
    Matrix y, a, b, g;
  };

  // Intermediates kept by a training forward pass.
  struct Trace {
    Vector emb, u1, h1, u2, h2;
    RowVector input;
    Matrix cond, x0, skip, p1;
    std::vector<BlockTrace> blocks;
    Eigen::Index hop = 0;
  };

  explicit Denoiser(const DecoderConfig& config) : config_(config) {
    config_.validate();
    build_layout();
    theta_.assign(size_, Scalar(0));
  }

  const DecoderConfig& config() const { return config_; }
  std::size_t num_parameters() const { return size_; }
  std::span<Scalar> parameters() { return theta_; }
  std::span<const Scalar> parameters() const { return theta_; }

  // Kaiming-normal weights, zero biases, zero final projection.
  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    auto fill = [&](std::size_t off, std::size_t count, double fan_in) {
      const double sd = std::sqrt(2.0 / fan_in);
      for (std::size_t i = 0; i < count; ++i) theta_[off + i] = static_cast<Scalar>(sd * n01(rng));
    };
    std::fill(theta_.begin(), theta_.end(), Scalar(0));
    const auto c = static_cast<std::size_t>(config_.residual_channels);
    const auto e = static_cast<std::size_t>(config_.step_embed_dim);
    const auto h = static_cast<std::size_t>(config_.step_hidden_dim());
    const auto d = static_cast<std::size_t>(config_.conditioning_dim);
    fill(off_.pre_w, c, 1.0);
    fill(off_.fc1_w, h * e, static_cast<double>(e));
    fill(off_.fc2_w, h * h, static_cast<double>(h));
    for (const auto& b : off_.blocks) {
      fill(b.step_w, c * h, static_cast<double>(h));
      fill(b.dil_w, 2 * c * 3 * c, 3.0 * c);
      fill(b.cond_w, 2 * c * d, static_cast<double>(d));
      fill(b.out_w, 2 * c * c, static_cast<double>(c));
    }
    fill(off_.post1_w, c * c, static_cast<double>(c));
  }

  // Inference. `cond` is D_cond x S; xt.size() must be a positive multiple of S.
  void forward(std::span<const Scalar> xt, int t, const Matrix& cond, std::span<Scalar> out) const {
    Trace scratch;
    run(xt, t, cond, out, scratch, false);
  }

  // Training forward: keeps intermediates in `trace` for backward().
  void forward(std::span<const Scalar> xt, int t, const Matrix& cond, std::span<Scalar> out,
               Trace& trace) const {
    run(xt, t, cond, out, trace, true);
  }

  // Accumulates dLoss/dtheta into `grad` given dLoss/dout.
  void backward(const Trace& tr, std::span<const Scalar> dout, std::span<Scalar> grad) const {
    if (grad.size() != size_) throw ShapeError("denoiser backward: gradient buffer size mismatch");
    const Eigen::Index c = config_.residual_channels;
    const Eigen::Index len = tr.input.size();
    if (static_cast<Eigen::Index>(dout.size()) != len) {
      throw ShapeError("denoiser backward: output gradient length mismatch");
    }
    const Scalar inv_sqrt2 = static_cast<Scalar>(1.0 / std::sqrt(2.0));
    const Scalar skip_scale = static_cast<Scalar>(1.0 / std::sqrt(config_.n_residual_blocks));
    // Owned copy: kernel choice must not depend on the caller's buffer address.
    const RowVector g_out = Eigen::Map<const RowVector>(dout.data(), len);

    // PostNet.
    const Matrix r = tr.p1.cwiseMax(Scalar(0));
    gmat(grad, off_.post2_w, 1, c).noalias() += g_out * r.transpose();
    gvec(grad, off_.post2_b, 1)(0) += g_out.sum();
    Matrix dp1;
    dp1.noalias() = cmat(off_.post2_w, 1, c).transpose() * g_out;
    dp1.array() *= (tr.p1.array() > Scalar(0)).template cast<Scalar>();
    gmat(grad, off_.post1_w, c, c).noalias() += dp1 * tr.skip.transpose();
    gvec(grad, off_.post1_b, c) += dp1.rowwise().sum();
    Matrix dskip;
    dskip.noalias() = cmat(off_.post1_w, c, c).transpose() * dp1;
    dskip *= skip_scale;

    Matrix dx = Matrix::Zero(c, len);
    Vector dh2 = Vector::Zero(config_.step_hidden_dim());
    Matrix dout_block(2 * c, len), dg, dz(2 * c, len), dy;
    const Eigen::Index segs = tr.cond.cols();
    Matrix gseg(2 * c, segs);
    for (int i = config_.n_residual_blocks - 1; i >= 0; --i) {
      const auto& bo = off_.blocks[static_cast<std::size_t>(i)];
      const auto& bt = tr.blocks[static_cast<std::size_t>(i)];
      const Eigen::Index d = config_.dilation(i);

      dout_block.topRows(c) = dx * inv_sqrt2;
      dout_block.bottomRows(c) = dskip;
      gmat(grad, bo.out_w, 2 * c, c).noalias() += dout_block * bt.g.transpose();
      gvec(grad, bo.out_b, 2 * c) += dout_block.rowwise().sum();
      dg.noalias() = cmat(bo.out_w, 2 * c, c).transpose() * dout_block;

      dz.topRows(c).array() = dg.array() * bt.b.array() * (Scalar(1) - bt.a.array().square());
      dz.bottomRows(c).array() =
          dg.array() * bt.a.array() * bt.b.array() * (Scalar(1) - bt.b.array());
      gvec(grad, bo.dil_b, 2 * c) += dz.rowwise().sum();
      for (Eigen::Index s = 0; s < segs; ++s) {
        gseg.col(s) = dz.middleCols(s * tr.hop, tr.hop).rowwise().sum();
      }
      gmat(grad, bo.cond_w, 2 * c, config_.conditioning_dim).noalias() +=
          gseg * tr.cond.transpose();

      auto gdil = gmat(grad, bo.dil_w, 2 * c, 3 * c);
      const auto wdil = cmat(bo.dil_w, 2 * c, 3 * c);
      gdil.middleCols(c, c).noalias() += dz * bt.y.transpose();
      dy.noalias() = wdil.middleCols(c, c).transpose() * dz;
      if (d < len) {
        const Eigen::Index m = len - d;
        gdil.leftCols(c).noalias() += dz.rightCols(m) * bt.y.leftCols(m).transpose();
        gdil.rightCols(c).noalias() += dz.leftCols(m) * bt.y.rightCols(m).transpose();
        dy.leftCols(m).noalias() += wdil.leftCols(c).transpose() * dz.rightCols(m);
        dy.rightCols(m).noalias() += wdil.rightCols(c).transpose() * dz.leftCols(m);
      }

      const Vector ds = dy.rowwise().sum();
      gmat(grad, bo.step_w, c, config_.step_hidden_dim()).noalias() += ds * tr.h2.transpose();
      gvec(grad, bo.step_b, c) += ds;
      dh2.noalias() += cmat(bo.step_w, c, config_.step_hidden_dim()).transpose() * ds;

      dx = dx * inv_sqrt2 + dy;
    }

    // PreNet.
    dx.array() *= (tr.x0.array() > Scalar(0)).template cast<Scalar>();
    gmat(grad, off_.pre_w, c, 1).noalias() += dx * tr.input.transpose();
    gvec(grad, off_.pre_b, c) += dx.rowwise().sum();

    // Step encoder.
    const Eigen::Index h = config_.step_hidden_dim();
    const Eigen::Index e = config_.step_embed_dim;
    const Vector du2 = dh2.cwiseProduct(swish_grad(tr.u2));
    gmat(grad, off_.fc2_w, h, h).noalias() += du2 * tr.h1.transpose();
    gvec(grad, off_.fc2_b, h) += du2;
    const Vector dh1 = cmat(off_.fc2_w, h, h).transpose() * du2;
    const Vector du1 = dh1.cwiseProduct(swish_grad(tr.u1));
    gmat(grad, off_.fc1_w, h, e).noalias() += du1 * tr.emb.transpose();
    gvec(grad, off_.fc1_b, h) += du1;
  }

 private:
  struct BlockOffsets {
    std::size_t step_w, step_b, dil_w, dil_b, cond_w, out_w, out_b;
  };
  struct Offsets {
    std::size_t pre_w, pre_b, fc1_w, fc1_b, fc2_w, fc2_b;
    std::vector<BlockOffsets> blocks;
    std::size_t post1_w, post1_b, post2_w, post2_b;
  };

  void build_layout() {
    std::size_t at = 0;
    auto take = [&](std::size_t n) {
      const std::size_t o = at;
      at += n;
      return o;
    };
    const auto c = static_cast<std::size_t>(config_.residual_channels);
    const auto e = static_cast<std::size_t>(config_.step_embed_dim);
    const auto h = static_cast<std::size_t>(config_.step_hidden_dim());
    const auto d = static_cast<std::size_t>(config_.conditioning_dim);
    off_.pre_w = take(c);
    off_.pre_b = take(c);
    off_.fc1_w = take(h * e);
    off_.fc1_b = take(h);
    off_.fc2_w = take(h * h);
    off_.fc2_b = take(h);
    off_.blocks.resize(static_cast<std::size_t>(config_.n_residual_blocks));
    for (auto& b : off_.blocks) {
      b.step_w = take(c * h);
      b.step_b = take(c);
      b.dil_w = take(2 * c * 3 * c);  // three taps side by side: [t-d | t | t+d]
      b.dil_b = take(2 * c);
      b.cond_w = take(2 * c * d);
      b.out_w = take(2 * c * c);
      b.out_b = take(2 * c);
    }
    off_.post1_w = take(c * c);
    off_.post1_b = take(c);
    off_.post2_w = take(c);
    off_.post2_b = take(1);
    size_ = at;
  }

  ConstMatMap cmat(std::size_t off, Eigen::Index rows, Eigen::Index cols) const {
    return ConstMatMap(theta_.data() + off, rows, cols);
  }
  Eigen::Map<const Vector> cvec(std::size_t off, Eigen::Index n) const {
    return Eigen::Map<const Vector>(theta_.data() + off, n);
  }
  static MatMap gmat(std::span<Scalar> g, std::size_t off, Eigen::Index rows, Eigen::Index cols) {
    return MatMap(g.data() + off, rows, cols);
  }
  static Eigen::Map<Vector> gvec(std::span<Scalar> g, std::size_t off, Eigen::Index n) {
    return Eigen::Map<Vector>(g.data() + off, n);
  }

  static Vector swish(const Vector& u) {
    return (u.array() / (Scalar(1) + (-u.array()).exp())).matrix();
  }
  static Vector swish_grad(const Vector& u) {
    const auto s = (Scalar(1) / (Scalar(1) + (-u.array()).exp()));
    return (s + u.array() * s * (Scalar(1) - s)).matrix();
  }

  static constexpr Eigen::Index kTile = 1024;

  void run(std::span<const Scalar> xt, int t, const Matrix& cond, std::span<Scalar> out, Trace& tr,
           bool keep) const {
    const Eigen::Index c = config_.residual_channels;
    const auto len = static_cast<Eigen::Index>(xt.size());
    const Eigen::Index segs = cond.cols();
    if (cond.rows() != config_.conditioning_dim) {
      throw ShapeError("denoiser: conditioning width " + std::to_string(cond.rows()) +
                       " != configured " + std::to_string(config_.conditioning_dim));
    }
    if (segs == 0 || len == 0 || len % segs != 0) {
      throw ShapeError("denoiser: input length " + std::to_string(len) +
                       " is not a positive multiple of the segment count " + std::to_string(segs));
    }
    if (static_cast<Eigen::Index>(out.size()) != len) {
      throw ShapeError("denoiser: output length mismatch");
    }
    const Eigen::Index hop = len / segs;
    const Scalar inv_sqrt2 = static_cast<Scalar>(1.0 / std::sqrt(2.0));
    const Eigen::Index h = config_.step_hidden_dim();
    const Eigen::Index e = config_.step_embed_dim;

    const std::vector<double> emb_d = step_embedding(t, config_.step_embed_dim);
    tr.emb.resize(e);
    for (Eigen::Index k = 0; k < e; ++k) tr.emb(k) = static_cast<Scalar>(emb_d[static_cast<std::size_t>(k)]);
    tr.u1 = cmat(off_.fc1_w, h, e) * tr.emb + cvec(off_.fc1_b, h);
    tr.h1 = swish(tr.u1);
    tr.u2 = cmat(off_.fc2_w, h, h) * tr.h1 + cvec(off_.fc2_b, h);
    tr.h2 = swish(tr.u2);

    tr.input = Eigen::Map<const RowVector>(xt.data(), len);
    Matrix x = (cmat(off_.pre_w, c, 1) * tr.input).colwise() + cvec(off_.pre_b, c);
    x = x.cwiseMax(Scalar(0));
    if (keep) {
      tr.x0 = x;
      tr.cond = cond;
      tr.hop = hop;
      tr.blocks.resize(static_cast<std::size_t>(config_.n_residual_blocks));
    }

    Matrix skip = Matrix::Zero(c, len);
    Matrix y, z, g, o, gc, x_next;
    Matrix a_tmp, b_tmp;
    for (int i = 0; i < config_.n_residual_blocks; ++i) {
      const auto& bo = off_.blocks[static_cast<std::size_t>(i)];
      const Eigen::Index d = config_.dilation(i);
      const Vector s = cmat(bo.step_w, c, h) * tr.h2 + cvec(bo.step_b, c);
      y = x.colwise() + s;

      const auto wdil = cmat(bo.dil_w, 2 * c, 3 * c);
      gc.noalias() = cmat(bo.cond_w, 2 * c, config_.conditioning_dim) * cond;
      gc.colwise() += cvec(bo.dil_b, 2 * c);
      if (!keep) {
        // Inference works in time tiles so intermediates stay in cache.
        x_next.resize(c, len);
        for (Eigen::Index t0 = 0; t0 < len; t0 += kTile) {
          const Eigen::Index n = std::min(kTile, len - t0);
          z.resize(2 * c, n);
          z.noalias() = wdil.middleCols(c, c) * y.middleCols(t0, n);
          const Eigen::Index l0 = std::max(t0, d);
          if (l0 < t0 + n) {
            z.rightCols(t0 + n - l0).noalias() += wdil.leftCols(c) * y.middleCols(l0 - d, t0 + n - l0);
          }
          const Eigen::Index r1 = std::min(t0 + n, len - d);
          if (r1 > t0) z.leftCols(r1 - t0).noalias() += wdil.rightCols(c) * y.middleCols(t0 + d, r1 - t0);
          for (Eigen::Index j = t0; j < t0 + n;) {
            const Eigen::Index sg = j / hop;
            const Eigen::Index end = std::min(t0 + n, (sg + 1) * hop);
            z.middleCols(j - t0, end - j).colwise() += gc.col(sg);
            j = end;
          }
          a_tmp = z.topRows(c).array().tanh().matrix();
          b_tmp = (Scalar(1) / (Scalar(1) + (-z.bottomRows(c).array()).exp())).matrix();
          g = a_tmp.cwiseProduct(b_tmp);
          o.noalias() = cmat(bo.out_w, 2 * c, c) * g;
          o.colwise() += cvec(bo.out_b, 2 * c);
          skip.middleCols(t0, n) += o.bottomRows(c);
          x_next.middleCols(t0, n) = (x.middleCols(t0, n) + o.topRows(c)) * inv_sqrt2;
        }
        x.swap(x_next);
        continue;
      }

      z.resize(2 * c, len);
      z.noalias() = wdil.middleCols(c, c) * y;
      if (d < len) {
        const Eigen::Index m = len - d;
        z.rightCols(m).noalias() += wdil.leftCols(c) * y.leftCols(m);
        z.leftCols(m).noalias() += wdil.rightCols(c) * y.rightCols(m);
      }
      for (Eigen::Index sg = 0; sg < segs; ++sg) {
        z.middleCols(sg * hop, hop).colwise() += gc.col(sg);
      }

      Matrix& a = keep ? tr.blocks[static_cast<std::size_t>(i)].a : a_tmp;
      Matrix& b = keep ? tr.blocks[static_cast<std::size_t>(i)].b : b_tmp;
      a = z.topRows(c).array().tanh().matrix();
      b = (Scalar(1) / (Scalar(1) + (-z.bottomRows(c).array()).exp())).matrix();
      g = a.cwiseProduct(b);

      o.noalias() = cmat(bo.out_w, 2 * c, c) * g;
      o.colwise() += cvec(bo.out_b, 2 * c);
      skip += o.bottomRows(c);
      if (keep) {
        auto& bt = tr.blocks[static_cast<std::size_t>(i)];
        bt.y = std::move(y);
        bt.g = g;
        y = Matrix();
      }
      x = (x + o.topRows(c)) * inv_sqrt2;
    }
    skip *= static_cast<Scalar>(1.0 / std::sqrt(config_.n_residual_blocks));

    Matrix p1 = cmat(off_.post1_w, c, c) * skip;
    p1.colwise() += cvec(off_.post1_b, c);
    RowVector res = cmat(off_.post2_w, 1, c) * p1.cwiseMax(Scalar(0));
    res.array() += theta_[off_.post2_b];
    Eigen::Map<RowVector>(out.data(), len) = res;
    if (keep) {
      tr.skip = std::move(skip);
      tr.p1 = std::move(p1);
    }
  }

  DecoderConfig config_;
  Offsets off_{};
  std::size_t size_ = 0;
  AlignedVector<Scalar> theta_;
};

}  // namespace devc
