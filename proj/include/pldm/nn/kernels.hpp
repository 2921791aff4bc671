// Copyright 2026 The PLDM Authors
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
#include <vector>

#include "pldm/core/blas.hpp"

namespace pldm::nn {

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// im2col for one image: src[C,H,W] -> col[C*kh*kw, oh*ow].
inline void im2col(const float* src, int c, int h, int w, int kh, int kw,
                   int stride, int pad, float* col) {
  const int oh = conv_out_dim(h, kh, stride, pad);
  const int ow = conv_out_dim(w, kw, stride, pad);
  float* out = col;
  for (int ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) {
            for (int ox = 0; ox < ow; ++ox) *out++ = 0.0f;
            continue;
          }
          const float* row = src + (static_cast<long>(ch) * h + iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            *out++ = (ix >= 0 && ix < w) ? row[ix] : 0.0f;
          }
        }
      }
    }
  }
}

// Scatter-add transpose of im2col: col[C*kh*kw, oh*ow] accumulated into
// dst[C,H,W].
inline void col2im_add(const float* col, int c, int h, int w, int kh, int kw,
                       int stride, int pad, float* dst) {
  const int oh = conv_out_dim(h, kh, stride, pad);
  const int ow = conv_out_dim(w, kw, stride, pad);
  const float* in = col;
  for (int ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) {
            in += ow;
            continue;
          }
          float* row = dst + (static_cast<long>(ch) * h + iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) row[ix] += *in;
            ++in;
          }
        }
      }
    }
  }
}

// y[N,O,oh,ow] = conv(x[N,C,H,W], w[O,C,kh,kw]) + b, using im2col + sgemm.
// `scratch` is resized as needed and reusable across calls.
inline void conv2d_forward(const float* x, int n, int c, int h, int w,
                           const float* weight, const float* bias, int oc,
                           int kh, int kw, int stride, int pad, float* y,
                           std::vector<float>& scratch) {
  const int oh = conv_out_dim(h, kh, stride, pad);
  const int ow = conv_out_dim(w, kw, stride, pad);
  const int ck = c * kh * kw;
  const long ohw = static_cast<long>(oh) * ow;
  scratch.resize(static_cast<size_t>(ck) * ohw);
  for (int i = 0; i < n; ++i) {
    const float* xi = x + static_cast<long>(i) * c * h * w;
    float* yi = y + static_cast<long>(i) * oc * ohw;
    im2col(xi, c, h, w, kh, kw, stride, pad, scratch.data());
    sgemm_nn(oc, static_cast<int>(ohw), ck, 1.0f, weight, scratch.data(), 0.0f,
             yi);
    if (bias) {
      for (int o = 0; o < oc; ++o) {
        float* row = yi + o * ohw;
        for (long p = 0; p < ohw; ++p) row[p] += bias[o];
      }
    }
  }
}

// y[N,O] = x[N,I] @ w[O,I]^T + b
inline void linear_forward(const float* x, int n, int in_dim,
                           const float* weight, const float* bias, int out_dim,
                           float* y) {
  sgemm_nt(n, out_dim, in_dim, 1.0f, x, weight, 0.0f, y);
  if (bias) {
    for (int i = 0; i < n; ++i)
      for (int o = 0; o < out_dim; ++o) y[static_cast<long>(i) * out_dim + o] += bias[o];
  }
}

// Per-sample, per-group normalization over (C/groups * H * W) elements,
// biased variance, then per-channel affine.
inline void group_norm_forward(const float* x, int n, int c, int hw,
                               int groups, float eps, const float* gamma,
                               const float* beta, float* y, float* save_mean,
                               float* save_inv_std) {
  const int cg = c / groups;
  const long m = static_cast<long>(cg) * hw;
  for (int i = 0; i < n; ++i) {
    for (int g = 0; g < groups; ++g) {
      const float* src = x + (static_cast<long>(i) * c + g * cg) * hw;
      double mu = 0.0;
      for (long p = 0; p < m; ++p) mu += src[p];
      mu /= static_cast<double>(m);
      double var = 0.0;
      for (long p = 0; p < m; ++p) {
        double d = src[p] - mu;
        var += d * d;
      }
      var /= static_cast<double>(m);
      const float inv = 1.0f / std::sqrt(static_cast<float>(var) + eps);
      if (save_mean) save_mean[i * groups + g] = static_cast<float>(mu);
      if (save_inv_std) save_inv_std[i * groups + g] = inv;
      float* dst = y + (static_cast<long>(i) * c + g * cg) * hw;
      for (int ch = 0; ch < cg; ++ch) {
        const float sc = gamma ? gamma[g * cg + ch] : 1.0f;
        const float sh = beta ? beta[g * cg + ch] : 0.0f;
        const float* s = src + static_cast<long>(ch) * hw;
        float* d = dst + static_cast<long>(ch) * hw;
        for (int p = 0; p < hw; ++p)
          d[p] = (s[p] - static_cast<float>(mu)) * inv * sc + sh;
      }
    }
  }
}

// Row-wise layer norm over D, biased variance.
inline void layer_norm_forward(const float* x, int n, int d, float eps,
                               const float* gamma, const float* beta, float* y,
                               float* save_mean, float* save_inv_std) {
  for (int i = 0; i < n; ++i) {
    const float* src = x + static_cast<long>(i) * d;
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += src[j];
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      double dd = src[j] - mu;
      var += dd * dd;
    }
    var /= d;
    const float inv = 1.0f / std::sqrt(static_cast<float>(var) + eps);
    if (save_mean) save_mean[i] = static_cast<float>(mu);
    if (save_inv_std) save_inv_std[i] = inv;
    float* dst = y + static_cast<long>(i) * d;
    for (int j = 0; j < d; ++j) {
      const float sc = gamma ? gamma[j] : 1.0f;
      const float sh = beta ? beta[j] : 0.0f;
      dst[j] = (src[j] - static_cast<float>(mu)) * inv * sc + sh;
    }
  }
}

inline float sigmoidf(float v) { return 1.0f / (1.0f + std::exp(-v)); }

// One GRU cell step in PyTorch gate layout (r, z, n):
//   r = sig(Wir x + bir + Whr h + bhr)
//   z = sig(Wiz x + biz + Whz h + bhz)
//   n = tanh(Win x + bin + r * (Whn h + bhn))
//   h' = (1 - z) * n + z * h
// gi/gh are scratch of size [N, 3H].
inline void gru_cell_forward(const float* x, const float* h, int n, int in_dim,
                             int hidden, const float* w_ih, const float* w_hh,
                             const float* b_ih, const float* b_hh,
                             float* h_out, float* gi, float* gh) {
  const int h3 = 3 * hidden;
  linear_forward(x, n, in_dim, w_ih, b_ih, h3, gi);
  linear_forward(h, n, hidden, w_hh, b_hh, h3, gh);
  for (int i = 0; i < n; ++i) {
    const float* gir = gi + static_cast<long>(i) * h3;
    const float* ghr = gh + static_cast<long>(i) * h3;
    const float* hi = h + static_cast<long>(i) * hidden;
    float* ho = h_out + static_cast<long>(i) * hidden;
    for (int j = 0; j < hidden; ++j) {
      const float r = sigmoidf(gir[j] + ghr[j]);
      const float z = sigmoidf(gir[hidden + j] + ghr[hidden + j]);
      const float cand = std::tanh(gir[2 * hidden + j] + r * ghr[2 * hidden + j]);
      ho[j] = (1.0f - z) * cand + z * hi[j];
    }
  }
}

}  // namespace pldm::nn
