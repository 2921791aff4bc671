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

// Reverse-mode autodiff on a dynamic tape. Every op records a closure that
// scatters the output gradient back onto its inputs; backward() walks the
// tape once in reverse creation order. Values and gradients of interior
// nodes are released as soon as the walk passes them, so peak memory is
// roughly the forward activation footprint.
//
// Scalar reductions accumulate in double before narrowing to float so that
// finite-difference checks are not drowned by summation noise.

#pragma once

#include <cmath>
#include <cstring>
#include <deque>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "pldm/core/tensor.hpp"
#include "pldm/nn/kernels.hpp"

namespace pldm::nn {

// Named parameter container shared between graphs, the optimizer and
// checkpoint io. Adam moments live here too so a checkpoint can resume
// training exactly.
struct ParamStore {
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor m;  // Adam first moment
    Tensor v;  // Adam second moment
  };

  std::vector<Entry> entries;
  std::unordered_map<std::string, int> index;

  int add(const std::string& name, Tensor init) {
    if (index.count(name))
      throw std::runtime_error("duplicate parameter: " + name);
    Entry e;
    e.name = name;
    e.grad.shape = e.m.shape = e.v.shape = init.shape;
    size_t n = init.data.size();
    e.grad.data.assign(n, 0.0f);
    e.m.data.assign(n, 0.0f);
    e.v.data.assign(n, 0.0f);
    e.value = std::move(init);
    entries.push_back(std::move(e));
    index[name] = static_cast<int>(entries.size()) - 1;
    return static_cast<int>(entries.size()) - 1;
  }

  bool has(const std::string& name) const { return index.count(name) != 0; }

  Entry& at(const std::string& name) {
    auto it = index.find(name);
    if (it == index.end())
      throw std::runtime_error("unknown parameter: " + name);
    return entries[it->second];
  }

  const Entry& at(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end())
      throw std::runtime_error("unknown parameter: " + name);
    return entries[it->second];
  }

  long num_params() const {
    long n = 0;
    for (const auto& e : entries) n += static_cast<long>(e.value.data.size());
    return n;
  }

  long num_params_with_prefix(const std::string& prefix) const {
    long n = 0;
    for (const auto& e : entries)
      if (e.name.rfind(prefix, 0) == 0)
        n += static_cast<long>(e.value.data.size());
    return n;
  }

  void zero_grad() {
    for (auto& e : entries) std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0f);
  }
};

class Graph {
 public:
  struct Node {
    Tensor value;
    Tensor grad;                     // same shape as value; lazily filled
    bool needs_grad = false;
    int param_index = -1;            // >=0 for parameter leaves
    std::function<void(Graph&)> backward;  // null for leaves
  };

  explicit Graph(ParamStore* params = nullptr) : params_(params) {}

  const Tensor& value(int id) const { return nodes_[id].value; }
  Tensor& value(int id) { return nodes_[id].value; }
  const Tensor& grad(int id) const { return nodes_[id].grad; }
  float scalar(int id) const { return nodes_[id].value.data.at(0); }
  size_t size() const { return nodes_.size(); }

  // --- leaves ---------------------------------------------------------

  int input(Tensor v) {
    Node n;
    n.value = std::move(v);
    nodes_.push_back(std::move(n));
    return last();
  }

  int param(const std::string& name) {
    if (!params_) throw std::runtime_error("graph has no parameter store");
    auto& e = params_->at(name);
    Node n;
    n.value = e.value;  // copy; store stays authoritative
    n.needs_grad = true;
    n.param_index = params_->index.at(name);
    nodes_.push_back(std::move(n));
    return last();
  }

  // --- elementwise ----------------------------------------------------

  int add(int a, int b) {
    require_shape(val(a), val(b).shape, "add");
    int id = alloc_like(a, {a, b});
    auto& y = val(id);
    const auto& xa = val(a);
    const auto& xb = val(b);
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] = xa.data[i] + xb.data[i];
    set_backward(id, [a, b, id](Graph& g) {
      g.accumulate(a, g.nodes_[id].grad, 1.0f);
      g.accumulate(b, g.nodes_[id].grad, 1.0f);
    });
    return id;
  }

  int sub(int a, int b) {
    require_shape(val(a), val(b).shape, "sub");
    int id = alloc_like(a, {a, b});
    auto& y = val(id);
    const auto& xa = val(a);
    const auto& xb = val(b);
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] = xa.data[i] - xb.data[i];
    set_backward(id, [a, b, id](Graph& g) {
      g.accumulate(a, g.nodes_[id].grad, 1.0f);
      g.accumulate(b, g.nodes_[id].grad, -1.0f);
    });
    return id;
  }

  int mul(int a, int b) {
    require_shape(val(a), val(b).shape, "mul");
    int id = alloc_like(a, {a, b});
    auto& y = val(id);
    const auto& xa = val(a);
    const auto& xb = val(b);
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] = xa.data[i] * xb.data[i];
    set_backward(id, [a, b, id](Graph& g) {
      const auto& go = g.nodes_[id].grad.data;
      if (g.nodes_[a].needs_grad) {
        auto& ga = g.ensure_grad(a);
        const auto& xb2 = g.val(b).data;
        for (size_t i = 0; i < go.size(); ++i) ga.data[i] += go[i] * xb2[i];
      }
      if (g.nodes_[b].needs_grad) {
        auto& gb = g.ensure_grad(b);
        const auto& xa2 = g.val(a).data;
        for (size_t i = 0; i < go.size(); ++i) gb.data[i] += go[i] * xa2[i];
      }
    });
    return id;
  }

  // y = scale * x + shift, elementwise with scalar coefficients.
  int affine(int a, float scale, float shift) {
    int id = alloc_like(a, {a});
    auto& y = val(id);
    const auto& x = val(a);
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] = scale * x.data[i] + shift;
    set_backward(id, [a, id, scale](Graph& g) {
      g.accumulate(a, g.nodes_[id].grad, scale);
    });
    return id;
  }

  int scale(int a, float s) { return affine(a, s, 0.0f); }

  int relu(int a) {
    int id = alloc_like(a, {a});
    auto& y = val(id);
    const auto& x = val(a);
    for (size_t i = 0; i < y.data.size(); ++i)
      y.data[i] = x.data[i] > 0.0f ? x.data[i] : 0.0f;
    set_backward(id, [a, id](Graph& g) {
      if (!g.nodes_[a].needs_grad) return;
      auto& ga = g.ensure_grad(a);
      const auto& go = g.nodes_[id].grad.data;
      const auto& x2 = g.val(a).data;
      for (size_t i = 0; i < go.size(); ++i)
        if (x2[i] > 0.0f) ga.data[i] += go[i];
    });
    return id;
  }

  int sigmoid(int a) {
    int id = alloc_like(a, {a});
    auto& y = val(id);
    const auto& x = val(a);
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] = sigmoidf(x.data[i]);
    set_backward(id, [a, id](Graph& g) {
      if (!g.nodes_[a].needs_grad) return;
      auto& ga = g.ensure_grad(a);
      const auto& go = g.nodes_[id].grad.data;
      const auto& y2 = g.val(id).data;
      for (size_t i = 0; i < go.size(); ++i)
        ga.data[i] += go[i] * y2[i] * (1.0f - y2[i]);
    });
    return id;
  }

  int tanh_op(int a) {
    int id = alloc_like(a, {a});
    auto& y = val(id);
    const auto& x = val(a);
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] = std::tanh(x.data[i]);
    set_backward(id, [a, id](Graph& g) {
      if (!g.nodes_[a].needs_grad) return;
      auto& ga = g.ensure_grad(a);
      const auto& go = g.nodes_[id].grad.data;
      const auto& y2 = g.val(id).data;
      for (size_t i = 0; i < go.size(); ++i)
        ga.data[i] += go[i] * (1.0f - y2[i] * y2[i]);
    });
    return id;
  }

  // mish(x) = x * tanh(softplus(x))
  int mish(int a) {
    int id = alloc_like(a, {a});
    auto& y = val(id);
    const auto& x = val(a);
    for (size_t i = 0; i < y.data.size(); ++i) {
      const float sp = softplusf(x.data[i]);
      y.data[i] = x.data[i] * std::tanh(sp);
    }
    set_backward(id, [a, id](Graph& g) {
      if (!g.nodes_[a].needs_grad) return;
      auto& ga = g.ensure_grad(a);
      const auto& go = g.nodes_[id].grad.data;
      const auto& x2 = g.val(a).data;
      for (size_t i = 0; i < go.size(); ++i) {
        const float xv = x2[i];
        const float sp = softplusf(xv);
        const float t = std::tanh(sp);
        const float ds = sigmoidf(xv);  // d softplus / dx
        ga.data[i] += go[i] * (t + xv * (1.0f - t * t) * ds);
      }
    });
    return id;
  }

  // --- shape ops ------------------------------------------------------

  int reshape(int a, std::vector<int> shape) {
    if (numel_of(shape) != static_cast<long>(val(a).data.size()))
      throw ShapeError("reshape: element count mismatch");
    int id = alloc(shape, {a});
    val(id).data = val(a).data;
    set_backward(id, [a, id](Graph& g) {
      g.accumulate_flat(a, g.nodes_[id].grad, 1.0f);
    });
    return id;
  }

  // Concatenate [N,Da] and [N,Db] along columns.
  int concat_cols(int a, int b) {
    const auto& xa = val(a);
    const auto& xb = val(b);
    if (xa.shape.size() != 2 || xb.shape.size() != 2 || xa.shape[0] != xb.shape[0])
      throw ShapeError("concat_cols: want matching 2-d inputs");
    const int n = xa.shape[0], da = xa.shape[1], db = xb.shape[1];
    int id = alloc({n, da + db}, {a, b});
    auto& y = val(id);
    for (int i = 0; i < n; ++i) {
      std::memcpy(&y.data[static_cast<size_t>(i) * (da + db)],
                  &xa.data[static_cast<size_t>(i) * da], sizeof(float) * da);
      std::memcpy(&y.data[static_cast<size_t>(i) * (da + db) + da],
                  &xb.data[static_cast<size_t>(i) * db], sizeof(float) * db);
    }
    set_backward(id, [a, b, id, n, da, db](Graph& g) {
      const auto& go = g.nodes_[id].grad.data;
      if (g.nodes_[a].needs_grad) {
        auto& ga = g.ensure_grad(a);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < da; ++j)
            ga.data[static_cast<size_t>(i) * da + j] +=
                go[static_cast<size_t>(i) * (da + db) + j];
      }
      if (g.nodes_[b].needs_grad) {
        auto& gb = g.ensure_grad(b);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < db; ++j)
            gb.data[static_cast<size_t>(i) * db + j] +=
                go[static_cast<size_t>(i) * (da + db) + da + j];
      }
    });
    return id;
  }

  // Concatenate [N,Ca,H,W] and [N,Cb,H,W] along channels.
  int concat_channels(int a, int b) {
    const auto& xa = val(a);
    const auto& xb = val(b);
    if (xa.shape.size() != 4 || xb.shape.size() != 4 || xa.shape[0] != xb.shape[0] ||
        xa.shape[2] != xb.shape[2] || xa.shape[3] != xb.shape[3])
      throw ShapeError("concat_channels: want matching 4-d inputs");
    const int n = xa.shape[0], ca = xa.shape[1], cb = xb.shape[1];
    const long hw = static_cast<long>(xa.shape[2]) * xa.shape[3];
    int id = alloc({n, ca + cb, xa.shape[2], xa.shape[3]}, {a, b});
    auto& y = val(id);
    for (int i = 0; i < n; ++i) {
      std::memcpy(&y.data[static_cast<size_t>(i) * (ca + cb) * hw],
                  &xa.data[static_cast<size_t>(i) * ca * hw], sizeof(float) * ca * hw);
      std::memcpy(&y.data[(static_cast<size_t>(i) * (ca + cb) + ca) * hw],
                  &xb.data[static_cast<size_t>(i) * cb * hw], sizeof(float) * cb * hw);
    }
    set_backward(id, [a, b, id, n, ca, cb, hw](Graph& g) {
      const auto& go = g.nodes_[id].grad.data;
      if (g.nodes_[a].needs_grad) {
        auto& ga = g.ensure_grad(a);
        for (int i = 0; i < n; ++i)
          for (long p = 0; p < ca * hw; ++p)
            ga.data[static_cast<size_t>(i) * ca * hw + p] +=
                go[static_cast<size_t>(i) * (ca + cb) * hw + p];
      }
      if (g.nodes_[b].needs_grad) {
        auto& gb = g.ensure_grad(b);
        for (int i = 0; i < n; ++i)
          for (long p = 0; p < cb * hw; ++p)
            gb.data[static_cast<size_t>(i) * cb * hw + p] +=
                go[(static_cast<size_t>(i) * (ca + cb) + ca) * hw + p];
      }
    });
    return id;
  }

  int slice_cols(int a, int start, int len) {
    const auto& x = val(a);
    if (x.shape.size() != 2 || start < 0 || start + len > x.shape[1])
      throw ShapeError("slice_cols: bad range");
    const int n = x.shape[0], d = x.shape[1];
    int id = alloc({n, len}, {a});
    auto& y = val(id);
    for (int i = 0; i < n; ++i)
      std::memcpy(&y.data[static_cast<size_t>(i) * len],
                  &x.data[static_cast<size_t>(i) * d + start], sizeof(float) * len);
    set_backward(id, [a, id, n, d, start, len](Graph& g) {
      if (!g.nodes_[a].needs_grad) return;
      auto& ga = g.ensure_grad(a);
      const auto& go = g.nodes_[id].grad.data;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < len; ++j)
          ga.data[static_cast<size_t>(i) * d + start + j] +=
              go[static_cast<size_t>(i) * len + j];
    });
    return id;
  }

  // Expand [N,C] into constant planes [N,C,S,S]; gradient sums each plane.
  int expand_planes(int a, int s) {
    const auto& x = val(a);
    if (x.shape.size() != 2) throw ShapeError("expand_planes: want 2-d input");
    const int n = x.shape[0], c = x.shape[1];
    const long ss = static_cast<long>(s) * s;
    int id = alloc({n, c, s, s}, {a});
    auto& y = val(id);
    for (long i = 0; i < static_cast<long>(n) * c; ++i)
      for (long p = 0; p < ss; ++p) y.data[i * ss + p] = x.data[i];
    set_backward(id, [a, id, n, c, ss](Graph& g) {
      if (!g.nodes_[a].needs_grad) return;
      auto& ga = g.ensure_grad(a);
      const auto& go = g.nodes_[id].grad.data;
      for (long i = 0; i < static_cast<long>(n) * c; ++i) {
        double acc = 0.0;
        for (long p = 0; p < ss; ++p) acc += go[i * ss + p];
        ga.data[i] += static_cast<float>(acc);
      }
    });
    return id;
  }

  // --- dense / conv / norm ---------------------------------------------

  int linear(int x, int w, int b /* -1 for none */) {
    const auto& xv = val(x);
    const auto& wv = val(w);
    if (xv.shape.size() != 2 || wv.shape.size() != 2 || xv.shape[1] != wv.shape[1])
      throw ShapeError("linear: shape mismatch");
    const int n = xv.shape[0], in = xv.shape[1], out = wv.shape[0];
    std::vector<int> deps = {x, w};
    if (b >= 0) deps.push_back(b);
    int id = alloc({n, out}, deps);
    linear_forward(xv.data.data(), n, in, wv.data.data(),
                   b >= 0 ? val(b).data.data() : nullptr, out,
                   val(id).data.data());
    set_backward(id, [x, w, b, id, n, in, out](Graph& g) {
      const auto& go = g.nodes_[id].grad;
      if (g.nodes_[x].needs_grad) {
        auto& gx = g.ensure_grad(x);  // [N,in] += go[N,out] @ W[out,in]
        sgemm_nn(n, in, out, 1.0f, go.data.data(), g.val(w).data.data(), 1.0f,
                 gx.data.data());
      }
      if (g.nodes_[w].needs_grad) {
        auto& gw = g.ensure_grad(w);  // [out,in] += go^T @ x
        sgemm_tn(out, in, n, 1.0f, go.data.data(), g.val(x).data.data(), 1.0f,
                 gw.data.data());
      }
      if (b >= 0 && g.nodes_[b].needs_grad) {
        auto& gb = g.ensure_grad(b);
        for (int i = 0; i < n; ++i)
          for (int o = 0; o < out; ++o)
            gb.data[o] += go.data[static_cast<size_t>(i) * out + o];
      }
    });
    return id;
  }

  int conv2d(int x, int w, int b /* -1 for none */, int stride, int pad) {
    const auto& xv = val(x);
    const auto& wv = val(w);
    if (xv.shape.size() != 4 || wv.shape.size() != 4 || xv.shape[1] != wv.shape[1])
      throw ShapeError("conv2d: shape mismatch");
    const int n = xv.shape[0], c = xv.shape[1], h = xv.shape[2], wd = xv.shape[3];
    const int oc = wv.shape[0], kh = wv.shape[2], kw = wv.shape[3];
    const int oh = conv_out_dim(h, kh, stride, pad);
    const int ow = conv_out_dim(wd, kw, stride, pad);
    std::vector<int> deps = {x, w};
    if (b >= 0) deps.push_back(b);
    int id = alloc({n, oc, oh, ow}, deps);
    conv2d_forward(xv.data.data(), n, c, h, wd, wv.data.data(),
                   b >= 0 ? val(b).data.data() : nullptr, oc, kh, kw, stride,
                   pad, val(id).data.data(), scratch_);
    set_backward(id, [x, w, b, id, n, c, h, wd, oc, kh, kw, oh, ow, stride,
                      pad](Graph& g) {
      const auto& go = g.nodes_[id].grad;
      const int ck = c * kh * kw;
      const long ohw = static_cast<long>(oh) * ow;
      g.scratch_.resize(static_cast<size_t>(ck) * ohw);
      float* col = g.scratch_.data();
      const bool need_x = g.nodes_[x].needs_grad;
      const bool need_w = g.nodes_[w].needs_grad;
      if (need_x) g.ensure_grad(x);
      if (need_w) g.ensure_grad(w);
      for (int i = 0; i < n; ++i) {
        const float* goi = go.data.data() + static_cast<long>(i) * oc * ohw;
        if (need_w) {
          // dW += go_i @ col(x_i)^T
          im2col(g.val(x).data.data() + static_cast<long>(i) * c * h * wd, c, h,
                 wd, kh, kw, stride, pad, col);
          sgemm_nt(oc, ck, static_cast<int>(ohw), 1.0f, goi, col, 1.0f,
                   g.nodes_[w].grad.data.data());
        }
        if (need_x) {
          // col grad = W^T @ go_i, then scatter back with col2im.
          g.scratch2_.resize(static_cast<size_t>(ck) * ohw);
          sgemm_tn(ck, static_cast<int>(ohw), oc, 1.0f,
                   g.val(w).data.data(), goi, 0.0f, g.scratch2_.data());
          col2im_add(g.scratch2_.data(), c, h, wd, kh, kw, stride, pad,
                     g.nodes_[x].grad.data.data() +
                         static_cast<long>(i) * c * h * wd);
        }
      }
      if (b >= 0 && g.nodes_[b].needs_grad) {
        auto& gb = g.ensure_grad(b);
        for (int i = 0; i < n; ++i)
          for (int o = 0; o < oc; ++o) {
            double acc = 0.0;
            const float* row = go.data.data() + (static_cast<long>(i) * oc + o) * ohw;
            for (long p = 0; p < ohw; ++p) acc += row[p];
            gb.data[o] += static_cast<float>(acc);
          }
      }
    });
    return id;
  }

  int group_norm(int x, int gamma, int beta, int groups, float eps = 1e-5f) {
    const auto& xv = val(x);
    if (xv.shape.size() != 4 || xv.shape[1] % groups != 0)
      throw ShapeError("group_norm: want 4-d input, channels % groups == 0");
    const int n = xv.shape[0], c = xv.shape[1];
    const int hw = xv.shape[2] * xv.shape[3];
    int id = alloc(xv.shape, {x, gamma, beta});
    auto stats = std::make_shared<std::vector<float>>(2 * n * groups);
    group_norm_forward(xv.data.data(), n, c, hw, groups, eps,
                       val(gamma).data.data(), val(beta).data.data(),
                       val(id).data.data(), stats->data(),
                       stats->data() + n * groups);
    set_backward(id, [x, gamma, beta, id, n, c, hw, groups, stats](Graph& g) {
      const int cg = c / groups;
      const long m = static_cast<long>(cg) * hw;
      const auto& go = g.nodes_[id].grad.data;
      const auto& xd = g.val(x).data;
      const auto& gam = g.val(gamma).data;
      const bool need_x = g.nodes_[x].needs_grad;
      const bool need_g = g.nodes_[gamma].needs_grad;
      const bool need_b = g.nodes_[beta].needs_grad;
      float* gx = need_x ? g.ensure_grad(x).data.data() : nullptr;
      float* gg = need_g ? g.ensure_grad(gamma).data.data() : nullptr;
      float* gb = need_b ? g.ensure_grad(beta).data.data() : nullptr;
      for (int i = 0; i < n; ++i) {
        for (int grp = 0; grp < groups; ++grp) {
          const float mu = (*stats)[i * groups + grp];
          const float inv = (*stats)[n * groups + i * groups + grp];
          const long base = (static_cast<long>(i) * c + grp * cg) * hw;
          // xhat = (x - mu) * inv; dl/dxhat = go * gamma
          // dx = inv * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
          double sum_dxh = 0.0, sum_dxh_xh = 0.0;
          for (int ch = 0; ch < cg; ++ch) {
            const float sc = gam[grp * cg + ch];
            for (int p = 0; p < hw; ++p) {
              const long q = base + static_cast<long>(ch) * hw + p;
              const float xh = (xd[q] - mu) * inv;
              const float dxh = go[q] * sc;
              sum_dxh += dxh;
              sum_dxh_xh += static_cast<double>(dxh) * xh;
              if (gg) gg[grp * cg + ch] += go[q] * xh;
              if (gb) gb[grp * cg + ch] += go[q];
            }
          }
          if (!need_x) continue;
          const float mean_dxh = static_cast<float>(sum_dxh / m);
          const float mean_dxh_xh = static_cast<float>(sum_dxh_xh / m);
          for (int ch = 0; ch < cg; ++ch) {
            const float sc = gam[grp * cg + ch];
            for (int p = 0; p < hw; ++p) {
              const long q = base + static_cast<long>(ch) * hw + p;
              const float xh = (xd[q] - mu) * inv;
              const float dxh = go[q] * sc;
              gx[q] += inv * (dxh - mean_dxh - xh * mean_dxh_xh);
            }
          }
        }
      }
    });
    return id;
  }

  int layer_norm(int x, int gamma, int beta, float eps = 1e-5f) {
    const auto& xv = val(x);
    if (xv.shape.size() != 2) throw ShapeError("layer_norm: want 2-d input");
    const int n = xv.shape[0], d = xv.shape[1];
    int id = alloc(xv.shape, {x, gamma, beta});
    auto stats = std::make_shared<std::vector<float>>(2 * n);
    layer_norm_forward(xv.data.data(), n, d, eps, val(gamma).data.data(),
                       val(beta).data.data(), val(id).data.data(),
                       stats->data(), stats->data() + n);
    set_backward(id, [x, gamma, beta, id, n, d, stats](Graph& g) {
      const auto& go = g.nodes_[id].grad.data;
      const auto& xd = g.val(x).data;
      const auto& gam = g.val(gamma).data;
      const bool need_x = g.nodes_[x].needs_grad;
      float* gx = need_x ? g.ensure_grad(x).data.data() : nullptr;
      float* gg = g.nodes_[gamma].needs_grad ? g.ensure_grad(gamma).data.data() : nullptr;
      float* gb = g.nodes_[beta].needs_grad ? g.ensure_grad(beta).data.data() : nullptr;
      for (int i = 0; i < n; ++i) {
        const float mu = (*stats)[i];
        const float inv = (*stats)[n + i];
        const long base = static_cast<long>(i) * d;
        double sum_dxh = 0.0, sum_dxh_xh = 0.0;
        for (int j = 0; j < d; ++j) {
          const float xh = (xd[base + j] - mu) * inv;
          const float dxh = go[base + j] * gam[j];
          sum_dxh += dxh;
          sum_dxh_xh += static_cast<double>(dxh) * xh;
          if (gg) gg[j] += go[base + j] * xh;
          if (gb) gb[j] += go[base + j];
        }
        if (!need_x) continue;
        const float mean_dxh = static_cast<float>(sum_dxh / d);
        const float mean_dxh_xh = static_cast<float>(sum_dxh_xh / d);
        for (int j = 0; j < d; ++j) {
          const float xh = (xd[base + j] - mu) * inv;
          const float dxh = go[base + j] * gam[j];
          gx[base + j] += inv * (dxh - mean_dxh - xh * mean_dxh_xh);
        }
      }
    });
    return id;
  }

  // One GRU step (PyTorch r,z,n gate layout), composed from primitive ops so
  // the whole cell is covered by the same backward machinery.
  //   w_ih [3H, in], w_hh [3H, H], b_ih [3H], b_hh [3H]
  int gru_cell(int x, int h, int w_ih, int w_hh, int b_ih, int b_hh) {
    const int hidden = val(h).shape[1];
    const int gi = linear(x, w_ih, b_ih);
    const int gh = linear(h, w_hh, b_hh);
    const int r = sigmoid(add(slice_cols(gi, 0, hidden), slice_cols(gh, 0, hidden)));
    const int z = sigmoid(add(slice_cols(gi, hidden, hidden), slice_cols(gh, hidden, hidden)));
    const int cand = tanh_op(add(slice_cols(gi, 2 * hidden, hidden),
                                 mul(r, slice_cols(gh, 2 * hidden, hidden))));
    // h' = (1 - z) * cand + z * h
    return add(mul(affine(z, -1.0f, 1.0f), cand), mul(z, h));
  }

  // --- reductions / losses ---------------------------------------------

  int sum_all(int a) {
    int id = alloc({1}, {a});
    double acc = 0.0;
    for (float v : val(a).data) acc += v;
    val(id).data[0] = static_cast<float>(acc);
    set_backward(id, [a, id](Graph& g) {
      g.accumulate_scalar(a, g.nodes_[id].grad.data[0]);
    });
    return id;
  }

  int mean_all(int a) {
    const float inv = 1.0f / static_cast<float>(val(a).data.size());
    int id = alloc({1}, {a});
    double acc = 0.0;
    for (float v : val(a).data) acc += v;
    val(id).data[0] = static_cast<float>(acc * inv);
    set_backward(id, [a, id, inv](Graph& g) {
      g.accumulate_scalar(a, g.nodes_[id].grad.data[0] * inv);
    });
    return id;
  }

  // (1/N) * sum_b ||x_b||^2 for x [N,D]: the squared-error building block.
  int mean_rows_sumsq(int a) {
    const auto& x = val(a);
    if (x.shape.size() != 2) throw ShapeError("mean_rows_sumsq: want 2-d input");
    const int n = x.shape[0];
    int id = alloc({1}, {a});
    double acc = 0.0;
    for (float v : x.data) acc += static_cast<double>(v) * v;
    val(id).data[0] = static_cast<float>(acc / n);
    set_backward(id, [a, id, n](Graph& g) {
      if (!g.nodes_[a].needs_grad) return;
      auto& ga = g.ensure_grad(a);
      const float s = 2.0f * g.nodes_[id].grad.data[0] / static_cast<float>(n);
      const auto& x2 = g.val(a).data;
      for (size_t i = 0; i < x2.size(); ++i) ga.data[i] += s * x2[i];
    });
    return id;
  }

  // Variance hinge over the batch dimension of x [N,D]:
  //   (1/D) * sum_j max(0, margin - sqrt(Var_b(x[:,j]) + eps))
  // with unbiased variance.
  int var_hinge(int a, float margin, float eps) {
    const auto& x = val(a);
    if (x.shape.size() != 2 || x.shape[0] < 2)
      throw ShapeError("var_hinge: want 2-d input with N >= 2");
    const int n = x.shape[0], d = x.shape[1];
    int id = alloc({1}, {a});
    auto mean = std::make_shared<std::vector<float>>(d);
    auto inv_std = std::make_shared<std::vector<float>>(d, 0.0f);  // 0 => inactive
    double loss = 0.0;
    for (int j = 0; j < d; ++j) {
      double mu = 0.0;
      for (int i = 0; i < n; ++i) mu += x.data[static_cast<size_t>(i) * d + j];
      mu /= n;
      double var = 0.0;
      for (int i = 0; i < n; ++i) {
        const double dd = x.data[static_cast<size_t>(i) * d + j] - mu;
        var += dd * dd;
      }
      var /= (n - 1);
      const double s = std::sqrt(var + eps);
      (*mean)[j] = static_cast<float>(mu);
      if (s < margin) {
        loss += margin - s;
        (*inv_std)[j] = static_cast<float>(1.0 / s);
      }
    }
    val(id).data[0] = static_cast<float>(loss / d);
    set_backward(id, [a, id, n, d, mean, inv_std](Graph& g) {
      if (!g.nodes_[a].needs_grad) return;
      auto& ga = g.ensure_grad(a);
      const auto& x2 = g.val(a).data;
      const float go = g.nodes_[id].grad.data[0];
      const float c = -go / (static_cast<float>(d) * (n - 1));
      for (int j = 0; j < d; ++j) {
        const float is = (*inv_std)[j];
        if (is == 0.0f) continue;
        for (int i = 0; i < n; ++i) {
          const size_t q = static_cast<size_t>(i) * d + j;
          ga.data[q] += c * is * (x2[q] - (*mean)[j]);
        }
      }
    });
    return id;
  }

  // Off-diagonal covariance penalty for x [N,D]:
  //   (1/D) * sum_{i != j} C_ij^2,   C = Zc^T Zc / (N-1)
  // computed through the N x N Gram matrix so D can be large.
  int cov_offdiag(int a) {
    const auto& x = val(a);
    if (x.shape.size() != 2 || x.shape[0] < 2)
      throw ShapeError("cov_offdiag: want 2-d input with N >= 2");
    const int n = x.shape[0], d = x.shape[1];
    int id = alloc({1}, {a});
    auto zc = std::make_shared<std::vector<float>>(x.data);
    // center columns
    for (int j = 0; j < d; ++j) {
      double mu = 0.0;
      for (int i = 0; i < n; ++i) mu += (*zc)[static_cast<size_t>(i) * d + j];
      mu /= n;
      for (int i = 0; i < n; ++i)
        (*zc)[static_cast<size_t>(i) * d + j] -= static_cast<float>(mu);
    }
    auto gram = std::make_shared<std::vector<float>>(static_cast<size_t>(n) * n);
    sgemm_nt(n, n, d, 1.0f, zc->data(), zc->data(), 0.0f, gram->data());
    auto colsq = std::make_shared<std::vector<float>>(d);
    double diag = 0.0;
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) {
        const float v = (*zc)[static_cast<size_t>(i) * d + j];
        s += static_cast<double>(v) * v;
      }
      (*colsq)[j] = static_cast<float>(s);
      diag += (s / (n - 1)) * (s / (n - 1));
    }
    double fro = 0.0;
    for (float v : *gram) fro += static_cast<double>(v) * v;
    fro /= static_cast<double>(n - 1) * (n - 1);
    val(id).data[0] = static_cast<float>((fro - diag) / d);
    set_backward(id, [a, id, n, d, zc, gram, colsq](Graph& g) {
      if (!g.nodes_[a].needs_grad) return;
      auto& ga = g.ensure_grad(a);
      const float go = g.nodes_[id].grad.data[0];
      // d loss / d Zc = 4 / (D (N-1)^2) * (G Zc - Zc * colsq_j)
      std::vector<float> gz(static_cast<size_t>(n) * d);
      sgemm_nn(n, d, n, 1.0f, gram->data(), zc->data(), 0.0f, gz.data());
      const float c = 4.0f * go / (static_cast<float>(d) *
                                   static_cast<float>(n - 1) * (n - 1));
      // chain through column centering: subtract the column mean of the grad.
      for (int j = 0; j < d; ++j) {
        double mu = 0.0;
        for (int i = 0; i < n; ++i) {
          const size_t q = static_cast<size_t>(i) * d + j;
          gz[q] = c * (gz[q] - (*zc)[q] * (*colsq)[j]);
          mu += gz[q];
        }
        mu /= n;
        for (int i = 0; i < n; ++i)
          ga.data[static_cast<size_t>(i) * d + j] +=
              gz[static_cast<size_t>(i) * d + j] - static_cast<float>(mu);
      }
    });
    return id;
  }

  // --- driver -----------------------------------------------------------

  // Run the reverse pass from a scalar loss node and flush parameter
  // gradients into the store. Interior values/grads are freed as the walk
  // passes them; the graph is single-use after this.
  void backward(int loss_id) {
    if (val(loss_id).data.size() != 1)
      throw ShapeError("backward: loss must be scalar");
    ensure_grad(loss_id).data[0] = 1.0f;
    for (int i = loss_id; i >= 0; --i) {
      Node& nd = nodes_[i];
      if (nd.needs_grad && nd.backward && !nd.grad.data.empty()) nd.backward(*this);
      if (nd.param_index >= 0 && !nd.grad.data.empty()) {
        auto& e = params_->entries[nd.param_index];
        for (size_t k = 0; k < e.grad.data.size(); ++k)
          e.grad.data[k] += nd.grad.data[k];
      }
      // release memory the walk no longer needs
      std::vector<float>().swap(nd.grad.data);
      if (nd.backward) std::vector<float>().swap(nd.value.data);
      nd.backward = nullptr;
    }
  }

  Tensor& ensure_grad(int id) {
    Node& nd = nodes_[id];
    if (nd.grad.data.empty()) {
      nd.grad.shape = nd.value.shape;
      nd.grad.data.assign(nd.value.data.size(), 0.0f);
    }
    return nd.grad;
  }

 private:
  friend struct GraphTestAccess;

  int last() const { return static_cast<int>(nodes_.size()) - 1; }
  Tensor& val(int id) { return nodes_[id].value; }
  const Tensor& val(int id) const { return nodes_[id].value; }

  int alloc(const std::vector<int>& shape, const std::vector<int>& deps) {
    Node n;
    n.value.shape = shape;
    n.value.data.assign(numel_of(shape), 0.0f);
    for (int d : deps) n.needs_grad = n.needs_grad || nodes_[d].needs_grad;
    nodes_.push_back(std::move(n));
    return last();
  }

  int alloc_like(int src, const std::vector<int>& deps) {
    return alloc(nodes_[src].value.shape, deps);
  }

  void set_backward(int id, std::function<void(Graph&)> fn) {
    if (nodes_[id].needs_grad) nodes_[id].backward = std::move(fn);
  }

  void accumulate(int id, const Tensor& g, float s) {
    if (!nodes_[id].needs_grad) return;
    auto& dst = ensure_grad(id);
    for (size_t i = 0; i < g.data.size(); ++i) dst.data[i] += s * g.data[i];
  }

  // Same as accumulate but ignores shape (for reshape-style pass-through).
  void accumulate_flat(int id, const Tensor& g, float s) { accumulate(id, g, s); }

  void accumulate_scalar(int id, float s) {
    if (!nodes_[id].needs_grad) return;
    auto& dst = ensure_grad(id);
    for (auto& v : dst.data) v += s;
  }

  static float softplusf(float v) {
    // stable softplus
    if (v > 20.0f) return v;
    if (v < -20.0f) return std::exp(v);
    return std::log1p(std::exp(v));
  }

  ParamStore* params_;
  std::deque<Node> nodes_;
  std::vector<float> scratch_;
  std::vector<float> scratch2_;
};

}  // namespace pldm::nn
