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

#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <cstring>

#include "gradcheck.hpp"
#include "pldm/core/rng.hpp"
#include "pldm/nn/adam.hpp"
#include "pldm/nn/checkpoint.hpp"
#include "pldm/nn/graph.hpp"

using pldm::Rng;
using pldm::Tensor;
using namespace pldm::nn;
using pldm::testing::grad_check;

namespace {

Tensor rand_tensor(Rng& rng, std::vector<int> shape, float lo = -1.0f,
                   float hi = 1.0f) {
  Tensor t;
  t.shape = std::move(shape);
  t.data.resize(pldm::numel_of(t.shape));
  for (auto& v : t.data)
    v = lo + (hi - lo) * static_cast<float>(rng.uniform());
  return t;
}

// Keep values away from the ReLU kink so finite differences stay valid.
Tensor rand_tensor_nokink(Rng& rng, std::vector<int> shape) {
  Tensor t = rand_tensor(rng, std::move(shape));
  for (auto& v : t.data) v = (v >= 0 ? 1.0f : -1.0f) * (0.2f + 0.8f * std::abs(v));
  return t;
}

constexpr double kTol = 1e-3;

}  // namespace

TEST_CASE("gradcheck: linear") {
  for (int probe = 0; probe < 5; ++probe) {
    Rng rng(100 + probe);
    ParamStore ps;
    ps.add("x", rand_tensor(rng, {2, 4}));
    ps.add("w", rand_tensor(rng, {3, 4}));
    ps.add("b", rand_tensor(rng, {3}));
    auto r = grad_check(ps, [](Graph& g) {
      return g.mean_rows_sumsq(g.linear(g.param("x"), g.param("w"), g.param("b")));
    });
    INFO("probe " << probe << " worst " << r.worst);
    CHECK(r.max_rel_err < kTol);
  }
}

TEST_CASE("gradcheck: conv2d") {
  for (int probe = 0; probe < 5; ++probe) {
    Rng rng(200 + probe);
    ParamStore ps;
    ps.add("x", rand_tensor(rng, {1, 2, 4, 4}, -0.5f, 0.5f));
    ps.add("w", rand_tensor(rng, {2, 2, 3, 3}, -0.25f, 0.25f));
    ps.add("b", rand_tensor(rng, {2}, -0.25f, 0.25f));
    auto r = grad_check(ps, [](Graph& g) {
      int y = g.conv2d(g.param("x"), g.param("w"), g.param("b"), /*stride=*/2,
                       /*pad=*/1);
      return g.mean_rows_sumsq(g.reshape(y, {1, 2 * 2 * 2}));
    });
    INFO("probe " << probe << " worst " << r.worst);
    CHECK(r.max_rel_err < kTol);
  }
}

TEST_CASE("gradcheck: conv2d no bias, stride 1") {
  for (int probe = 0; probe < 5; ++probe) {
    Rng rng(250 + probe);
    ParamStore ps;
    ps.add("x", rand_tensor(rng, {1, 1, 4, 4}, -0.5f, 0.5f));
    ps.add("w", rand_tensor(rng, {2, 1, 3, 3}, -0.25f, 0.25f));
    auto r = grad_check(ps, [](Graph& g) {
      int y = g.conv2d(g.param("x"), g.param("w"), -1, 1, 0);
      return g.mean_rows_sumsq(g.reshape(y, {1, 2 * 2 * 2}));
    });
    CHECK(r.max_rel_err < kTol);
  }
}

TEST_CASE("gradcheck: group_norm") {
  for (int probe = 0; probe < 5; ++probe) {
    Rng rng(300 + probe);
    ParamStore ps;
    ps.add("x", rand_tensor(rng, {1, 4, 1, 2}));
    ps.add("gamma", rand_tensor(rng, {4}, 0.5f, 1.5f));
    ps.add("beta", rand_tensor(rng, {4}));
    Tensor fixed = rand_tensor(rng, {1, 4, 1, 2});
    auto r = grad_check(ps, [fixed](Graph& g) {
      int y = g.group_norm(g.param("x"), g.param("gamma"), g.param("beta"), 2);
      return g.sum_all(g.mul(y, g.input(fixed)));
    });
    INFO("probe " << probe << " worst " << r.worst);
    CHECK(r.max_rel_err < kTol);
  }
}

TEST_CASE("gradcheck: layer_norm") {
  for (int probe = 0; probe < 5; ++probe) {
    Rng rng(400 + probe);
    ParamStore ps;
    ps.add("x", rand_tensor(rng, {2, 5}));
    ps.add("gamma", rand_tensor(rng, {5}, 0.5f, 1.5f));
    ps.add("beta", rand_tensor(rng, {5}));
    Tensor fixed = rand_tensor(rng, {2, 5});
    auto r = grad_check(ps, [fixed](Graph& g) {
      int y = g.layer_norm(g.param("x"), g.param("gamma"), g.param("beta"));
      return g.sum_all(g.mul(y, g.input(fixed)));
    });
    CHECK(r.max_rel_err < kTol);
  }
}

TEST_CASE("gradcheck: activations") {
  for (int probe = 0; probe < 5; ++probe) {
    Rng rng(500 + probe);
    Tensor fixed = rand_tensor(rng, {1, 5});
    for (int which = 0; which < 4; ++which) {
      ParamStore ps;
      ps.add("x", rand_tensor_nokink(rng, {1, 5}));
      auto r = grad_check(ps, [fixed, which](Graph& g) {
        int x = g.param("x");
        int y = which == 0   ? g.relu(x)
                : which == 1 ? g.mish(x)
                : which == 2 ? g.sigmoid(x)
                             : g.tanh_op(x);
        return g.sum_all(g.mul(y, g.input(fixed)));
      });
      INFO("activation " << which << " worst " << r.worst);
      CHECK(r.max_rel_err < kTol);
    }
  }
}

TEST_CASE("gradcheck: gru_cell") {
  for (int probe = 0; probe < 5; ++probe) {
    Rng rng(600 + probe);
    ParamStore ps;
    ps.add("x", rand_tensor(rng, {1, 3}));
    ps.add("h", rand_tensor(rng, {1, 3}));
    ps.add("w_ih", rand_tensor(rng, {9, 3}, -0.5f, 0.5f));
    ps.add("w_hh", rand_tensor(rng, {9, 3}, -0.5f, 0.5f));
    ps.add("b_ih", rand_tensor(rng, {9}, -0.2f, 0.2f));
    ps.add("b_hh", rand_tensor(rng, {9}, -0.2f, 0.2f));
    auto r = grad_check(ps, [](Graph& g) {
      int h1 = g.gru_cell(g.param("x"), g.param("h"), g.param("w_ih"),
                          g.param("w_hh"), g.param("b_ih"), g.param("b_hh"));
      return g.mean_rows_sumsq(h1);
    });
    INFO("probe " << probe << " worst " << r.worst);
    CHECK(r.max_rel_err < kTol);
  }
}

TEST_CASE("gradcheck: shape ops and arithmetic") {
  for (int probe = 0; probe < 5; ++probe) {
    Rng rng(700 + probe);
    ParamStore ps;
    ps.add("a", rand_tensor(rng, {2, 2}));
    ps.add("b", rand_tensor(rng, {2, 3}));
    ps.add("c", rand_tensor(rng, {2, 1, 2, 2}));
    ps.add("d", rand_tensor(rng, {2, 1, 2, 2}));
    Tensor fixed = rand_tensor(rng, {2, 2 * 2 * 2});
    auto r = grad_check(ps, [fixed](Graph& g) {
      int ab = g.concat_cols(g.param("a"), g.param("b"));  // [2,5]
      int s = g.slice_cols(ab, 1, 2);                      // [2,2]
      int ex = g.expand_planes(s, 2);                      // [2,2,2,2]
      int cd = g.concat_channels(g.param("c"), g.param("d"));  // [2,2,2,2]
      int y = g.add(g.mul(ex, cd), g.affine(g.sub(ex, cd), -0.5f, 0.25f));
      int flat = g.reshape(y, {2, 2 * 2 * 2});
      return g.add(g.mean_all(g.mul(flat, g.input(fixed))),
                   g.scale(g.mean_rows_sumsq(flat), 0.5f));
    });
    INFO("probe " << probe << " worst " << r.worst);
    CHECK(r.max_rel_err < kTol);
  }
}

TEST_CASE("gradcheck: var_hinge and cov_offdiag") {
  for (int probe = 0; probe < 5; ++probe) {
    Rng rng(800 + probe);
    ParamStore ps;
    ps.add("x", rand_tensor(rng, {4, 3}));
    auto r = grad_check(ps, [](Graph& g) {
      // margin 2.0 keeps every hinge active for inputs in [-1,1]
      return g.add(g.var_hinge(g.param("x"), 2.0f, 1e-4f),
                   g.cov_offdiag(g.param("x")));
    });
    INFO("probe " << probe << " worst " << r.worst);
    CHECK(r.max_rel_err < kTol);
  }
}

TEST_CASE("var_hinge forward matches brute force") {
  Rng rng(901);
  Tensor x = rand_tensor(rng, {7, 4});
  const int n = 7, d = 4;
  const double margin = 1.3, eps = 1e-4;
  double want = 0.0;
  for (int j = 0; j < d; ++j) {
    double mu = 0.0;
    for (int i = 0; i < n; ++i) mu += x.data[i * d + j];
    mu /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
      double dd = x.data[i * d + j] - mu;
      var += dd * dd;
    }
    var /= (n - 1);
    want += std::max(0.0, margin - std::sqrt(var + eps));
  }
  want /= d;
  Graph g;
  float got = g.scalar(g.var_hinge(g.input(x), 1.3f, 1e-4f));
  CHECK(got == Catch::Approx(want).epsilon(1e-5));
}

TEST_CASE("cov_offdiag forward matches brute-force covariance") {
  Rng rng(902);
  Tensor x = rand_tensor(rng, {9, 6});
  const int n = 9, d = 6;
  std::vector<double> mu(d, 0.0);
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < n; ++i) mu[j] += x.data[i * d + j];
    mu[j] /= n;
  }
  double want = 0.0;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      if (a == b) continue;
      double c = 0.0;
      for (int i = 0; i < n; ++i)
        c += (x.data[i * d + a] - mu[a]) * (x.data[i * d + b] - mu[b]);
      c /= (n - 1);
      want += c * c;
    }
  want /= d;
  Graph g;
  float got = g.scalar(g.cov_offdiag(g.input(x)));
  CHECK(got == Catch::Approx(want).epsilon(1e-4));
}

TEST_CASE("mean_rows_sumsq matches the worked example") {
  // one sample, diff = (1, 2): ||diff||^2 = 5; two such timesteps sum to 10
  Tensor diff;
  diff.shape = {1, 2};
  diff.data = {1.0f, 2.0f};
  Graph g;
  int t0 = g.mean_rows_sumsq(g.input(diff));
  int t1 = g.mean_rows_sumsq(g.input(diff));
  CHECK(g.scalar(g.add(t0, t1)) == Catch::Approx(10.0));
}

TEST_CASE("layer_norm output is standardized") {
  Rng rng(903);
  Tensor x = rand_tensor(rng, {4, 16}, -3.0f, 3.0f);
  Tensor gamma, beta;
  gamma.shape = beta.shape = {16};
  gamma.data.assign(16, 1.0f);
  beta.data.assign(16, 0.0f);
  Graph g;
  int y = g.layer_norm(g.input(x), g.input(gamma), g.input(beta));
  const auto& yd = g.value(y).data;
  for (int i = 0; i < 4; ++i) {
    double mu = 0.0, var = 0.0;
    for (int j = 0; j < 16; ++j) mu += yd[i * 16 + j];
    mu /= 16;
    for (int j = 0; j < 16; ++j) {
      double dd = yd[i * 16 + j] - mu;
      var += dd * dd;
    }
    var /= 16;
    CHECK(std::abs(mu) < 1e-5);
    CHECK(var == Catch::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("adam step matches a double-precision reference") {
  ParamStore ps;
  Tensor w;
  w.shape = {3};
  w.data = {1.0f, -2.0f, 0.5f};
  ps.add("w", w);
  auto& e = ps.at("w");
  e.grad.data = {0.5f, -1.5f, 0.0f};
  std::vector<double> ref(3);
  for (int i = 0; i < 3; ++i) {
    const double gd = e.grad.data[i];
    const double m = 0.1 * gd;                     // (1-0.9) g
    const double v = 0.001 * gd * gd;              // (1-0.999) g^2
    const double mh = m / (1.0 - 0.9);
    const double vh = v / (1.0 - 0.999);
    ref[i] = w.data[i] - 0.01 * mh / (std::sqrt(vh) + 1e-8);
  }
  adam_step(ps, 0.01f, 1);
  for (int i = 0; i < 3; ++i)
    CHECK(ps.at("w").value.data[i] == Catch::Approx(ref[i]).margin(1e-6));
  // gradients cleared
  for (int i = 0; i < 3; ++i) CHECK(ps.at("w").grad.data[i] == 0.0f);
}

TEST_CASE("cosine schedule endpoints") {
  CHECK(cosine_lr(0.003f, 0, 1000) == Catch::Approx(0.003));
  CHECK(cosine_lr(0.003f, 500, 1000) == Catch::Approx(0.0015));
  CHECK(cosine_lr(0.003f, 1000, 1000) == 0.0f);
}

TEST_CASE("checkpoint round-trip is bit exact") {
  Rng rng(904);
  ParamStore ps;
  ps.add("enc.w", rand_tensor(rng, {4, 3, 2, 2}));
  ps.add("enc.b", rand_tensor(rng, {4}));
  ps.add("pred.w", rand_tensor(rng, {7, 9}));
  for (auto& e : ps.entries) {
    for (auto& v : e.m.data) v = static_cast<float>(rng.normal());
    for (auto& v : e.v.data) v = std::abs(static_cast<float>(rng.normal()));
  }
  const std::string path = "ckpt_roundtrip_test.bin";
  save_checkpoint(path, ps, "{\"arch\":\"test\"}");
  ParamStore ps2;
  std::string meta = load_checkpoint(path, ps2);
  CHECK(meta == "{\"arch\":\"test\"}");
  REQUIRE(ps2.entries.size() == ps.entries.size());
  for (size_t i = 0; i < ps.entries.size(); ++i) {
    CHECK(ps2.entries[i].name == ps.entries[i].name);
    CHECK(ps2.entries[i].value.shape == ps.entries[i].value.shape);
    CHECK(std::memcmp(ps2.entries[i].value.data.data(),
                      ps.entries[i].value.data.data(),
                      ps.entries[i].value.data.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(ps2.entries[i].m.data.data(), ps.entries[i].m.data.data(),
                      ps.entries[i].m.data.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(ps2.entries[i].v.data.data(), ps.entries[i].v.data.data(),
                      ps.entries[i].v.data.size() * sizeof(float)) == 0);
  }
  // save again from the loaded store: files identical
  const std::string path2 = "ckpt_roundtrip_test2.bin";
  save_checkpoint(path2, ps2, meta);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), {});
  std::string b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);
  // corrupting a byte fails the checksum
  b1[b1.size() / 2] ^= 0x5a;
  std::ofstream(path, std::ios::binary | std::ios::trunc) << b1;
  ParamStore ps3;
  CHECK_THROWS(load_checkpoint(path, ps3));
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("rng streams are deterministic and decorrelated") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  Rng s1 = Rng(42).stream(7);
  Rng s2 = Rng(42).stream(8);
  int same = 0;
  for (int i = 0; i < 64; ++i)
    same += (s1.uniform() < 0.5) == (s2.uniform() < 0.5);
  CHECK(same < 50);  // streams should not be lockstep
  (void)c;
}

TEST_CASE("von mises sampler has the right resultant length") {
  Rng rng(77);
  const int n = 200000;
  double cs = 0.0, sn = 0.0;
  for (int i = 0; i < n; ++i) {
    double th = rng.von_mises(0.7, 5.0);
    cs += std::cos(th - 0.7);
    sn += std::sin(th - 0.7);
  }
  // I1(5)/I0(5) = 0.893285...
  CHECK(cs / n == Catch::Approx(0.8933).margin(0.004));
  CHECK(std::abs(sn / n) < 0.004);
}
