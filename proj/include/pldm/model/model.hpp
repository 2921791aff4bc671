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

// PLDM world model: encoder, K-member predictor ensemble, IDM head.
//
// Two-Rooms: conv encoder -> 512-dim latent with output LayerNorm; each
// predictor member is a GRU cell (input = 2-d action, hidden = latent) with
// its own output LayerNorm (1 cell + LN = 793,600 params).
//
// PointMaze: MeNet6 conv encoder 3x64x64 -> 16x26x26, velocity fused as two
// constant Expander2D planes -> 18x26x26 latent; conv predictor takes the
// latent stacked with two expanded action planes (20 channels) and returns
// an 18-channel map. Counts match the reference listing exactly
// (encoder 33,296 / predictor 20,370 per member).

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pldm/core/rng.hpp"
#include "pldm/nn/graph.hpp"

namespace pldm::model {

enum class EnvKind { kTwoRooms, kPointMaze };

inline const char* env_kind_name(EnvKind k) {
  return k == EnvKind::kTwoRooms ? "two_rooms" : "pointmaze";
}

inline EnvKind env_kind_from_name(const std::string& s) {
  if (s == "two_rooms") return EnvKind::kTwoRooms;
  if (s == "pointmaze") return EnvKind::kPointMaze;
  throw std::runtime_error("model: unknown env kind: " + s);
}

struct ModelConfig {
  EnvKind env = EnvKind::kTwoRooms;
  int ensemble = 5;     // K
  int gru_hidden = 512; // Two-Rooms latent width
  int idm_hidden = 64;

  // tiny-model overrides for gradcheck-scale tests; defaults = full size
  int debug_channels = 0;
  int obs_side = 64;

  static int conv_out(int s, int k, int stride, int pad) {
    return (s + 2 * pad - k) / stride + 1;
  }
  int c_lo() const { return debug_channels > 0 ? debug_channels : 16; }
  int c_hi() const { return debug_channels > 0 ? 2 * debug_channels : 32; }
  // Spatial side after the conv trunk: Two-Rooms 64 -> 2, PointMaze 64 -> 26.
  int enc_side() const {
    int s = obs_side;
    if (env == EnvKind::kTwoRooms) {
      for (int k : {5, 3, 3, 3}) s = conv_out(s, k, 2, 0);
      return s;
    }
    s = conv_out(s, 5, 1, 0);
    s = conv_out(s, 5, 2, 0);
    return conv_out(s, 3, 1, 0);  // c3 (pad 1) and c4 (1x1) preserve size
  }
  int latent_channels() const { return c_lo() + 2; }
  int latent_dim() const {
    return env == EnvKind::kTwoRooms
               ? gru_hidden
               : latent_channels() * enc_side() * enc_side();
  }
  int obs_channels() const { return env == EnvKind::kTwoRooms ? 2 : 3; }
  bool has_velocity() const { return env == EnvKind::kPointMaze; }
};

namespace detail {

inline Tensor uniform_init(Rng& rng, std::vector<int> shape, int fan_in) {
  Tensor t(std::move(shape));
  const double k = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(-k, k));
  return t;
}

inline void add_conv(nn::ParamStore& ps, Rng& rng, const std::string& name,
                     int oc, int ic, int k) {
  ps.add(name + ".w", uniform_init(rng, {oc, ic, k, k}, ic * k * k));
  ps.add(name + ".b", uniform_init(rng, {oc}, ic * k * k));
}

inline void add_norm(nn::ParamStore& ps, const std::string& name, int c) {
  Tensor gamma({c}), beta({c});
  std::fill(gamma.data.begin(), gamma.data.end(), 1.0f);
  ps.add(name + ".gamma", std::move(gamma));
  ps.add(name + ".beta", std::move(beta));
}

inline void add_linear(nn::ParamStore& ps, Rng& rng, const std::string& name,
                       int out, int in) {
  ps.add(name + ".w", uniform_init(rng, {out, in}, in));
  ps.add(name + ".b", uniform_init(rng, {out}, in));
}

}  // namespace detail

inline std::string pred_prefix(int k) { return "pred" + std::to_string(k); }

// Registers all parameters of the configured model; deterministic in seed.
inline void init_params(nn::ParamStore& ps, const ModelConfig& cfg,
                        uint64_t seed) {
  using detail::add_conv;
  using detail::add_linear;
  using detail::add_norm;
  Rng rng(seed);
  if (cfg.env == EnvKind::kTwoRooms) {
    const int h = cfg.gru_hidden;
    const int c16 = cfg.c_lo(), c32 = cfg.c_hi();
    add_conv(ps, rng, "enc.c0", c16, 2, 5);
    add_norm(ps, "enc.g0", c16);
    add_conv(ps, rng, "enc.c1", c32, c16, 3);
    add_norm(ps, "enc.g1", c32);
    add_conv(ps, rng, "enc.c2", c32, c32, 3);
    add_norm(ps, "enc.g2", c32);
    add_conv(ps, rng, "enc.c3", c32, c32, 3);
    add_norm(ps, "enc.g3", c32);
    const int side = cfg.enc_side();
    add_linear(ps, rng, "enc.fc", h, c32 * side * side);
    add_norm(ps, "enc.ln", h);
    for (int k = 0; k < cfg.ensemble; ++k) {
      const std::string p = pred_prefix(k);
      ps.add(p + ".gru.w_ih", detail::uniform_init(rng, {3 * h, 2}, h));
      ps.add(p + ".gru.w_hh", detail::uniform_init(rng, {3 * h, h}, h));
      ps.add(p + ".gru.b_ih", detail::uniform_init(rng, {3 * h}, h));
      ps.add(p + ".gru.b_hh", detail::uniform_init(rng, {3 * h}, h));
      add_norm(ps, p + ".ln", h);
    }
  } else {
    // channel widths scale down together for gradcheck-size configs
    const int c16 = cfg.c_lo(), c32 = cfg.c_hi();
    add_conv(ps, rng, "enc.c0", c16, 3, 5);
    add_norm(ps, "enc.g0", c16);
    add_conv(ps, rng, "enc.c1", c32, c16, 5);
    add_norm(ps, "enc.g1", c32);
    add_conv(ps, rng, "enc.c2", c32, c32, 3);
    add_norm(ps, "enc.g2", c32);
    add_conv(ps, rng, "enc.c3", c32, c32, 3);
    add_norm(ps, "enc.g3", c32);
    add_conv(ps, rng, "enc.c4", c16, c32, 1);
    for (int k = 0; k < cfg.ensemble; ++k) {
      const std::string p = pred_prefix(k);
      add_conv(ps, rng, p + ".c0", c32, c16 + 4, 3);
      add_norm(ps, p + ".g0", c32);
      add_conv(ps, rng, p + ".c1", c32, c32, 3);
      add_norm(ps, p + ".g1", c32);
      add_conv(ps, rng, p + ".c2", c16 + 2, c32, 3);
    }
  }
  add_linear(ps, rng, "idm.fc0", cfg.idm_hidden, 2 * cfg.latent_dim());
  add_linear(ps, rng, "idm.fc1", 2, cfg.idm_hidden);
}

namespace detail {

inline int conv_gn_relu(nn::Graph& g, int x, const std::string& conv,
                        const std::string& norm, int groups, int stride,
                        int pad) {
  const int c = g.conv2d(x, g.param(conv + ".w"), g.param(conv + ".b"),
                         stride, pad);
  const int n = g.group_norm(c, g.param(norm + ".gamma"),
                             g.param(norm + ".beta"), groups);
  return g.relu(n);
}

}  // namespace detail

// obs: [N, C, 64, 64] node. vel: [N, 2] node (PointMaze) or -1.
// Two-Rooms result: [N, 512] post-LayerNorm. PointMaze: [N, 18, 26, 26].
inline int encode(nn::Graph& g, const ModelConfig& cfg, int obs, int vel) {
  using detail::conv_gn_relu;
  if (cfg.env == EnvKind::kTwoRooms) {
    const int g1 = cfg.debug_channels > 0 ? 1 : 4;
    const int g2 = cfg.debug_channels > 0 ? 1 : 8;
    int x = conv_gn_relu(g, obs, "enc.c0", "enc.g0", g1, 2, 0);  // 64 -> 30
    x = conv_gn_relu(g, x, "enc.c1", "enc.g1", g2, 2, 0);        // 30 -> 14
    x = conv_gn_relu(g, x, "enc.c2", "enc.g2", g2, 2, 0);        // 14 -> 6
    x = conv_gn_relu(g, x, "enc.c3", "enc.g3", g2, 2, 0);        // 6 -> 2
    const int n = g.value(x).shape[0];
    const int side = cfg.enc_side();
    x = g.reshape(x, {n, cfg.c_hi() * side * side});
    x = g.linear(x, g.param("enc.fc.w"), g.param("enc.fc.b"));
    return g.layer_norm(x, g.param("enc.ln.gamma"), g.param("enc.ln.beta"));
  }
  if (vel < 0) throw std::runtime_error("model: pointmaze encode needs velocity");
  const int groups = cfg.debug_channels > 0 ? 1 : 4;
  const int groups2 = cfg.debug_channels > 0 ? 1 : 8;
  int x = conv_gn_relu(g, obs, "enc.c0", "enc.g0", groups, 1, 0);  // 64 -> 60
  x = conv_gn_relu(g, x, "enc.c1", "enc.g1", groups2, 2, 0);       // 60 -> 28
  x = conv_gn_relu(g, x, "enc.c2", "enc.g2", groups2, 1, 0);       // 28 -> 26
  x = conv_gn_relu(g, x, "enc.c3", "enc.g3", groups2, 1, 1);       // 26 -> 26
  x = g.conv2d(x, g.param("enc.c4.w"), g.param("enc.c4.b"), 1, 0);
  const int side = g.value(x).shape[2];
  const int planes = g.expand_planes(vel, side);
  return g.concat_channels(planes, x);
}

// One ensemble-member transition. Two-Rooms: z = raw GRU hidden [N, 512];
// PointMaze: z = [N, 18, 26, 26] latent map. action: [N, 2].
inline int predict_step(nn::Graph& g, const ModelConfig& cfg, int k, int z,
                        int action) {
  const std::string p = pred_prefix(k);
  if (cfg.env == EnvKind::kTwoRooms) {
    return g.gru_cell(action, z, g.param(p + ".gru.w_ih"),
                      g.param(p + ".gru.w_hh"), g.param(p + ".gru.b_ih"),
                      g.param(p + ".gru.b_hh"));
  }
  const int side = g.value(z).shape[2];
  const int planes = g.expand_planes(action, side);
  int x = g.concat_channels(z, planes);
  const int groups = cfg.debug_channels > 0 ? 1 : 4;
  x = detail::conv_gn_relu(g, x, p + ".c0", p + ".g0", groups, 1, 1);
  x = detail::conv_gn_relu(g, x, p + ".c1", p + ".g1", groups, 1, 1);
  return g.conv2d(x, g.param(p + ".c2.w"), g.param(p + ".c2.b"), 1, 1);
}

// Loss-facing view of a predictor state: Two-Rooms applies the member's
// output LayerNorm; PointMaze flattens the map.
inline int prediction_latent(nn::Graph& g, const ModelConfig& cfg, int k,
                             int z) {
  if (cfg.env == EnvKind::kTwoRooms) {
    const std::string p = pred_prefix(k);
    return g.layer_norm(z, g.param(p + ".ln.gamma"), g.param(p + ".ln.beta"));
  }
  const auto& s = g.value(z).shape;
  return g.reshape(z, {s[0], s[1] * s[2] * s[3]});
}

// Loss-facing view of an encoder output (flattens PointMaze maps).
inline int target_latent(nn::Graph& g, const ModelConfig& cfg, int z) {
  if (cfg.env == EnvKind::kTwoRooms) return z;
  const auto& s = g.value(z).shape;
  return g.reshape(z, {s[0], s[1] * s[2] * s[3]});
}

// IDM head: 2-layer perceptron (z_t, z_{t+1}) -> action estimate [N, 2].
inline int idm_head(nn::Graph& g, int zt, int znext) {
  int x = g.concat_cols(zt, znext);
  x = g.relu(g.linear(x, g.param("idm.fc0.w"), g.param("idm.fc0.b")));
  return g.linear(x, g.param("idm.fc1.w"), g.param("idm.fc1.b"));
}

}  // namespace pldm::model
