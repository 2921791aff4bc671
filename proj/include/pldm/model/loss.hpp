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

// Training objective: L = L_sim + a*L_var + b*L_cov + d*L_time + w*L_idm.
//
// Targets Z_t are live encoder outputs (no stop-gradient); predictions come
// from open-loop rollouts of each ensemble member from z_0. L_var / L_cov /
// L_time are computed on targets, per the appendix formulas.

#pragma once

#include <cmath>
#include <vector>

#include "pldm/model/model.hpp"
#include "pldm/nn/graph.hpp"

namespace pldm::model {

struct LossWeights {
  float alpha = 4.0f;     // variance
  float beta_cov = 6.9f;  // covariance
  float delta = 0.75f;    // temporal smoothness
  float omega = 0.0f;     // inverse dynamics
  float var_margin = 1.0f;
  float var_eps = 1e-4f;
};

// One training batch of N sub-trajectories of H transitions.
struct Batch {
  int n = 0, horizon = 0;
  std::vector<Tensor> obs;      // H+1 of [N, C, 64, 64]
  std::vector<Tensor> vel;      // H+1 of [N, 2] (PointMaze only)
  std::vector<Tensor> actions;  // H of [N, 2]
};

struct LossTerms {
  float total = 0, sim = 0, var = 0, cov = 0, time_sim = 0, idm = 0;
  float latent_std = 0;  // mean per-dimension std of targets (diagnostic)
  int loss_node = -1;
};

namespace detail {

// chained scalar accumulation: returns a (or g.add(a, b) when a >= 0)
inline int acc(nn::Graph& g, int a, int b) { return a < 0 ? b : g.add(a, b); }

inline float mean_column_std(const Tensor& z) {
  const int n = z.shape[0], d = z.shape[1];
  double total = 0.0;
  for (int j = 0; j < d; ++j) {
    double mu = 0.0;
    for (int i = 0; i < n; ++i) mu += z.data[static_cast<size_t>(i) * d + j];
    mu /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
      const double dd = z.data[static_cast<size_t>(i) * d + j] - mu;
      var += dd * dd;
    }
    total += std::sqrt(var / (n - 1));
  }
  return static_cast<float>(total / d);
}

}  // namespace detail

// Builds the full objective into `g`; call g.backward(result.loss_node)
// afterwards for gradients. Term values are snapshot before backward.
inline LossTerms build_total_loss(nn::Graph& g, const ModelConfig& cfg,
                                  const LossWeights& w, const Batch& batch) {
  const int H = batch.horizon;

  // encode every frame; keep both the env-shaped latent and the flat view
  std::vector<int> z_env(H + 1), z_flat(H + 1);
  std::vector<int> action_nodes(H);
  for (int t = 0; t <= H; ++t) {
    const int obs = g.input(batch.obs[t]);
    const int vel = cfg.has_velocity() ? g.input(batch.vel[t]) : -1;
    z_env[t] = encode(g, cfg, obs, vel);
    z_flat[t] = target_latent(g, cfg, z_env[t]);
  }
  for (int t = 0; t < H; ++t) action_nodes[t] = g.input(batch.actions[t]);

  // L_sim: ensemble rollouts vs targets; the t = 0 term is identically 0
  // because z-hat_0 = z_0 by definition.
  int sim = -1;
  for (int k = 0; k < cfg.ensemble; ++k) {
    int state = z_env[0];
    for (int t = 1; t <= H; ++t) {
      state = predict_step(g, cfg, k, state, action_nodes[t - 1]);
      const int zhat = prediction_latent(g, cfg, k, state);
      sim = detail::acc(g, sim, g.mean_rows_sumsq(g.sub(zhat, z_flat[t])));
    }
  }

  // L_var / L_cov on targets, averaged over time
  int var = -1, cov = -1;
  for (int t = 0; t <= H; ++t) {
    var = detail::acc(g, var, g.var_hinge(z_flat[t], w.var_margin, w.var_eps));
    cov = detail::acc(g, cov, g.cov_offdiag(z_flat[t]));
  }
  var = g.scale(var, 1.0f / static_cast<float>(H + 1));
  cov = g.scale(cov, 1.0f / static_cast<float>(H + 1));

  // L_time: sum_t (1/N) sum_b ||Z_t - Z_{t+1}||^2
  int time_sim = -1;
  for (int t = 0; t < H; ++t)
    time_sim = detail::acc(
        g, time_sim, g.mean_rows_sumsq(g.sub(z_flat[t], z_flat[t + 1])));

  // L_idm: sum_t (1/N) sum_b ||a_t - MLP(Z_t, Z_{t+1})||^2
  int idm = -1;
  if (w.omega != 0.0f) {
    for (int t = 0; t < H; ++t) {
      const int pred = idm_head(g, z_flat[t], z_flat[t + 1]);
      idm = detail::acc(g, idm,
                        g.mean_rows_sumsq(g.sub(action_nodes[t], pred)));
    }
  }

  int total = g.add(sim, g.scale(var, w.alpha));
  total = g.add(total, g.scale(cov, w.beta_cov));
  total = g.add(total, g.scale(time_sim, w.delta));
  if (idm >= 0) total = g.add(total, g.scale(idm, w.omega));

  LossTerms out;
  out.loss_node = total;
  out.total = g.value(total).data[0];
  out.sim = g.value(sim).data[0];
  out.var = g.value(var).data[0];
  out.cov = g.value(cov).data[0];
  out.time_sim = g.value(time_sim).data[0];
  out.idm = idm >= 0 ? g.value(idm).data[0] : 0.0f;
  float std_acc = 0.0f;
  for (int t = 0; t <= H; ++t)
    std_acc += detail::mean_column_std(g.value(z_flat[t]));
  out.latent_std = std_acc / static_cast<float>(H + 1);
  return out;
}

}  // namespace pldm::model
