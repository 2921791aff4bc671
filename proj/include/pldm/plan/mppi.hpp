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

// MPPI planning over latent dynamics (Eqs. 4-7 structure):
//   C_goal        = (1/K) sum_k sum_{t=1..H} ||zhat_t^k - z_goal||   (Eq. 5)
//   C_uncertainty = sum_t gamma^t sum_j Var_k(zhat_t^k[j])           (Eq. 6)
//   a* ~ argmin C_goal + beta C_uncertainty                          (Eq. 7)
// with sign-inverted C_goal in avoid mode (chase task). Dynamics is an
// abstract ensemble stepper so the planner is testable against analytic
// stubs independent of learning.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pldm/core/rng.hpp"
#include "pldm/core/tensor.hpp"

namespace pldm::plan {

// Ensemble latent dynamics. States are batched rows: `step` advances all n
// rows of member k by one action each. `cost_view` maps a rolled state to
// the space costs are computed in (e.g. the member's output LayerNorm for
// the Two-Rooms GRU; flattening for latent maps); default is identity.
// `state_penalty` lets analytic stubs shape C_goal with obstacle costs
// (zero for learned models); it is added inside C_goal per predicted state.
class Dynamics {
 public:
  virtual ~Dynamics() = default;
  virtual int ensemble() const = 0;
  // [n, ...state dims] x [n, 2] -> [n, ...state dims]
  virtual Tensor step(int k, const Tensor& z, const Tensor& a) const = 0;
  virtual Tensor cost_view(int k, const Tensor& z) const { return z; }
  virtual double state_penalty(const float* /*z_row*/, int /*dim*/) const {
    return 0.0;
  }
};

enum class ObjectiveSign { kReach, kAvoid };

struct PlanConfig {
  int horizon = 16;
  int samples = 500;       // sampled perturbations per iteration
  float sigma = 5.0f;      // per-coordinate Gaussian noise std
  float lambda = 0.005f;   // exponential weighting temperature
  int iters = 3;           // refinement iterations
  float uncertainty_beta = 0.0001f;
  float uncertainty_gamma = 0.9f;
  int replan_interval = 1;
  ObjectiveSign sign = ObjectiveSign::kReach;
  float action_bound = 2.45f;  // max action norm; candidates clipped to it

  void validate() const {
    if (horizon < 1) throw std::invalid_argument("plan: horizon must be >= 1");
    if (samples < 1) throw std::invalid_argument("plan: samples must be >= 1");
    if (replan_interval < 1)
      throw std::invalid_argument("plan: replan_interval must be >= 1");
    if (!(uncertainty_gamma >= 0.0f && uncertainty_gamma <= 1.0f))
      throw std::invalid_argument("plan: gamma must be in [0, 1]");
    if (uncertainty_beta < 0.0f)
      throw std::invalid_argument("plan: beta must be >= 0");
  }
};

using Action = std::array<float, 2>;
using ActionSeq = std::vector<Action>;

struct PlanResult {
  ActionSeq actions;
  double cost_goal = 0.0;
  double cost_uncertainty = 0.0;
  double total_cost = 0.0;
  std::vector<double> best_cost_trace;  // per-iteration best candidate cost
};

inline void clip_action(Action& a, float bound) {
  const float n = std::hypot(a[0], a[1]);
  if (n > bound) {
    const float s = bound / n;
    a[0] *= s;
    a[1] *= s;
  }
}

namespace detail {

// Rolls every candidate through all ensemble members at once and accumulates
// per-candidate goal and uncertainty costs. candidates: [n][H] actions.
// z_goal: cost-view goal latent, one row.
struct CostBatch {
  std::vector<double> goal;
  std::vector<double> unc;
};

inline CostBatch evaluate_candidates(const Dynamics& dyn, const Tensor& z0,
                                     const Tensor& z_goal,
                                     const std::vector<ActionSeq>& candidates,
                                     const PlanConfig& cfg) {
  const int n = static_cast<int>(candidates.size());
  const int k_members = dyn.ensemble();
  const int h = cfg.horizon;

  // replicate z0 across candidates, one state tensor per member
  std::vector<int> zshape = z0.shape;
  zshape[0] = n;
  const int64_t row = z0.numel();
  std::vector<Tensor> z(static_cast<size_t>(k_members), Tensor(zshape));
  for (auto& zk : z)
    for (int i = 0; i < n; ++i)
      std::copy(z0.data.begin(), z0.data.end(), zk.data.begin() + i * row);

  const int64_t goal_dim = z_goal.numel();
  CostBatch costs;
  costs.goal.assign(n, 0.0);
  costs.unc.assign(n, 0.0);
  std::vector<double> mean(static_cast<size_t>(goal_dim));
  std::vector<double> sq(static_cast<size_t>(goal_dim));

  double discount = 1.0;
  Tensor a({n, 2});
  for (int t = 0; t < h; ++t) {
    for (int i = 0; i < n; ++i) {
      a.data[2 * i] = candidates[i][t][0];
      a.data[2 * i + 1] = candidates[i][t][1];
    }
    std::vector<Tensor> views;
    views.reserve(static_cast<size_t>(k_members));
    for (int k = 0; k < k_members; ++k) {
      z[k] = dyn.step(k, z[k], a);
      views.push_back(dyn.cost_view(k, z[k]));
      if (views.back().numel() != n * goal_dim)
        throw std::runtime_error("plan: cost_view/goal latent size mismatch");
    }
    for (int i = 0; i < n; ++i) {
      // goal distance averaged over members, plus stub obstacle shaping
      double gsum = 0.0;
      for (int k = 0; k < k_members; ++k) {
        const float* v = views[k].ptr() + i * goal_dim;
        double d2 = 0.0;
        for (int64_t j = 0; j < goal_dim; ++j) {
          const double d = static_cast<double>(v[j]) - z_goal.data[j];
          d2 += d * d;
        }
        gsum += std::sqrt(d2);
        gsum += dyn.state_penalty(v, static_cast<int>(goal_dim));
      }
      costs.goal[i] += gsum / k_members;
      // per-coordinate population variance across members
      if (k_members >= 2) {
        std::fill(mean.begin(), mean.end(), 0.0);
        std::fill(sq.begin(), sq.end(), 0.0);
        for (int k = 0; k < k_members; ++k) {
          const float* v = views[k].ptr() + i * goal_dim;
          for (int64_t j = 0; j < goal_dim; ++j) {
            mean[j] += v[j];
            sq[j] += static_cast<double>(v[j]) * v[j];
          }
        }
        double var_sum = 0.0;
        for (int64_t j = 0; j < goal_dim; ++j) {
          const double m = mean[j] / k_members;
          var_sum += std::max(0.0, sq[j] / k_members - m * m);
        }
        costs.unc[i] += discount * var_sum;
      }
    }
    discount *= cfg.uncertainty_gamma;
  }
  return costs;
}

inline double total_cost(double goal, double unc, const PlanConfig& cfg) {
  const double sign = cfg.sign == ObjectiveSign::kAvoid ? -1.0 : 1.0;
  return sign * goal + static_cast<double>(cfg.uncertainty_beta) * unc;
}

}  // namespace detail

// Eq. 5: mean over members of summed unsquared latent distances to the goal
// over the H predicted steps. Exposed separately for oracle tests.
inline double cost_goal(const Dynamics& dyn, const Tensor& z0,
                        const Tensor& z_goal, const ActionSeq& actions,
                        const PlanConfig& cfg_in) {
  PlanConfig cfg = cfg_in;
  cfg.horizon = static_cast<int>(actions.size());
  return detail::evaluate_candidates(dyn, z0, z_goal, {actions}, cfg).goal[0];
}

// Eq. 6: discounted per-coordinate population variance across the ensemble.
// Returns 0 when K = 1 (no disagreement signal; callers may warn).
inline double cost_uncertainty(const Dynamics& dyn, const Tensor& z0,
                               const ActionSeq& actions, float gamma) {
  PlanConfig cfg;
  cfg.horizon = static_cast<int>(actions.size());
  cfg.uncertainty_gamma = gamma;
  Tensor z_goal(z0.shape, z0.data);  // unused by the variance term
  return detail::evaluate_candidates(dyn, z0, z_goal, {actions}, cfg).unc[0];
}

// One MPPI plan from latent z0 toward cost-view goal latent z_goal.
// `warm_start`, if non-null, seeds the mean sequence (padded/truncated to H);
// otherwise the mean starts at zero. The incumbent mean and the best
// sequence found so far are appended to every candidate set (elitism), which
// makes the best-cost trace non-increasing under deterministic dynamics.
inline PlanResult mppi_plan(const Dynamics& dyn, const Tensor& z0,
                            const Tensor& z_goal, const PlanConfig& cfg,
                            Rng& rng, const ActionSeq* warm_start = nullptr) {
  cfg.validate();
  const int h = cfg.horizon;
  ActionSeq mean(static_cast<size_t>(h), Action{0.0f, 0.0f});
  if (warm_start)
    for (int t = 0; t < h && t < static_cast<int>(warm_start->size()); ++t) {
      mean[t] = (*warm_start)[t];
      clip_action(mean[t], cfg.action_bound);
    }

  PlanResult res;
  ActionSeq best = mean;
  bool have_best = false;
  double best_cost = 0.0;

  for (int iter = 0; iter < cfg.iters; ++iter) {
    std::vector<ActionSeq> cands;
    cands.reserve(static_cast<size_t>(cfg.samples) + 2);
    for (int s = 0; s < cfg.samples; ++s) {
      ActionSeq c(static_cast<size_t>(h));
      for (int t = 0; t < h; ++t) {
        c[t][0] = mean[t][0] + cfg.sigma * static_cast<float>(rng.normal());
        c[t][1] = mean[t][1] + cfg.sigma * static_cast<float>(rng.normal());
        clip_action(c[t], cfg.action_bound);
      }
      cands.push_back(std::move(c));
    }
    cands.push_back(mean);                 // incumbent
    if (have_best) cands.push_back(best);  // elitism

    const auto costs = detail::evaluate_candidates(dyn, z0, z_goal, cands, cfg);
    const int n = static_cast<int>(cands.size());
    std::vector<double> total(static_cast<size_t>(n));
    double lo = 0.0;
    for (int i = 0; i < n; ++i) {
      total[i] = detail::total_cost(costs.goal[i], costs.unc[i], cfg);
      if (!std::isfinite(total[i]))
        throw std::runtime_error("plan: non-finite cost at candidate " +
                                 std::to_string(i));
      if (i == 0 || total[i] < lo) lo = total[i];
    }
    for (int i = 0; i < n; ++i) {
      if (!have_best || total[i] < best_cost) {
        best_cost = total[i];
        best = cands[static_cast<size_t>(i)];
        have_best = true;
      }
    }
    res.best_cost_trace.push_back(best_cost);

    // exponentially weighted mean update; subtracting the min cost makes
    // the weights invariant to constant cost offsets
    double wsum = 0.0;
    ActionSeq next(static_cast<size_t>(h), Action{0.0f, 0.0f});
    for (int i = 0; i < n; ++i) {
      const double w = std::exp(-(total[i] - lo) / cfg.lambda);
      wsum += w;
      for (int t = 0; t < h; ++t) {
        next[t][0] += static_cast<float>(w * cands[i][t][0]);
        next[t][1] += static_cast<float>(w * cands[i][t][1]);
      }
    }
    for (int t = 0; t < h; ++t) {
      next[t][0] = static_cast<float>(next[t][0] / wsum);
      next[t][1] = static_cast<float>(next[t][1] / wsum);
    }
    mean = std::move(next);
  }

  const auto fin = detail::evaluate_candidates(dyn, z0, z_goal, {mean}, cfg);
  res.actions = mean;
  res.cost_goal = fin.goal[0];
  res.cost_uncertainty = fin.unc[0];
  res.total_cost = detail::total_cost(fin.goal[0], fin.unc[0], cfg);
  return res;
}

struct MpcResult {
  bool success = false;
  int steps = 0;           // env steps actually executed
  int plan_calls = 0;
  ActionSeq executed;
};

// MPC loop: plan, execute replan_interval actions, warm-start the next plan
// by shifting the previous mean left and padding with zeros. `encode` maps
// the current environment state to the predictor's latent state; `apply`
// executes one action in the environment; `done` reports goal attainment
// (checked after every executed action).
template <class EncodeFn, class ApplyFn, class DoneFn>
MpcResult mpc_episode(const Dynamics& dyn, EncodeFn&& encode,
                      const Tensor& z_goal, ApplyFn&& apply, DoneFn&& done,
                      const PlanConfig& cfg, int max_steps, Rng& rng,
                      const std::function<void(const PlanResult&)>& on_plan =
                          {}) {
  if (max_steps < 1) throw std::invalid_argument("plan: max_steps must be >= 1");
  MpcResult r;
  if (done()) {
    r.success = true;
    return r;
  }
  ActionSeq warm;
  bool have_warm = false;
  while (r.steps < max_steps) {
    const Tensor z0 = encode();
    ++r.plan_calls;
    PlanResult plan =
        mppi_plan(dyn, z0, z_goal, cfg, rng, have_warm ? &warm : nullptr);
    if (on_plan) on_plan(plan);
    const int todo =
        std::min({cfg.replan_interval, cfg.horizon, max_steps - r.steps});
    for (int t = 0; t < todo; ++t) {
      apply(plan.actions[static_cast<size_t>(t)]);
      r.executed.push_back(plan.actions[static_cast<size_t>(t)]);
      ++r.steps;
      if (done()) {
        r.success = true;
        return r;
      }
    }
    warm.assign(plan.actions.begin() + todo, plan.actions.end());
    warm.resize(static_cast<size_t>(cfg.horizon), Action{0.0f, 0.0f});
    have_warm = true;
  }
  return r;
}

}  // namespace pldm::plan
