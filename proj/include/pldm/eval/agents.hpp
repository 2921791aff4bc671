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

// Planner-backed agents gluing the learned world model to the evaluation
// protocols: Two-Rooms goal reaching, PointMaze goal reaching, and the
// sign-inverted chase policy.

#pragma once

#include <functional>
#include <utility>

#include "pldm/env/chase.hpp"
#include "pldm/env/pointmaze.hpp"
#include "pldm/env/two_rooms.hpp"
#include "pldm/eval/protocols.hpp"
#include "pldm/plan/model_dynamics.hpp"

namespace pldm::eval {

// [1, 2, 64, 64] observation batch for a Two-Rooms position.
inline Tensor two_rooms_obs(const env::Position2& p,
                            const env::TwoRoomsGeometry& g) {
  Tensor obs = env::two_rooms_render(p, g);
  obs.shape.insert(obs.shape.begin(), 1);
  return obs;
}

// [1, 3, 64, 64] image plus [1, 2] velocity batch for a maze state.
inline std::pair<Tensor, Tensor> maze_obs(const env::MazeLayout& l,
                                          const env::PointMazeState& st) {
  env::PointMazeObservation o = env::maze_render(l, st);
  Tensor img = std::move(o.image);
  img.shape.insert(img.shape.begin(), 1);
  Tensor vel({1, 2}, {o.vx, o.vy});
  return {std::move(img), std::move(vel)};
}

using PlanObserver = std::function<void(const plan::PlanResult&)>;

// One goal-reaching episode in Two-Rooms under MPC with the learned model.
inline plan::MpcResult run_two_rooms_goal_episode(
    const plan::ModelDynamics& dyn, const env::TwoRoomsGeometry& g,
    const env::Position2& start, const env::Position2& goal,
    float success_radius, const plan::PlanConfig& pcfg, int max_steps,
    Rng& rng, env::Position2* final_pos = nullptr,
    const PlanObserver& on_plan = {}) {
  env::Position2 pos = start;
  const Tensor z_goal = dyn.encode_goal(two_rooms_obs(goal, g));
  const plan::MpcResult res = plan::mpc_episode(
      dyn, [&] { return dyn.encode(two_rooms_obs(pos, g)); }, z_goal,
      [&](const plan::Action& a) {
        pos = env::two_rooms_step(pos, a[0], a[1], g);
      },
      [&] { return env::distance(pos, goal) <= success_radius; }, pcfg,
      max_steps, rng, on_plan);
  if (final_pos) *final_pos = pos;
  return res;
}

// One goal-reaching episode in PointMaze; the goal is rendered at rest.
inline plan::MpcResult run_maze_goal_episode(
    const plan::ModelDynamics& dyn, const MazeTrialSpec& spec,
    const plan::PlanConfig& pcfg, Rng& rng,
    env::PointMazeState* final_state = nullptr,
    const PlanObserver& on_plan = {}) {
  env::PointMazeState st = spec.start;
  env::PointMazeState goal_st;
  goal_st.x = spec.goal_x;
  goal_st.y = spec.goal_y;
  const auto [gimg, gvel] = maze_obs(spec.layout, goal_st);
  const Tensor z_goal = dyn.encode_goal(gimg, &gvel);
  const plan::MpcResult res = plan::mpc_episode(
      dyn,
      [&] {
        const auto [img, vel] = maze_obs(spec.layout, st);
        return dyn.encode(img, &vel);
      },
      z_goal,
      [&](const plan::Action& a) {
        st = env::maze_step(st, a[0], a[1], spec.layout);
      },
      [&] {
        return std::hypot(st.x - spec.goal_x, st.y - spec.goal_y) <=
               spec.success_radius;
      },
      pcfg, spec.max_steps, rng, on_plan);
  if (final_state) *final_state = st;
  return res;
}

// Chase policy: plans in avoid mode with the chaser's rendering as the
// "goal" observation, replanning every replan_interval steps with warm
// starts. Stateful across the episode; construct one per episode.
class ChaseAvoidPolicy {
 public:
  ChaseAvoidPolicy(const plan::ModelDynamics& dyn,
                   const env::TwoRoomsGeometry& g, plan::PlanConfig pcfg,
                   Rng rng, PlanObserver on_plan = {})
      : dyn_(&dyn), geom_(g), pcfg_(std::move(pcfg)), rng_(rng),
        on_plan_(std::move(on_plan)) {
    pcfg_.sign = plan::ObjectiveSign::kAvoid;
  }

  env::Position2 operator()(const env::Position2& agent,
                            const env::Position2& chaser) {
    if (cursor_ >= pcfg_.replan_interval ||
        cursor_ >= static_cast<int>(plan_.size())) {
      const Tensor z0 = dyn_->encode(two_rooms_obs(agent, geom_));
      const Tensor z_away = dyn_->encode_goal(two_rooms_obs(chaser, geom_));
      const plan::PlanResult res = plan::mppi_plan(
          *dyn_, z0, z_away, pcfg_, rng_, have_warm_ ? &warm_ : nullptr);
      if (on_plan_) on_plan_(res);
      plan_ = res.actions;
      cursor_ = 0;
    }
    const plan::Action a = plan_[static_cast<size_t>(cursor_)];
    ++cursor_;
    warm_.assign(plan_.begin() + cursor_, plan_.end());
    warm_.resize(static_cast<size_t>(pcfg_.horizon), plan::Action{0.0f, 0.0f});
    have_warm_ = true;
    return {a[0], a[1]};
  }

 private:
  const plan::ModelDynamics* dyn_;
  env::TwoRoomsGeometry geom_;
  plan::PlanConfig pcfg_;
  Rng rng_;
  PlanObserver on_plan_;
  plan::ActionSeq plan_;
  plan::ActionSeq warm_;
  bool have_warm_ = false;
  int cursor_ = 1 << 30;  // force a plan on the first call
};

}  // namespace pldm::eval
