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

// Exploration-data generation for both environments.
//
// Two-Rooms mixes two behavior policies:
//  * "vm": a von Mises directed walk (kappa 5) whose mean heading is redrawn
//    every 16 steps and whenever a wall blocks most of a step; the blocked
//    axis component is zeroed (slide) before the step is re-taken. Step
//    magnitude is uniform up to the action-norm bound. Produces long,
//    room-crossing excursions.
//  * "uniform": i.i.d. per-component U(-1.05, 1.05) actions. Produces local
//    dithering that pins down fine-grained dynamics near the start state.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "pldm/core/rng.hpp"
#include "pldm/data/dataset.hpp"
#include "pldm/env/pointmaze.hpp"
#include "pldm/env/two_rooms.hpp"

namespace pldm::data {

struct TwoRoomsGenConfig {
  int episodes = 312;
  int steps = 64;            // transitions per episode
  double vm_fraction = 0.5;  // share of episodes driven by the vm walk
  double vm_kappa = 5.0;
  int vm_redraw_interval = 16;
  bool forbid_door_crossing = false;
  uint64_t seed = 0;
};

struct TwoRoomsGenStats {
  double door_crossing_fraction = 0;  // episodes with >= 1 room change
  double mean_max_dist_vm = 0;        // mean per-episode max pairwise distance
  double mean_max_dist_uniform = 0;
  int vm_episodes = 0;
  int uniform_episodes = 0;
};

namespace detail {

inline double max_pairwise_distance(const std::vector<env::Position2>& pts) {
  double best = 0;
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j)
      best = std::max(best, static_cast<double>(env::distance(pts[i], pts[j])));
  return best;
}

inline void quantize_frame(const float* src, size_t n, std::vector<uint8_t>& dst) {
  for (size_t i = 0; i < n; ++i) dst.push_back(quantize_u8(src[i]));
}

}  // namespace detail

// Generates one Two-Rooms episode into `e`; returns true if any transition
// crossed between rooms. `walls_u8` is the pre-quantized wall channel.
inline bool generate_two_rooms_episode(const TwoRoomsGenConfig& cfg, bool vm,
                                       Rng& rng, const env::TwoRoomsGeometry& g,
                                       const std::vector<uint8_t>& walls_u8,
                                       EpisodeData& e,
                                       std::vector<env::Position2>* traj_out) {
  constexpr int n = kObsSide;
  const double pi = std::numbers::pi;
  e.T = cfg.steps;
  e.channels = 2;
  e.state_dim = 2;
  e.has_velocity = false;
  e.images.clear();
  e.images.reserve(static_cast<size_t>(cfg.steps + 1) * 2 * n * n);
  e.actions.clear();
  e.raw_states.clear();

  env::Position2 pos = env::two_rooms_reset(rng, g);
  std::vector<env::Position2> traj{pos};
  std::vector<float> agent_ch(static_cast<size_t>(n) * n);
  auto record_frame = [&](const env::Position2& p) {
    std::fill(agent_ch.begin(), agent_ch.end(), 0.0f);
    env::two_rooms_render_agent(p, n, agent_ch.data());
    detail::quantize_frame(agent_ch.data(), agent_ch.size(), e.images);
    e.images.insert(e.images.end(), walls_u8.begin(), walls_u8.end());
    e.raw_states.push_back(p.x);
    e.raw_states.push_back(p.y);
  };
  record_frame(pos);

  double mean_heading = rng.uniform(-pi, pi);
  bool crossed = false;
  const int room0 = env::room_of(g, pos);
  for (int t = 0; t < cfg.steps; ++t) {
    if (vm && t > 0 && t % cfg.vm_redraw_interval == 0)
      mean_heading = rng.uniform(-pi, pi);
    float ax = 0, ay = 0;
    env::Position2 next;
    if (vm) {
      const double theta = rng.von_mises(mean_heading, cfg.vm_kappa);
      const double mag = rng.uniform(0.0, env::kTwoRoomsActionNorm);
      ax = static_cast<float>(mag * std::cos(theta));
      ay = static_cast<float>(mag * std::sin(theta));
      env::StepHit hit;
      next = env::two_rooms_step_ex(pos, ax, ay, g, &hit);
      if (hit.hit && hit.t < 0.5f) {
        // slide along the wall and wander off in a fresh direction next step
        (hit.axis == 0 ? ax : ay) = 0.0f;
        next = env::two_rooms_step(pos, ax, ay, g);
        mean_heading = rng.uniform(-pi, pi);
      }
    } else {
      ax = static_cast<float>(rng.uniform(-1.05, 1.05));
      ay = static_cast<float>(rng.uniform(-1.05, 1.05));
      next = env::two_rooms_step(pos, ax, ay, g);
    }
    if (env::room_of(g, next) != room0) crossed = true;
    e.actions.push_back(ax);
    e.actions.push_back(ay);
    pos = next;
    traj.push_back(pos);
    record_frame(pos);
  }
  if (traj_out) *traj_out = std::move(traj);
  return crossed;
}

// True if episode index i falls on the vm side of the mix; spreads vm
// episodes evenly so partial datasets keep the configured ratio.
inline bool vm_episode(int i, double fraction) {
  return std::floor((i + 1) * fraction) - std::floor(i * fraction) >= 1.0;
}

// Calls sink(EpisodeData&&) once per episode, in order. Episodes draw from
// independent rng streams, so regeneration of any prefix is bit-identical.
template <class Sink>
TwoRoomsGenStats generate_two_rooms(const TwoRoomsGenConfig& cfg, Sink&& sink) {
  const env::TwoRoomsGeometry g;
  constexpr int n = kObsSide;
  std::vector<float> wall_ch(static_cast<size_t>(n) * n, 0.0f);
  env::two_rooms_render_walls(g, n, wall_ch.data());
  std::vector<uint8_t> walls_u8;
  walls_u8.reserve(wall_ch.size());
  detail::quantize_frame(wall_ch.data(), wall_ch.size(), walls_u8);

  const Rng root(cfg.seed);
  TwoRoomsGenStats st;
  int crossings = 0;
  for (int i = 0; i < cfg.episodes; ++i) {
    Rng rng = root.stream(static_cast<uint64_t>(i));
    const bool vm = vm_episode(i, cfg.vm_fraction);
    EpisodeData e;
    std::vector<env::Position2> traj;
    bool crossed = false;
    // episode-level constraint: crossing episodes are discarded wholesale
    // and regenerated from the continuing stream
    for (int attempt = 0;; ++attempt) {
      crossed = generate_two_rooms_episode(cfg, vm, rng, g, walls_u8, e, &traj);
      if (!cfg.forbid_door_crossing || !crossed) break;
      if (attempt >= 10000)
        throw std::runtime_error(
            "datagen: stalled regenerating door-free episodes");
    }
    crossings += crossed ? 1 : 0;
    const double md = detail::max_pairwise_distance(traj);
    if (vm) {
      st.mean_max_dist_vm += md;
      st.vm_episodes++;
    } else {
      st.mean_max_dist_uniform += md;
      st.uniform_episodes++;
    }
    sink(std::move(e));
  }
  if (cfg.episodes > 0)
    st.door_crossing_fraction = static_cast<double>(crossings) / cfg.episodes;
  if (st.vm_episodes > 0) st.mean_max_dist_vm /= st.vm_episodes;
  if (st.uniform_episodes > 0) st.mean_max_dist_uniform /= st.uniform_episodes;
  return st;
}

inline Dataset generate_two_rooms_dataset(const TwoRoomsGenConfig& cfg) {
  Dataset ds;
  const TwoRoomsGenStats st =
      generate_two_rooms(cfg, [&ds](EpisodeData&& e) {
        ds.episodes.push_back(std::move(e));
      });
  ds.meta = {
      {"env", "two_rooms"},
      {"episodes", std::to_string(cfg.episodes)},
      {"steps", std::to_string(cfg.steps)},
      {"vm_fraction", std::to_string(cfg.vm_fraction)},
      {"forbid_door_crossing", cfg.forbid_door_crossing ? "1" : "0"},
      {"seed", std::to_string(cfg.seed)},
      {"stat_door_crossing_fraction", std::to_string(st.door_crossing_fraction)},
      {"stat_mean_max_dist_vm", std::to_string(st.mean_max_dist_vm)},
      {"stat_mean_max_dist_uniform", std::to_string(st.mean_max_dist_uniform)},
  };
  return ds;
}

struct PointMazeGenConfig {
  int episodes = 1024;
  int steps = 32;
  std::vector<env::MazeLayout> layouts;
  uint64_t seed = 0;
};

// Actions uniform in the unit accel disk; layouts assigned round-robin.
template <class Sink>
void generate_pointmaze(const PointMazeGenConfig& cfg, Sink&& sink) {
  if (cfg.layouts.empty())
    throw std::runtime_error("datagen: pointmaze needs at least one layout");
  constexpr int n = kObsSide;
  const Rng root(cfg.seed);
  for (int i = 0; i < cfg.episodes; ++i) {
    Rng rng = root.stream(static_cast<uint64_t>(i));
    const env::MazeLayout& l = cfg.layouts[i % cfg.layouts.size()];
    EpisodeData e;
    e.T = cfg.steps;
    e.channels = 3;
    e.state_dim = 4;
    e.has_velocity = true;
    e.images.reserve(static_cast<size_t>(cfg.steps + 1) * 3 * n * n);
    env::PointMazeState s = env::maze_reset(rng, l);
    auto record_frame = [&](const env::PointMazeState& st) {
      const env::PointMazeObservation obs = env::maze_render(l, st);
      detail::quantize_frame(obs.image.data.data(), obs.image.data.size(),
                             e.images);
      e.velocities.push_back(st.vx);
      e.velocities.push_back(st.vy);
      e.raw_states.push_back(st.x);
      e.raw_states.push_back(st.y);
      e.raw_states.push_back(st.vx);
      e.raw_states.push_back(st.vy);
    };
    record_frame(s);
    for (int t = 0; t < cfg.steps; ++t) {
      const double theta = rng.uniform(-std::numbers::pi, std::numbers::pi);
      const double r = std::sqrt(rng.uniform());
      const float ax = static_cast<float>(r * std::cos(theta));
      const float ay = static_cast<float>(r * std::sin(theta));
      e.actions.push_back(ax);
      e.actions.push_back(ay);
      s = env::maze_step(s, ax, ay, l);
      record_frame(s);
    }
    sink(std::move(e));
  }
}

inline Dataset generate_pointmaze_dataset(const PointMazeGenConfig& cfg) {
  Dataset ds;
  generate_pointmaze(cfg, [&ds](EpisodeData&& e) {
    ds.episodes.push_back(std::move(e));
  });
  std::string layouts;
  for (const auto& l : cfg.layouts) {
    if (!layouts.empty()) layouts += ',';
    layouts += l.to_string();
  }
  ds.meta = {
      {"env", "pointmaze"},
      {"episodes", std::to_string(cfg.episodes)},
      {"steps", std::to_string(cfg.steps)},
      {"layouts", layouts},
      {"layout_assignment", "round_robin"},
      {"seed", std::to_string(cfg.seed)},
  };
  return ds;
}

}  // namespace pldm::data
