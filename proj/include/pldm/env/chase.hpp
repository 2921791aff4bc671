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

// Chase task on Two-Rooms: the chaser follows the BFS shortest path on the
// 64x64 pixel grid toward the agent. Within each step the agent moves first,
// then the chaser; success means never getting closer than 1.4.

#pragma once

#include <functional>
#include <queue>
#include <stdexcept>
#include <vector>

#include "pldm/env/two_rooms.hpp"

namespace pldm::env {

constexpr float kChaseSuccessDistance = 1.4f;
constexpr int kChaseEpisodeSteps = 100;

struct ChaseState {
  Position2 agent;
  Position2 chaser;
  float chaser_speed = 0.5f;
};

// One node per pixel cell; true = free. Cell classification uses closed
// wall bounds: a center exactly on a wall face counts as blocked, otherwise
// faces that pass through pixel centers open up one-pixel phantom corridors
// the continuous dynamics cannot actually traverse.
inline std::vector<bool> free_grid(const TwoRoomsGeometry& g) {
  const int n = static_cast<int>(g.arena_size);
  std::vector<bool> free_(static_cast<size_t>(n) * n);
  const auto walls = g.walls();
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const float x = c + 0.5f, y = r + 0.5f;
      bool blocked = false;
      for (const auto& w : walls)
        if (x >= w.x0 && x <= w.x1 && y >= w.y0 && y <= w.y1) {
          blocked = true;
          break;
        }
      free_[static_cast<size_t>(r) * n + c] = !blocked;
    }
  return free_;
}

// Nearest free cell to a continuous position (ring search), or -1.
inline int snap_to_free_cell(const std::vector<bool>& free_, int n, float x,
                             float y) {
  const int c0 = std::clamp(static_cast<int>(x), 0, n - 1);
  const int r0 = std::clamp(static_cast<int>(y), 0, n - 1);
  for (int radius = 0; radius <= 4; ++radius) {
    int best = -1;
    float best_d = 1e30f;
    for (int dr = -radius; dr <= radius; ++dr)
      for (int dc = -radius; dc <= radius; ++dc) {
        if (std::max(std::abs(dr), std::abs(dc)) != radius) continue;
        const int r = r0 + dr, c = c0 + dc;
        if (r < 0 || r >= n || c < 0 || c >= n) continue;
        const int i = r * n + c;
        if (!free_[i]) continue;
        const float d = std::hypot(c + 0.5f - x, r + 0.5f - y);
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
    if (best >= 0) return best;
  }
  return -1;
}

// BFS distance (in cells) from `target` to every free cell; -1 unreachable.
// Neighbor expansion order: up, down, left, right.
inline std::vector<int> bfs_distance_map(const TwoRoomsGeometry& g,
                                         const std::vector<bool>& free_,
                                         const Position2& target) {
  const int n = static_cast<int>(g.arena_size);
  std::vector<int> dist(static_cast<size_t>(n) * n, -1);
  const int start = snap_to_free_cell(free_, n, target.x, target.y);
  if (start < 0) return dist;  // target inside a wall: all unreachable
  std::queue<int> q;
  dist[start] = 0;
  q.push(start);
  while (!q.empty()) {
    const int cur = q.front();
    q.pop();
    const int r = cur / n, c = cur % n;
    const int nb[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
    for (auto& [nr, nc] : nb) {
      if (nr < 0 || nr >= n || nc < 0 || nc >= n) continue;
      const int ni = nr * n + nc;
      if (free_[ni] && dist[ni] < 0) {
        dist[ni] = dist[cur] + 1;
        q.push(ni);
      }
    }
  }
  return dist;
}

// Advance the chaser chaser_speed along the shortest path toward the agent:
// pick the descent neighbor of the chaser's cell on the BFS distance map
// (ties broken up/down/left/right), then move straight toward that
// waypoint's center, stopping at walls like any other motion.
inline Position2 chaser_step(const ChaseState& st, const TwoRoomsGeometry& g,
                             const std::vector<bool>& free_) {
  const int n = static_cast<int>(g.arena_size);
  const float d = distance(st.chaser, st.agent);
  if (d <= st.chaser_speed) return st.agent;  // capture within reach

  const auto dist = bfs_distance_map(g, free_, st.agent);
  const int here = snap_to_free_cell(free_, n, st.chaser.x, st.chaser.y);
  if (here < 0 || dist[here] < 0)
    throw std::runtime_error("chaser_step: agent unreachable");
  const int cr = here / n, cc = here % n;

  Position2 waypoint = st.agent;
  if (dist[here] > 1) {
    const int nb[4][2] = {{cr - 1, cc}, {cr + 1, cc}, {cr, cc - 1}, {cr, cc + 1}};
    int best = dist[here];
    for (auto& [nr, nc] : nb) {
      if (nr < 0 || nr >= n || nc < 0 || nc >= n) continue;
      const int ni = nr * n + nc;
      if (dist[ni] >= 0 && dist[ni] < best) {
        best = dist[ni];
        waypoint = {nc + 0.5f, nr + 0.5f};
      }
    }
  }
  float dx = waypoint.x - st.chaser.x;
  float dy = waypoint.y - st.chaser.y;
  const float wd = std::hypot(dx, dy);
  if (wd < 1e-9f) return st.chaser;
  dx *= st.chaser_speed / wd;
  dy *= st.chaser_speed / wd;
  // reuse the Two-Rooms collision rule, with the chaser's own speed bound
  Position2 next = st.chaser;
  clip_action_norm(dx, dy, st.chaser_speed);
  {
    // two_rooms_step clips to the agent bound; inline the motion here
    Position2 moved = two_rooms_step(next, dx, dy, g);
    next = moved;
  }
  return next;
}

// Places agent and chaser in opposite rooms with start distance >= 10.
inline ChaseState chase_init(Rng& rng, const TwoRoomsGeometry& g,
                             float chaser_speed) {
  for (int i = 0; i < 10000; ++i) {
    ChaseState st;
    st.chaser_speed = chaser_speed;
    st.agent = two_rooms_reset(rng, g);
    st.chaser = two_rooms_reset(rng, g);
    if (room_of(g, st.agent) != room_of(g, st.chaser) &&
        distance(st.agent, st.chaser) >= 10.0f)
      return st;
  }
  throw std::runtime_error("chase_init: rejection cap exceeded");
}

struct ChaseResult {
  bool success = false;
  std::vector<float> distances;  // after each full step
};

// agent_policy(agent, chaser) -> displacement action (chaser position doubles
// as the goal observation for planning agents).
inline ChaseResult chase_episode(
    const std::function<Position2(const Position2&, const Position2&)>&
        agent_policy,
    ChaseState st, const TwoRoomsGeometry& g) {
  const auto free_ = free_grid(g);
  ChaseResult res;
  res.success = true;
  res.distances.reserve(kChaseEpisodeSteps);
  for (int t = 0; t < kChaseEpisodeSteps; ++t) {
    const Position2 a = agent_policy(st.agent, st.chaser);
    st.agent = two_rooms_step(st.agent, a.x, a.y, g);
    st.chaser = chaser_step(st, g, free_);
    const float d = distance(st.agent, st.chaser);
    res.distances.push_back(d);
    if (d < kChaseSuccessDistance) res.success = false;
  }
  return res;
}

}  // namespace pldm::env
