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

// Two-Rooms: a point mass in a 64x64 arena split by a vertical wall with a
// door. Actions are displacement vectors, norm-clipped to 2.45; motion stops
// at the first wall intersection (no momentum, no sliding).

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "pldm/core/rng.hpp"
#include "pldm/core/tensor.hpp"

namespace pldm::env {

constexpr float kTwoRoomsActionNorm = 2.45f;
constexpr float kWallNudge = 1e-4f;

struct Aabb {
  float x0, x1, y0, y1;
  bool contains(float x, float y) const {
    return x > x0 && x < x1 && y > y0 && y < y1;
  }
};

struct TwoRoomsGeometry {
  float arena_size = 64.0f;
  float border = 10.0f;            // thickness of the outer wall band
  float wall_x = 32.0f;            // dividing wall center
  float wall_half_thickness = 1.5f;
  float door_center_y = 32.0f;
  float door_half_height = 8.0f;

  std::vector<Aabb> walls() const {
    const float a = arena_size, b = border;
    const float wx0 = wall_x - wall_half_thickness;
    const float wx1 = wall_x + wall_half_thickness;
    const float d0 = door_center_y - door_half_height;
    const float d1 = door_center_y + door_half_height;
    return {
        {0, b, 0, a},      // left border
        {a - b, a, 0, a},  // right border
        {0, a, 0, b},      // bottom border
        {0, a, a - b, a},  // top border
        {wx0, wx1, 0, d0},  // divider below the door
        {wx0, wx1, d1, a},  // divider above the door
    };
  }
};

struct Position2 {
  float x = 0, y = 0;
};

inline float distance(const Position2& a, const Position2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

inline bool in_wall(const TwoRoomsGeometry& g, float x, float y) {
  if (x < 0 || y < 0 || x >= g.arena_size || y >= g.arena_size) return true;
  for (const auto& w : g.walls())
    if (w.contains(x, y)) return true;
  return false;
}

// 0 = left room, 1 = right room (split at the wall center line).
inline int room_of(const TwoRoomsGeometry& g, const Position2& p) {
  return p.x < g.wall_x ? 0 : 1;
}

inline Position2 two_rooms_reset(Rng& rng, const TwoRoomsGeometry& g,
                                 int max_attempts = 10000) {
  for (int i = 0; i < max_attempts; ++i) {
    Position2 p{static_cast<float>(rng.uniform() * g.arena_size),
                static_cast<float>(rng.uniform() * g.arena_size)};
    if (!in_wall(g, p.x, p.y)) return p;
  }
  throw std::runtime_error("two_rooms_reset: no free space after rejection cap");
}

// First entry parameter t in (0, 1] of segment p -> p+d into box, or -1.
// Slab method; assumes p starts outside the box.
inline float segment_aabb_entry(const Position2& p, float dx, float dy,
                                const Aabb& b, int* hit_axis) {
  float t0 = 0.0f, t1 = 1.0f;
  int axis = -1;
  // x slab
  if (dx == 0.0f) {
    if (p.x <= b.x0 || p.x >= b.x1) return -1.0f;
  } else {
    float ta = (b.x0 - p.x) / dx;
    float tb = (b.x1 - p.x) / dx;
    if (ta > tb) std::swap(ta, tb);
    if (ta > t0) {
      t0 = ta;
      axis = 0;
    }
    t1 = std::min(t1, tb);
    if (t0 > t1) return -1.0f;
  }
  // y slab
  if (dy == 0.0f) {
    if (p.y <= b.y0 || p.y >= b.y1) return -1.0f;
  } else {
    float ta = (b.y0 - p.y) / dy;
    float tb = (b.y1 - p.y) / dy;
    if (ta > tb) std::swap(ta, tb);
    if (ta > t0) {
      t0 = ta;
      axis = 1;
    }
    t1 = std::min(t1, tb);
    if (t0 > t1) return -1.0f;
  }
  if (axis < 0 || t0 <= 0.0f || t0 > 1.0f) return -1.0f;
  if (hit_axis) *hit_axis = axis;
  return t0;
}

inline void clip_action_norm(float& ax, float& ay, float bound) {
  const float n = std::hypot(ax, ay);
  if (n > bound) {
    ax *= bound / n;
    ay *= bound / n;
  }
}

struct StepHit {
  bool hit = false;
  int axis = -1;   // 0 = vertical face blocked x, 1 = horizontal face
  float t = 1.0f;  // fraction of the commanded segment that was achieved
};

inline Position2 two_rooms_step_ex(const Position2& pos, float ax, float ay,
                                   const TwoRoomsGeometry& g, StepHit* hit) {
  clip_action_norm(ax, ay, kTwoRoomsActionNorm);
  if (hit) *hit = StepHit{};
  if (ax == 0.0f && ay == 0.0f) return pos;
  float best_t = 2.0f;
  int best_axis = -1;
  for (const auto& w : g.walls()) {
    int axis;
    const float t = segment_aabb_entry(pos, ax, ay, w, &axis);
    if (t >= 0.0f && t < best_t) {
      best_t = t;
      best_axis = axis;
    }
  }
  // arena edges act like walls too
  {
    const Aabb edges[4] = {{-1, 0, -1, g.arena_size + 1},
                           {g.arena_size, g.arena_size + 1, -1, g.arena_size + 1},
                           {-1, g.arena_size + 1, -1, 0},
                           {-1, g.arena_size + 1, g.arena_size, g.arena_size + 1}};
    for (const auto& w : edges) {
      int axis;
      const float t = segment_aabb_entry(pos, ax, ay, w, &axis);
      if (t >= 0.0f && t < best_t) {
        best_t = t;
        best_axis = axis;
      }
    }
  }
  if (best_t > 1.0f) return {pos.x + ax, pos.y + ay};
  if (hit) *hit = {true, best_axis, best_t};
  Position2 r{pos.x + best_t * ax, pos.y + best_t * ay};
  // nudge off the face that was hit, against the direction of motion
  if (best_axis == 0)
    r.x -= (ax > 0 ? kWallNudge : -kWallNudge);
  else
    r.y -= (ay > 0 ? kWallNudge : -kWallNudge);
  return r;
}

inline Position2 two_rooms_step(const Position2& pos, float ax, float ay,
                                const TwoRoomsGeometry& g) {
  return two_rooms_step_ex(pos, ax, ay, g, nullptr);
}

// Agent blob only, written into `out` (n*n floats, row-major). Truncated
// Gaussian, sigma = 1 cell, cut at 3 sigma, sampled at pixel centers.
inline void two_rooms_render_agent(const Position2& pos, int n, float* out) {
  const float sigma = 1.0f;
  const float cut2 = 9.0f * sigma * sigma;
  const int r0 = std::max(0, static_cast<int>(pos.y - 3.5f));
  const int r1 = std::min(n - 1, static_cast<int>(pos.y + 3.5f));
  const int c0 = std::max(0, static_cast<int>(pos.x - 3.5f));
  const int c1 = std::min(n - 1, static_cast<int>(pos.x + 3.5f));
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const float dx = (c + 0.5f) - pos.x;
      const float dy = (r + 0.5f) - pos.y;
      const float d2 = dx * dx + dy * dy;
      if (d2 > cut2) continue;
      out[static_cast<size_t>(r) * n + c] = std::exp(-d2 / (2.0f * sigma * sigma));
    }
  }
}

// Binary wall channel, written into `out` (n*n floats).
inline void two_rooms_render_walls(const TwoRoomsGeometry& g, int n,
                                   float* out) {
  const auto walls = g.walls();
  float* wall_ch = out;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const float x = c + 0.5f, y = r + 0.5f;
      for (const auto& w : walls)
        if (w.contains(x, y)) {
          wall_ch[static_cast<size_t>(r) * n + c] = 1.0f;
          break;
        }
    }
}

// Observation: [2, 64, 64]; channel 0 agent blob, channel 1 binary walls.
inline Tensor two_rooms_render(const Position2& pos, const TwoRoomsGeometry& g) {
  const int n = static_cast<int>(g.arena_size);
  Tensor obs({2, n, n});
  two_rooms_render_agent(pos, n, obs.data.data());
  two_rooms_render_walls(g, n, obs.data.data() + static_cast<size_t>(n) * n);
  return obs;
}

}  // namespace pldm::env
