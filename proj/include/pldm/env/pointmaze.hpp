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

// Diverse PointMaze: momentum point mass in procedurally generated 4x4
// mazes (6x6 including the implicit outer wall). Semi-implicit Euler,
// dt = 0.1, action repeat 4, sliding wall contact.

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pldm/core/rng.hpp"
#include "pldm/core/tensor.hpp"

namespace pldm::env {

constexpr float kMazeDt = 0.1f;
constexpr int kMazeActionRepeat = 4;
constexpr float kMazeVelClip = 5.0f;
constexpr float kMazeAccelNorm = 1.0f;
constexpr float kMazeNudge = 1e-4f;
constexpr int kMazeGrid = 4;       // interior cells per side
constexpr float kMazeExtent = 6.0f;  // including outer wall

// 4x4 interior occupancy, bit i = row-major cell i, 1 = wall.
struct MazeLayout {
  uint16_t bits = 0;

  bool wall(int row, int col) const {
    return (bits >> (row * kMazeGrid + col)) & 1;
  }
  void set_wall(int row, int col, bool v) {
    const uint16_t m = static_cast<uint16_t>(1u << (row * kMazeGrid + col));
    bits = v ? (bits | m) : (bits & ~m);
  }
  int wall_count() const { return std::popcount(bits); }
  int free_count() const { return 16 - wall_count(); }

  std::string to_string() const {
    std::string s(16, '0');
    for (int i = 0; i < 16; ++i)
      if ((bits >> i) & 1) s[i] = '1';
    return s;
  }
  static MazeLayout from_string(const std::string& s) {
    if (s.size() != 16) throw std::runtime_error("MazeLayout: want 16 chars");
    MazeLayout l;
    for (int i = 0; i < 16; ++i) {
      if (s[i] == '1')
        l.bits |= static_cast<uint16_t>(1u << i);
      else if (s[i] != '0')
        throw std::runtime_error("MazeLayout: want only 0/1 characters");
    }
    return l;
  }
  bool operator==(const MazeLayout&) const = default;
};

inline int edit_distance(const MazeLayout& a, const MazeLayout& b) {
  return std::popcount(static_cast<uint16_t>(a.bits ^ b.bits));
}

inline int d_min(const MazeLayout& test, const std::vector<MazeLayout>& train) {
  if (train.empty()) throw std::runtime_error("d_min: empty train set");
  int best = 17;
  for (const auto& l : train) best = std::min(best, edit_distance(test, l));
  return best;
}

inline bool maze_connected(const MazeLayout& l) {
  int start = -1;
  for (int i = 0; i < 16 && start < 0; ++i)
    if (!((l.bits >> i) & 1)) start = i;
  if (start < 0) return false;
  std::array<bool, 16> seen{};
  std::vector<int> stack{start};
  seen[start] = true;
  int count = 0;
  while (!stack.empty()) {
    const int c = stack.back();
    stack.pop_back();
    ++count;
    const int r = c / 4, q = c % 4;
    const int nb[4][2] = {{r - 1, q}, {r + 1, q}, {r, q - 1}, {r, q + 1}};
    for (auto& [nr, nq] : nb) {
      if (nr < 0 || nr >= 4 || nq < 0 || nq >= 4) continue;
      const int ni = nr * 4 + nq;
      if (!seen[ni] && !((l.bits >> ni) & 1)) {
        seen[ni] = true;
        stack.push_back(ni);
      }
    }
  }
  return count == l.free_count();
}

inline bool maze_valid(const MazeLayout& l) {
  const int free = l.free_count();
  if (free < 8 || free > 12) return false;  // 50%..75% of 16
  return maze_connected(l);
}

// Rejection sampling: uniform wall count in the feasible range, then a
// uniform cell subset; retry on constraint violation.
inline MazeLayout generate_layout(Rng& rng) {
  for (;;) {
    const int walls = 4 + static_cast<int>(rng.uniform() * 5.0);  // 4..8
    std::array<int, 16> idx;
    for (int i = 0; i < 16; ++i) idx[i] = i;
    for (int i = 0; i < walls; ++i) {
      const int j = i + static_cast<int>(rng.uniform() * (16 - i));
      std::swap(idx[i], idx[j]);
    }
    MazeLayout l;
    for (int i = 0; i < walls; ++i)
      l.bits |= static_cast<uint16_t>(1u << idx[i]);
    if (maze_valid(l)) return l;
  }
}

struct PointMazeState {
  float x = 0, y = 0, vx = 0, vy = 0;
};

// Point-in-wall test in maze coordinates [0, 6)^2; the outer 1-cell band is
// wall, interior cell (row, col) covers [col+1, col+2) x [row+1, row+2).
inline bool maze_in_wall(const MazeLayout& l, float x, float y) {
  if (x < 1.0f || y < 1.0f || x >= 5.0f || y >= 5.0f) return true;
  const int col = static_cast<int>(x - 1.0f);
  const int row = static_cast<int>(y - 1.0f);
  return l.wall(row, col);
}

inline PointMazeState maze_reset(Rng& rng, const MazeLayout& l,
                                 bool random_velocity = true,
                                 int max_attempts = 10000) {
  PointMazeState s;
  for (int i = 0; i < max_attempts; ++i) {
    s.x = 1.0f + static_cast<float>(rng.uniform() * 4.0);
    s.y = 1.0f + static_cast<float>(rng.uniform() * 4.0);
    if (!maze_in_wall(l, s.x, s.y)) {
      if (random_velocity) {
        // uniform in the disk of radius 5
        for (;;) {
          const float vx = static_cast<float>(rng.uniform() * 10.0 - 5.0);
          const float vy = static_cast<float>(rng.uniform() * 10.0 - 5.0);
          if (vx * vx + vy * vy <= 25.0f) {
            s.vx = vx;
            s.vy = vy;
            break;
          }
        }
      }
      return s;
    }
  }
  throw std::runtime_error("maze_reset: no free space after rejection cap");
}

namespace detail {

// Axis-separated sliding contact; sub-step displacement (< 0.5 cells) can
// cross at most one cell boundary per axis.
inline void maze_move_axis(const MazeLayout& l, float& x, float y, float dx,
                           float& vx, bool axis_is_x) {
  float nx = x + dx;
  const bool hit = axis_is_x ? maze_in_wall(l, nx, y) : maze_in_wall(l, y, nx);
  if (!hit) {
    x = nx;
    return;
  }
  // place on the crossed cell face
  const float face = dx > 0 ? std::ceil(x) : std::floor(x);
  x = face + (dx > 0 ? -kMazeNudge : kMazeNudge);
  vx = 0.0f;
}

}  // namespace detail

inline PointMazeState maze_step(const PointMazeState& st, float ax, float ay,
                                const MazeLayout& l) {
  float n = std::hypot(ax, ay);
  if (n > kMazeAccelNorm) {
    ax /= n;
    ay /= n;
  }
  PointMazeState s = st;
  for (int sub = 0; sub < kMazeActionRepeat; ++sub) {
    s.vx = std::clamp(s.vx + ax * kMazeDt, -kMazeVelClip, kMazeVelClip);
    s.vy = std::clamp(s.vy + ay * kMazeDt, -kMazeVelClip, kMazeVelClip);
    detail::maze_move_axis(l, s.x, s.y, s.vx * kMazeDt, s.vx, true);
    detail::maze_move_axis(l, s.y, s.x, s.vy * kMazeDt, s.vy, false);
  }
  return s;
}

struct PointMazeObservation {
  Tensor image;  // [3, 64, 64]
  float vx = 0, vy = 0;
};

// Top-down RGB render, nearest-neighbor over the 6x6 extent. Walls gray,
// free space black, agent a red Gaussian blob.
inline PointMazeObservation maze_render(const MazeLayout& l,
                                        const PointMazeState& st) {
  constexpr int n = 64;
  const float scale = kMazeExtent / n;  // maze units per pixel
  PointMazeObservation obs;
  obs.image = Tensor({3, n, n});
  obs.vx = st.vx;
  obs.vy = st.vy;
  float* red = obs.image.data.data();
  float* green = red + n * n;
  float* blue = green + n * n;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const float x = (c + 0.5f) * scale;
      const float y = (r + 0.5f) * scale;
      if (maze_in_wall(l, x, y)) {
        const size_t q = static_cast<size_t>(r) * n + c;
        red[q] = green[q] = blue[q] = 0.5f;
      }
    }
  // agent blob: sigma = 1 pixel, truncated at 3 sigma
  const float px = st.x / scale;
  const float py = st.y / scale;
  const int r0 = std::max(0, static_cast<int>(py - 3.5f));
  const int r1 = std::min(n - 1, static_cast<int>(py + 3.5f));
  const int c0 = std::max(0, static_cast<int>(px - 3.5f));
  const int c1 = std::min(n - 1, static_cast<int>(px + 3.5f));
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) {
      const float dx = (c + 0.5f) - px;
      const float dy = (r + 0.5f) - py;
      const float d2 = dx * dx + dy * dy;
      if (d2 > 9.0f) continue;
      const size_t q = static_cast<size_t>(r) * n + c;
      red[q] = std::max(red[q], std::exp(-d2 / 2.0f));
    }
  return obs;
}

}  // namespace pldm::env
