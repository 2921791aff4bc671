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

#pragma once

#include <cmath>

#include "pldm/nn/graph.hpp"

namespace pldm::nn {

struct AdamConfig {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// One Adam update with bias correction over every parameter in the store.
// `step` counts from 1. Gradients are cleared afterwards.
inline void adam_step(ParamStore& ps, float lr, long step,
                      const AdamConfig& cfg = {}) {
  const float bc1 = 1.0f - std::pow(cfg.beta1, static_cast<float>(step));
  const float bc2 = 1.0f - std::pow(cfg.beta2, static_cast<float>(step));
  for (auto& e : ps.entries) {
    float* w = e.value.data.data();
    float* g = e.grad.data.data();
    float* m = e.m.data.data();
    float* v = e.v.data.data();
    const size_t n = e.value.data.size();
    for (size_t i = 0; i < n; ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0f - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0f - cfg.beta2) * g[i] * g[i];
      const float mh = m[i] / bc1;
      const float vh = v[i] / bc2;
      w[i] -= lr * mh / (std::sqrt(vh) + cfg.eps);
      g[i] = 0.0f;
    }
  }
}

// Cosine decay from base_lr to 0 over total_steps (no warmup, no restarts).
inline float cosine_lr(float base_lr, long step, long total_steps) {
  if (total_steps <= 0) return base_lr;
  if (step >= total_steps) return 0.0f;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return static_cast<float>(base_lr * 0.5 * (1.0 + std::cos(t * M_PI)));
}

}  // namespace pldm::nn
