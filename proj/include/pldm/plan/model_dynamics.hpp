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

// Bridges the trained world model to the planner's Dynamics interface.
// Forward passes reuse the autodiff graph without calling backward.

#pragma once

#include "pldm/model/model.hpp"
#include "pldm/nn/graph.hpp"
#include "pldm/plan/mppi.hpp"

namespace pldm::plan {

class ModelDynamics : public Dynamics {
 public:
  ModelDynamics(const nn::ParamStore& ps, const model::ModelConfig& cfg)
      : ps_(&ps), cfg_(cfg) {}

  int ensemble() const override { return cfg_.ensemble; }

  Tensor step(int k, const Tensor& z, const Tensor& a) const override {
    nn::Graph g(store());
    return g.value(
        model::predict_step(g, cfg_, k, g.input(z), g.input(a)));
  }

  Tensor cost_view(int k, const Tensor& z) const override {
    nn::Graph g(store());
    return g.value(model::prediction_latent(g, cfg_, k, g.input(z)));
  }

  // Rollout start state: encoder output (Two-Rooms: post-LayerNorm vector,
  // PointMaze: latent map). obs [n, C, side, side]; vel [n, 2] or null.
  Tensor encode(const Tensor& obs, const Tensor* vel = nullptr) const {
    nn::Graph g(store());
    const int v = vel ? g.input(*vel) : -1;
    return g.value(model::encode(g, cfg_, g.input(obs), v));
  }

  // Cost-space goal latent: target_latent of the encoder output.
  Tensor encode_goal(const Tensor& obs, const Tensor* vel = nullptr) const {
    nn::Graph g(store());
    const int v = vel ? g.input(*vel) : -1;
    return g.value(
        model::target_latent(g, cfg_, model::encode(g, cfg_, g.input(obs), v)));
  }

  const model::ModelConfig& config() const { return cfg_; }

 private:
  // Graph mutates only gradient state, which forward-only use never touches.
  nn::ParamStore* store() const { return const_cast<nn::ParamStore*>(ps_); }

  const nn::ParamStore* ps_;
  model::ModelConfig cfg_;
};

}  // namespace pldm::plan
