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

// Run configuration: JSON schema with strict unknown-key rejection, presets
// for every published hyperparameter row, and manifest emission (config
// hash, code version, seed) alongside every output artifact.

#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pldm/data/datagen.hpp"
#include "pldm/model/train.hpp"
#include "pldm/nn/checkpoint.hpp"
#include "pldm/plan/mppi.hpp"

namespace pldm::util {

using json = nlohmann::json;

constexpr const char* kCodeVersion = "pldm 0.1.0";

// Exit-code taxonomy: 2 config, 3 data, 4 numeric.
struct CliError : std::runtime_error {
  int exit_code;
  CliError(int code, const std::string& msg)
      : std::runtime_error(msg), exit_code(code) {}
};
struct ConfigError : CliError {
  explicit ConfigError(const std::string& msg) : CliError(2, msg) {}
};
struct DataError : CliError {
  explicit DataError(const std::string& msg) : CliError(3, msg) {}
};
struct NumericError : CliError {
  explicit NumericError(const std::string& msg) : CliError(4, msg) {}
};

namespace detail {

inline void check_keys(const json& j, const std::string& section,
                       const std::vector<std::string>& allowed) {
  if (!j.is_object())
    throw ConfigError("config: section '" + section + "' must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const auto& a : allowed)
      if (k == a) {
        ok = true;
        break;
      }
    if (!ok)
      throw ConfigError("config: unknown key '" + k + "' in section '" +
                        section + "'");
  }
}

template <class T>
void get_to(const json& j, const char* k, T& v, const std::string& section) {
  if (!j.contains(k)) return;
  try {
    j.at(k).get_to(v);
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for key '" + std::string(k) +
                      "' in section '" + section + "'");
  }
}

}  // namespace detail

struct EvalSpec {
  int trials = 50;
  int max_steps = 200;
  float success_radius = -1.0f;  // <0: env default (2.45 / 0.5)
  std::string mode = "goal";     // goal | held_out | dmin_buckets
  std::vector<int> replan_intervals = {1, 4, 16};
  int timing_episodes = 25;
  int chase_episodes = 30;
  float chaser_speed = 0.5f;
};

struct RunConfig {
  std::string env = "two_rooms";  // two_rooms | pointmaze
  uint64_t seed = 0;

  data::TwoRoomsGenConfig two_rooms_data;
  int maze_episodes = 1024;
  int maze_steps = 32;
  int num_layouts = 5;
  int total_transitions = 0;  // > 0: override episodes, truncate the tail

  model::ModelConfig model;
  model::TrainConfig train;
  plan::PlanConfig plan;
  EvalSpec eval;

  json raw;  // canonical parsed form, recorded in manifests
};

inline json preset_config(const std::string& name) {
  // Dataset-specific hyperparameter rows from the published tables; dataset
  // sizes are desk-scale, the optimizer/loss/planner values are verbatim.
  if (name == "two-rooms-seq91") {
    return json{
        {"env", "two_rooms"},
        {"seed", 0},
        {"dataset",
         {{"episodes", 224}, {"steps", 91}, {"vm_fraction", 1.0}}},
        {"model", {{"ensemble", 5}}},
        {"train",
         {{"lr", 0.0007}, {"alpha", 4.0}, {"beta_cov", 6.9}, {"delta", 0.75},
          {"batch_size", 64}, {"horizon", 16}, {"epochs", 10}}},
        {"plan",
         {{"horizon", 16}, {"samples", 500}, {"sigma", 5.0},
          {"lambda", 0.005}, {"beta", 0.0001}, {"gamma", 0.9}}},
    };
  }
  if (name == "two-rooms-size20312") {
    return json{
        {"env", "two_rooms"},
        {"seed", 0},
        {"dataset",
         {{"steps", 91}, {"total_transitions", 20312}, {"vm_fraction", 1.0}}},
        {"model", {{"ensemble", 5}}},
        {"train",
         {{"lr", 0.003}, {"alpha", 2.2}, {"beta_cov", 13.0}, {"delta", 0.5},
          {"batch_size", 64}, {"horizon", 16}, {"epochs", 10}}},
        {"plan",
         {{"horizon", 16}, {"samples", 500}, {"sigma", 5.0},
          {"lambda", 0.005}, {"beta", 0.0001}, {"gamma", 0.9}}},
    };
  }
  if (name == "pointmaze-5layouts") {
    return json{
        {"env", "pointmaze"},
        {"seed", 0},
        {"dataset",
         {{"episodes", 1024}, {"steps", 32}, {"num_layouts", 5}}},
        {"model", {{"ensemble", 1}}},
        {"train",
         {{"lr", 0.04}, {"alpha", 35.0}, {"beta_cov", 12.0}, {"delta", 0.1},
          {"omega", 5.4}, {"batch_size", 128}, {"horizon", 16},
          {"epochs", 5}}},
        {"plan",
         {{"horizon", 16}, {"samples", 500}, {"sigma", 1.0},
          {"lambda", 0.0025}, {"replan_interval", 4}, {"action_bound", 1.0}}},
    };
  }
  throw ConfigError("config: unknown preset '" + name + "'");
}

inline RunConfig parse_config(const json& j) {
  detail::check_keys(j, "(root)",
                     {"env", "seed", "dataset", "model", "train", "plan",
                      "eval"});
  RunConfig c;
  detail::get_to(j, "env", c.env, "(root)");
  if (c.env != "two_rooms" && c.env != "pointmaze")
    throw ConfigError("config: env must be two_rooms or pointmaze, got '" +
                      c.env + "'");
  detail::get_to(j, "seed", c.seed, "(root)");

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    detail::check_keys(d, "dataset",
                       {"episodes", "steps", "vm_fraction", "vm_kappa",
                        "vm_redraw_interval", "forbid_door_crossing",
                        "total_transitions", "num_layouts"});
    auto& tr = c.two_rooms_data;
    detail::get_to(d, "episodes", tr.episodes, "dataset");
    detail::get_to(d, "steps", tr.steps, "dataset");
    detail::get_to(d, "vm_fraction", tr.vm_fraction, "dataset");
    detail::get_to(d, "vm_kappa", tr.vm_kappa, "dataset");
    detail::get_to(d, "vm_redraw_interval", tr.vm_redraw_interval, "dataset");
    detail::get_to(d, "forbid_door_crossing", tr.forbid_door_crossing,
                   "dataset");
    detail::get_to(d, "total_transitions", c.total_transitions, "dataset");
    detail::get_to(d, "episodes", c.maze_episodes, "dataset");
    detail::get_to(d, "steps", c.maze_steps, "dataset");
    detail::get_to(d, "num_layouts", c.num_layouts, "dataset");
  }

  c.model.env = c.env == "pointmaze" ? model::EnvKind::kPointMaze
                                     : model::EnvKind::kTwoRooms;
  if (c.env == "pointmaze") c.model.ensemble = 1;
  if (j.contains("model")) {
    const json& m = j.at("model");
    detail::check_keys(
        m, "model",
        {"ensemble", "gru_hidden", "idm_hidden", "debug_channels",
         "obs_side"});
    detail::get_to(m, "ensemble", c.model.ensemble, "model");
    detail::get_to(m, "gru_hidden", c.model.gru_hidden, "model");
    detail::get_to(m, "idm_hidden", c.model.idm_hidden, "model");
    detail::get_to(m, "debug_channels", c.model.debug_channels, "model");
    detail::get_to(m, "obs_side", c.model.obs_side, "model");
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    detail::check_keys(t, "train",
                       {"batch_size", "horizon", "epochs", "max_steps",
                        "lr", "alpha", "beta_cov", "delta", "omega",
                        "var_margin", "var_eps", "log_every"});
    detail::get_to(t, "batch_size", c.train.batch_size, "train");
    detail::get_to(t, "horizon", c.train.horizon, "train");
    detail::get_to(t, "epochs", c.train.epochs, "train");
    detail::get_to(t, "max_steps", c.train.max_steps, "train");
    detail::get_to(t, "lr", c.train.lr, "train");
    detail::get_to(t, "alpha", c.train.weights.alpha, "train");
    detail::get_to(t, "beta_cov", c.train.weights.beta_cov, "train");
    detail::get_to(t, "delta", c.train.weights.delta, "train");
    detail::get_to(t, "omega", c.train.weights.omega, "train");
    detail::get_to(t, "var_margin", c.train.weights.var_margin, "train");
    detail::get_to(t, "var_eps", c.train.weights.var_eps, "train");
    detail::get_to(t, "log_every", c.train.log_every, "train");
  }

  if (c.env == "pointmaze") {
    c.plan.lambda = 0.0025f;
    c.plan.action_bound = env::kMazeAccelNorm;
    c.plan.sigma = 1.0f;
  }
  if (j.contains("plan")) {
    const json& p = j.at("plan");
    detail::check_keys(p, "plan",
                       {"horizon", "samples", "sigma", "lambda", "iters",
                        "beta", "gamma", "replan_interval", "action_bound"});
    detail::get_to(p, "horizon", c.plan.horizon, "plan");
    detail::get_to(p, "samples", c.plan.samples, "plan");
    detail::get_to(p, "sigma", c.plan.sigma, "plan");
    detail::get_to(p, "lambda", c.plan.lambda, "plan");
    detail::get_to(p, "iters", c.plan.iters, "plan");
    detail::get_to(p, "beta", c.plan.uncertainty_beta, "plan");
    detail::get_to(p, "gamma", c.plan.uncertainty_gamma, "plan");
    detail::get_to(p, "replan_interval", c.plan.replan_interval, "plan");
    detail::get_to(p, "action_bound", c.plan.action_bound, "plan");
  }
  try {
    c.plan.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  if (j.contains("eval")) {
    const json& e = j.at("eval");
    detail::check_keys(e, "eval",
                       {"trials", "max_steps", "success_radius", "mode",
                        "replan_intervals", "timing_episodes",
                        "chase_episodes", "chaser_speed"});
    detail::get_to(e, "trials", c.eval.trials, "eval");
    detail::get_to(e, "max_steps", c.eval.max_steps, "eval");
    detail::get_to(e, "success_radius", c.eval.success_radius, "eval");
    detail::get_to(e, "mode", c.eval.mode, "eval");
    detail::get_to(e, "replan_intervals", c.eval.replan_intervals, "eval");
    detail::get_to(e, "timing_episodes", c.eval.timing_episodes, "eval");
    detail::get_to(e, "chase_episodes", c.eval.chase_episodes, "eval");
    detail::get_to(e, "chaser_speed", c.eval.chaser_speed, "eval");
  }
  if (c.eval.success_radius < 0.0f)
    c.eval.success_radius =
        c.env == "pointmaze" ? 0.5f : env::kTwoRoomsActionNorm;

  if (c.total_transitions > 0) {
    const int steps = c.two_rooms_data.steps;
    c.two_rooms_data.episodes = (c.total_transitions + steps - 1) / steps;
  }

  c.raw = j;
  return c;
}

// `spec` is either "preset:<name>" or a path to a JSON file.
inline RunConfig load_config(const std::string& spec) {
  if (spec.rfind("preset:", 0) == 0)
    return parse_config(preset_config(spec.substr(7)));
  std::ifstream f(spec);
  if (!f) throw ConfigError("config: cannot open " + spec);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: parse error in " + spec + ": " + e.what());
  }
  return parse_config(j);
}

inline std::string config_hash(const json& j) {
  const std::string s = j.dump();  // object keys are sorted -> canonical
  const uint64_t h = nn::fnv1a64(reinterpret_cast<const uint8_t*>(s.data()),
                                 s.size());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

// Written as <out>.manifest.json next to every artifact.
inline void write_manifest(const std::string& out_path,
                           const std::string& command, const RunConfig& cfg,
                           bool deterministic, int workers) {
  json m{
      {"command", command},          {"code_version", kCodeVersion},
      {"config", cfg.raw},           {"config_hash", config_hash(cfg.raw)},
      {"seed", cfg.seed},            {"deterministic", deterministic},
      {"workers", workers},
  };
  const std::string path = out_path + ".manifest.json";
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("manifest: cannot write " + path);
  f << m.dump(2) << "\n";
  if (!f) throw DataError("manifest: write failed for " + path);
}

// Shortens the final episode so the dataset holds exactly `total`
// transitions (the T = 91 sweep points are not multiples of the episode
// length). Episodes shorter than the training horizon are skipped by the
// sampler, so a short tail is safe at any horizon <= its length.
inline void truncate_to_transitions(data::Dataset& ds, int total) {
  int have = 0;
  for (const auto& e : ds.episodes) have += e.T;
  if (have < total)
    throw DataError("dataset: cannot truncate " + std::to_string(have) +
                    " transitions to " + std::to_string(total));
  while (have > total) {
    data::EpisodeData& e = ds.episodes.back();
    const int drop = std::min(have - total, e.T);
    const int keep = e.T - drop;
    if (keep == 0) {
      ds.episodes.pop_back();
    } else {
      const size_t frame = static_cast<size_t>(e.channels) * 64 * 64;
      e.images.resize(static_cast<size_t>(keep + 1) * frame);
      e.actions.resize(static_cast<size_t>(keep) * 2);
      if (e.has_velocity)
        e.velocities.resize(static_cast<size_t>(keep + 1) * 2);
      e.raw_states.resize(static_cast<size_t>(keep + 1) * e.state_dim);
      e.T = keep;
    }
    have -= drop;
  }
}

}  // namespace pldm::util
