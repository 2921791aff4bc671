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

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pldm/data/dataset.hpp"
#include "pldm/model/loss.hpp"
#include "pldm/model/model.hpp"
#include "pldm/nn/adam.hpp"
#include "pldm/nn/checkpoint.hpp"

namespace pldm::model {

struct TrainConfig {
  int batch_size = 64;
  int horizon = 16;
  int epochs = 10;
  int max_steps = 0;  // > 0: hard cap on optimizer steps across all epochs
  float lr = 7e-4f;
  LossWeights weights;
  uint64_t seed = 0;
  std::string log_path;   // NDJSON per-step log; empty = no log
  std::string ckpt_path;  // checkpoint written at the end; empty = skip
  int log_every = 10;
  std::string dataset_fingerprint;  // recorded in checkpoint metadata
};

struct TrainStats {
  std::vector<double> epoch_sim;    // mean L_sim per epoch
  std::vector<double> epoch_total;  // mean total loss per epoch
  double final_latent_std = 0;      // mean over final epoch
  int steps = 0;
};

namespace detail {

// Uniform sub-trajectory sampler over (episode, offset) pairs; episodes
// shorter than the horizon are excluded.
class SubTrajSampler {
 public:
  SubTrajSampler(const data::Dataset& ds, int horizon) {
    for (size_t i = 0; i < ds.episodes.size(); ++i) {
      const int slots = ds.episodes[i].T - horizon + 1;
      if (slots <= 0) continue;
      episodes_.push_back(static_cast<int>(i));
      cum_.push_back((cum_.empty() ? 0 : cum_.back()) + slots);
    }
    if (cum_.empty())
      throw std::runtime_error("train: no episode is at least horizon long");
  }

  // (episode index, start offset)
  std::pair<int, int> sample(Rng& rng) const {
    const int64_t u = static_cast<int64_t>(rng.uniform_index(cum_.back()));
    size_t lo = 0, hi = cum_.size() - 1;
    while (lo < hi) {
      const size_t mid = (lo + hi) / 2;
      if (u < cum_[mid]) hi = mid; else lo = mid + 1;
    }
    const int64_t base = lo == 0 ? 0 : cum_[lo - 1];
    return {episodes_[lo], static_cast<int>(u - base)};
  }

 private:
  std::vector<int> episodes_;
  std::vector<int64_t> cum_;
};

inline void fill_frame(const data::EpisodeData& e, int t, int channels,
                       float* out) {
  const size_t frame = static_cast<size_t>(channels) * 64 * 64;
  const uint8_t* src = e.images.data() + static_cast<size_t>(t) * frame;
  for (size_t i = 0; i < frame; ++i) out[i] = src[i] * (1.0f / 255.0f);
}

}  // namespace detail

inline Batch make_batch(const data::Dataset& ds, const ModelConfig& cfg,
                        const std::vector<std::pair<int, int>>& picks,
                        int horizon) {
  const int n = static_cast<int>(picks.size());
  const int c = cfg.obs_channels();
  Batch b;
  b.n = n;
  b.horizon = horizon;
  const size_t frame = static_cast<size_t>(c) * 64 * 64;
  for (int t = 0; t <= horizon; ++t) {
    b.obs.emplace_back(std::vector<int>{n, c, 64, 64});
    if (cfg.has_velocity()) b.vel.emplace_back(std::vector<int>{n, 2});
    if (t < horizon) b.actions.emplace_back(std::vector<int>{n, 2});
  }
  for (int i = 0; i < n; ++i) {
    const auto& e = ds.episodes[picks[i].first];
    const int off = picks[i].second;
    for (int t = 0; t <= horizon; ++t) {
      detail::fill_frame(e, off + t, c, b.obs[t].data.data() + i * frame);
      if (cfg.has_velocity()) {
        b.vel[t].data[2 * i] = e.velocities[2 * (off + t)];
        b.vel[t].data[2 * i + 1] = e.velocities[2 * (off + t) + 1];
      }
      if (t < horizon) {
        b.actions[t].data[2 * i] = e.actions[2 * (off + t)];
        b.actions[t].data[2 * i + 1] = e.actions[2 * (off + t) + 1];
      }
    }
  }
  return b;
}

inline std::string checkpoint_meta(const ModelConfig& cfg,
                                   const TrainConfig& tc, int step) {
  std::ostringstream m;
  m << "env=" << env_kind_name(cfg.env) << '\n'
    << "ensemble=" << cfg.ensemble << '\n'
    << "gru_hidden=" << cfg.gru_hidden << '\n'
    << "idm_hidden=" << cfg.idm_hidden << '\n'
    << "debug_channels=" << cfg.debug_channels << '\n'
    << "alpha=" << tc.weights.alpha << '\n'
    << "beta_cov=" << tc.weights.beta_cov << '\n'
    << "delta=" << tc.weights.delta << '\n'
    << "omega=" << tc.weights.omega << '\n'
    << "var_margin=" << tc.weights.var_margin << '\n'
    << "var_eps=" << tc.weights.var_eps << '\n'
    << "horizon=" << tc.horizon << '\n'
    << "step=" << step << '\n'
    << "dataset_fingerprint=" << tc.dataset_fingerprint << '\n';
  return m.str();
}

inline ModelConfig model_config_from_meta(const std::string& meta) {
  ModelConfig cfg;
  std::istringstream in(meta);
  std::string line;
  while (std::getline(in, line)) {
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string k = line.substr(0, eq), v = line.substr(eq + 1);
    if (k == "env") cfg.env = env_kind_from_name(v);
    else if (k == "ensemble") cfg.ensemble = std::stoi(v);
    else if (k == "gru_hidden") cfg.gru_hidden = std::stoi(v);
    else if (k == "idm_hidden") cfg.idm_hidden = std::stoi(v);
    else if (k == "debug_channels") cfg.debug_channels = std::stoi(v);
  }
  return cfg;
}

// Trains in place; `ps` may be empty (fresh init) or pre-initialized.
inline TrainStats train(const data::Dataset& ds, const ModelConfig& cfg,
                        const TrainConfig& tc, nn::ParamStore& ps) {
  if (ps.entries.empty()) init_params(ps, cfg, tc.seed);
  const detail::SubTrajSampler sampler(ds, tc.horizon);

  int64_t transitions = 0;
  for (const auto& e : ds.episodes) transitions += e.T;
  const int steps_per_epoch =
      std::max<int>(1, static_cast<int>(transitions / tc.batch_size));
  int total_steps = steps_per_epoch * tc.epochs;
  if (tc.max_steps > 0) total_steps = std::min(total_steps, tc.max_steps);

  std::ofstream log;
  if (!tc.log_path.empty()) {
    log.open(tc.log_path, std::ios::trunc);
    if (!log) throw std::runtime_error("train: cannot open log: " + tc.log_path);
  }

  Rng rng(tc.seed ^ 0x7261696e'74726eULL);
  TrainStats stats;
  double epoch_sim = 0, epoch_total = 0, epoch_std = 0;
  for (int step = 1; step <= total_steps; ++step) {
    std::vector<std::pair<int, int>> picks(tc.batch_size);
    for (auto& p : picks) p = sampler.sample(rng);
    const Batch batch = make_batch(ds, cfg, picks, tc.horizon);

    nn::Graph g(&ps);
    const LossTerms terms = build_total_loss(g, cfg, tc.weights, batch);
    g.backward(terms.loss_node);
    const float lr = nn::cosine_lr(tc.lr, step, total_steps);
    nn::adam_step(ps, lr, step);

    epoch_sim += terms.sim;
    epoch_total += terms.total;
    epoch_std += terms.latent_std;
    if (log && (step % tc.log_every == 0 || step == total_steps)) {
      log << "{\"step\":" << step << ",\"lr\":" << lr
          << ",\"sim\":" << terms.sim << ",\"var\":" << terms.var
          << ",\"cov\":" << terms.cov << ",\"time_sim\":" << terms.time_sim
          << ",\"idm\":" << terms.idm << ",\"total\":" << terms.total
          << ",\"latent_std\":" << terms.latent_std << "}\n";
    }
    if (step % steps_per_epoch == 0) {
      stats.epoch_sim.push_back(epoch_sim / steps_per_epoch);
      stats.epoch_total.push_back(epoch_total / steps_per_epoch);
      stats.final_latent_std = epoch_std / steps_per_epoch;
      epoch_sim = epoch_total = epoch_std = 0;
    }
  }
  if (const int rem = total_steps % steps_per_epoch; rem != 0) {
    stats.epoch_sim.push_back(epoch_sim / rem);
    stats.epoch_total.push_back(epoch_total / rem);
    stats.final_latent_std = epoch_std / rem;
  }
  stats.steps = total_steps;
  if (!tc.ckpt_path.empty())
    nn::save_checkpoint(tc.ckpt_path, ps,
                        checkpoint_meta(cfg, tc, total_steps));
  return stats;
}

}  // namespace pldm::model
