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

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "gradcheck.hpp"
#include "pldm/data/datagen.hpp"
#include "pldm/model/loss.hpp"
#include "pldm/model/model.hpp"
#include "pldm/model/train.hpp"

using namespace pldm;
using namespace pldm::model;

namespace {

Tensor random_tensor(Rng& rng, std::vector<int> shape, double scale) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(-scale, scale));
  return t;
}

Batch random_batch(Rng& rng, const ModelConfig& cfg, int n, int horizon) {
  Batch b;
  b.n = n;
  b.horizon = horizon;
  for (int t = 0; t <= horizon; ++t) {
    b.obs.push_back(random_tensor(
        rng, {n, cfg.obs_channels(), cfg.obs_side, cfg.obs_side}, 0.5));
    if (cfg.has_velocity()) b.vel.push_back(random_tensor(rng, {n, 2}, 1.0));
    if (t < horizon) b.actions.push_back(random_tensor(rng, {n, 2}, 1.0));
  }
  return b;
}

}  // namespace

TEST_CASE("pointmaze parameter counts match the reference listing") {
  ModelConfig cfg;
  cfg.env = EnvKind::kPointMaze;
  cfg.ensemble = 1;
  nn::ParamStore ps;
  init_params(ps, cfg, 0);
  REQUIRE(ps.num_params_with_prefix("enc.") == 33296);
  REQUIRE(ps.num_params_with_prefix("pred0.") == 20370);
}

TEST_CASE("two-rooms predictor matches the listing count and GRU width") {
  ModelConfig cfg;
  cfg.env = EnvKind::kTwoRooms;
  cfg.ensemble = 5;
  nn::ParamStore ps;
  init_params(ps, cfg, 0);
  for (int k = 0; k < 5; ++k)
    REQUIRE(ps.num_params_with_prefix(pred_prefix(k) + ".") == 793600);
  const auto& whh = ps.at("pred0.gru.w_hh").value;
  REQUIRE(whh.shape == std::vector<int>{3 * 512, 512});
  REQUIRE(ps.at("enc.ln.gamma").value.shape == std::vector<int>{512});
}

TEST_CASE("pointmaze velocity becomes constant leading planes") {
  ModelConfig cfg;
  cfg.env = EnvKind::kPointMaze;
  cfg.ensemble = 1;
  nn::ParamStore ps;
  init_params(ps, cfg, 3);
  Rng rng(4);
  nn::Graph g(&ps);
  const int obs = g.input(random_tensor(rng, {1, 3, 64, 64}, 0.5));
  Tensor vel({1, 2});
  vel.data = {3.0f, -2.0f};
  const int z = encode(g, cfg, obs, g.input(vel));
  REQUIRE(g.value(z).shape == std::vector<int>{1, 18, 26, 26});
  const auto& d = g.value(z).data;
  for (int i = 0; i < 26 * 26; ++i) {
    REQUIRE(d[i] == 3.0f);
    REQUIRE(d[26 * 26 + i] == -2.0f);
  }
}

TEST_CASE("encode is deterministic and distinct members predict differently") {
  ModelConfig cfg;
  cfg.env = EnvKind::kTwoRooms;
  cfg.ensemble = 2;
  cfg.gru_hidden = 16;
  nn::ParamStore ps;
  init_params(ps, cfg, 5);
  Rng rng(6);
  const Tensor obs_t = random_tensor(rng, {2, 2, 64, 64}, 0.5);
  const Tensor act_t = random_tensor(rng, {2, 2}, 1.0);
  nn::Graph g(&ps);
  const int z1 = encode(g, cfg, g.input(obs_t), -1);
  const int z2 = encode(g, cfg, g.input(obs_t), -1);
  REQUIRE(g.value(z1).data == g.value(z2).data);
  const int a = g.input(act_t);
  const int p0 = predict_step(g, cfg, 0, z1, a);
  const int p1 = predict_step(g, cfg, 1, z1, a);
  double gap = 0;
  for (size_t i = 0; i < g.value(p0).data.size(); ++i)
    gap += std::fabs(g.value(p0).data[i] - g.value(p1).data[i]);
  REQUIRE(gap > 0.0);
}

TEST_CASE("total loss equals sim with all extra weights zero") {
  ModelConfig cfg;
  cfg.env = EnvKind::kTwoRooms;
  cfg.ensemble = 1;
  cfg.gru_hidden = 8;
  nn::ParamStore ps;
  init_params(ps, cfg, 7);
  Rng rng(8);
  const Batch b = random_batch(rng, cfg, 4, 2);
  LossWeights w;
  w.alpha = w.beta_cov = w.delta = w.omega = 0.0f;
  nn::Graph g(&ps);
  const LossTerms t = build_total_loss(g, cfg, w, b);
  REQUIRE(t.total == Catch::Approx(t.sim).margin(1e-6));
  REQUIRE(t.sim >= 0.0f);
  REQUIRE(t.var >= 0.0f);
  REQUIRE(t.cov >= 0.0f);
  REQUIRE(t.time_sim >= 0.0f);
}

TEST_CASE("total loss is permutation invariant over the batch") {
  ModelConfig cfg;
  cfg.env = EnvKind::kTwoRooms;
  cfg.ensemble = 2;
  cfg.gru_hidden = 8;
  nn::ParamStore ps;
  init_params(ps, cfg, 9);
  Rng rng(10);
  Batch b = random_batch(rng, cfg, 3, 2);
  LossWeights w;
  w.omega = 0.5f;
  nn::Graph g1(&ps);
  const float before = build_total_loss(g1, cfg, w, b).total;
  // rotate the batch rows in every tensor
  auto rotate = [](Tensor& t) {
    const size_t row = t.data.size() / t.shape[0];
    std::vector<float> first(t.data.begin(), t.data.begin() + row);
    std::copy(t.data.begin() + row, t.data.end(), t.data.begin());
    std::copy(first.begin(), first.end(), t.data.end() - row);
  };
  for (auto& t : b.obs) rotate(t);
  for (auto& t : b.actions) rotate(t);
  nn::Graph g2(&ps);
  const float after = build_total_loss(g2, cfg, w, b).total;
  REQUIRE(after == Catch::Approx(before).epsilon(1e-4));
}

TEST_CASE("composed two-rooms loss passes the finite-difference oracle") {
  ModelConfig cfg;
  cfg.env = EnvKind::kTwoRooms;
  cfg.ensemble = 2;
  cfg.gru_hidden = 8;  // D = 8
  cfg.idm_hidden = 8;
  cfg.debug_channels = 2;
  cfg.obs_side = 33;  // conv trunk 33 -> 15 -> 7 -> 3 -> 1
  nn::ParamStore ps;
  init_params(ps, cfg, 11);
  Rng rng(12);
  const Batch b = random_batch(rng, cfg, 4, 2);  // N = 4, H = 2
  LossWeights w;
  w.alpha = 4.0f;
  w.beta_cov = 6.9f;
  w.delta = 0.75f;
  w.omega = 0.5f;
  // The loss is scaled to O(1) so float32 rounding of the loss value stays
  // well below the finite-difference step.
  const auto r = pldm::testing::grad_check_probes(
      ps,
      [&](nn::Graph& g) {
        return g.scale(build_total_loss(g, cfg, w, b).loss_node, 1.0f / 32.0f);
      },
      5);
  CAPTURE(r.worst, r.worst_side, r.worst_dense, r.checked, r.kink_adjacent,
          r.kink_dense);
  REQUIRE(r.max_rel_err < 1e-3);
  REQUIRE(r.max_side_rel_err < 0.05);
  // dense-kink components (no locally valid oracle): window-average slope
  // must still agree coarsely, and they must stay a small minority
  REQUIRE(r.max_dense_rel_err < 0.5);
  REQUIRE(r.kink_dense * 5 <= r.checked);
  REQUIRE((r.kink_adjacent + r.kink_dense) * 2 < r.checked);
}

TEST_CASE("composed pointmaze loss passes the finite-difference oracle") {
  ModelConfig cfg;
  cfg.env = EnvKind::kPointMaze;
  cfg.ensemble = 1;
  cfg.debug_channels = 1;
  cfg.obs_side = 16;  // conv trunk 16 -> 12 -> 4 -> 2
  cfg.idm_hidden = 4;
  nn::ParamStore ps;
  init_params(ps, cfg, 13);
  Rng rng(14);
  const Batch b = random_batch(rng, cfg, 3, 2);
  LossWeights w;
  w.alpha = 1.0f;
  w.beta_cov = 1.0f;
  w.delta = 0.5f;
  w.omega = 0.5f;
  const auto r = pldm::testing::grad_check_probes(
      ps,
      [&](nn::Graph& g) {
        return g.scale(build_total_loss(g, cfg, w, b).loss_node, 1.0f / 32.0f);
      },
      5);
  CAPTURE(r.worst, r.worst_side, r.worst_dense, r.checked, r.kink_adjacent,
          r.kink_dense);
  REQUIRE(r.max_rel_err < 1e-3);
  REQUIRE(r.max_side_rel_err < 0.05);
  // dense-kink components (no locally valid oracle): window-average slope
  // must still agree coarsely, and they must stay a small minority
  REQUIRE(r.max_dense_rel_err < 0.5);
  REQUIRE(r.kink_dense * 5 <= r.checked);
  REQUIRE((r.kink_adjacent + r.kink_dense) * 2 < r.checked);
}

TEST_CASE("checkpoint metadata round-trips the model config") {
  ModelConfig cfg;
  cfg.env = EnvKind::kPointMaze;
  cfg.ensemble = 3;
  cfg.gru_hidden = 128;
  cfg.idm_hidden = 32;
  TrainConfig tc;
  const ModelConfig back = model_config_from_meta(checkpoint_meta(cfg, tc, 42));
  REQUIRE(back.env == cfg.env);
  REQUIRE(back.ensemble == cfg.ensemble);
  REQUIRE(back.gru_hidden == cfg.gru_hidden);
  REQUIRE(back.idm_hidden == cfg.idm_hidden);
}

TEST_CASE("training smoke: loss drops, checkpoint loads") {
  data::TwoRoomsGenConfig gen;
  gen.episodes = 8;
  gen.steps = 24;
  gen.seed = 15;
  const data::Dataset ds = data::generate_two_rooms_dataset(gen);

  ModelConfig cfg;
  cfg.env = EnvKind::kTwoRooms;
  cfg.ensemble = 2;
  cfg.gru_hidden = 32;
  nn::ParamStore ps;
  TrainConfig tc;
  tc.batch_size = 16;
  tc.horizon = 8;
  tc.epochs = 3;
  tc.lr = 1e-3f;
  tc.seed = 16;
  const auto ckpt = std::filesystem::temp_directory_path() / "pldm_test_model.ckpt";
  tc.ckpt_path = ckpt.string();
  const TrainStats st = train(ds, cfg, tc, ps);
  REQUIRE(st.epoch_sim.size() == 3);
  for (double v : st.epoch_sim) REQUIRE(std::isfinite(v));
  REQUIRE(st.epoch_total.back() < st.epoch_total.front());

  nn::ParamStore back;
  const std::string meta = nn::load_checkpoint(ckpt.string(), back);
  REQUIRE(model_config_from_meta(meta).gru_hidden == 32);
  REQUIRE(back.num_params() == ps.num_params());
  REQUIRE(back.at("enc.fc.w").value.data == ps.at("enc.fc.w").value.data);
  std::filesystem::remove(ckpt);
}
