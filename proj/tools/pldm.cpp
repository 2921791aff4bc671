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

// pldm: gen-data | train | eval | chase | stats.
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric error.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pldm/data/datagen.hpp"
#include "pldm/eval/agents.hpp"
#include "pldm/eval/protocols.hpp"
#include "pldm/eval/stats.hpp"
#include "pldm/model/train.hpp"
#include "pldm/plan/model_dynamics.hpp"
#include "pldm/util/config.hpp"

using namespace pldm;
using util::CliError;
using util::ConfigError;
using util::DataError;
using util::NumericError;
using util::RunConfig;

namespace {

struct CommonOpts {
  std::string config;
  std::string out;
  int64_t seed = -1;  // -1: use the config's seed
  bool deterministic = false;
  int workers = 1;
  bool verbose_planner = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool need_out = true) {
  cmd->add_option("--config", o.config, "config file path or preset:<name>")
      ->required();
  auto* out = cmd->add_option("--out", o.out, "output path prefix");
  if (need_out) out->required();
  cmd->add_option("--seed", o.seed, "override the config seed");
  cmd->add_flag("--deterministic", o.deterministic,
                "single-threaded deterministic reductions");
  cmd->add_option("--workers", o.workers, "worker pool size hint");
  cmd->add_flag("--verbose-planner", o.verbose_planner,
                "print per-plan best-cost traces to stderr");
}

RunConfig load(const CommonOpts& o) {
  RunConfig cfg = util::load_config(o.config);
  if (o.seed >= 0) {
    cfg.seed = static_cast<uint64_t>(o.seed);
    cfg.raw["seed"] = cfg.seed;
  }
  return cfg;
}

uint64_t file_fingerprint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("data: cannot open " + path);
  std::vector<char> buf((std::istreambuf_iterator<char>(f)),
                        std::istreambuf_iterator<char>());
  return nn::fnv1a64(reinterpret_cast<const uint8_t*>(buf.data()), buf.size());
}

std::string hex64(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::vector<env::MazeLayout> train_layouts_for(const RunConfig& cfg) {
  Rng rng = Rng(cfg.seed).stream(0x1a9);
  std::vector<env::MazeLayout> out;
  std::set<uint16_t> seen;
  while (static_cast<int>(out.size()) < cfg.num_layouts) {
    const env::MazeLayout l = env::generate_layout(rng);
    if (seen.insert(l.bits).second) out.push_back(l);
  }
  return out;
}

eval::PlanObserver trace_printer(bool verbose) {
  if (!verbose) return {};
  return [](const plan::PlanResult& r) {
    std::fprintf(stderr, "plan: best-cost trace");
    for (double c : r.best_cost_trace) std::fprintf(stderr, " %.4f", c);
    std::fprintf(stderr, "\n");
  };
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const CommonOpts& o) {
  RunConfig cfg = load(o);
  data::Dataset ds;
  if (cfg.env == "two_rooms") {
    data::TwoRoomsGenConfig gc = cfg.two_rooms_data;
    gc.seed = cfg.seed;
    ds = data::generate_two_rooms_dataset(gc);
    if (cfg.total_transitions > 0) {
      util::truncate_to_transitions(ds, cfg.total_transitions);
      ds.meta.emplace_back("total_transitions",
                           std::to_string(cfg.total_transitions));
    }
  } else {
    data::PointMazeGenConfig gc;
    gc.episodes = cfg.maze_episodes;
    gc.steps = cfg.maze_steps;
    gc.seed = cfg.seed;
    gc.layouts = train_layouts_for(cfg);
    ds = data::generate_pointmaze_dataset(gc);
  }
  data::save_dataset(ds, o.out);
  util::write_manifest(o.out, "gen-data", cfg, o.deterministic, o.workers);
  int transitions = 0;
  for (const auto& e : ds.episodes) transitions += e.T;
  std::printf("wrote %s: %zu episodes, %d transitions\n", o.out.c_str(),
              ds.episodes.size(), transitions);
  for (const auto& [k, v] : ds.meta)
    std::printf("  %s = %s\n", k.c_str(), v.c_str());
  return 0;
}

int cmd_train(const CommonOpts& o, const std::string& data_path) {
  RunConfig cfg = load(o);
  data::Dataset ds;
  try {
    ds = data::load_dataset(data_path);
  } catch (const std::exception& e) {
    throw DataError(std::string("data: ") + e.what());
  }
  model::TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  tc.ckpt_path = o.out;
  tc.log_path = o.out + ".log.ndjson";
  tc.dataset_fingerprint = hex64(file_fingerprint(data_path));
  model::TrainStats st;
  nn::ParamStore ps;
  try {
    st = model::train(ds, cfg.model, tc, ps);
  } catch (const std::exception& e) {
    throw NumericError(std::string("train: ") + e.what());
  }
  util::write_manifest(o.out, "train", cfg, o.deterministic, o.workers);
  for (size_t i = 0; i < st.epoch_total.size(); ++i)
    std::printf("epoch %zu: total %.5f  sim %.5f\n", i, st.epoch_total[i],
                st.epoch_sim[i]);
  std::printf("final latent std %.5f; checkpoint %s\n", st.final_latent_std,
              o.out.c_str());
  return 0;
}

model::ModelConfig load_model(const std::string& ckpt, nn::ParamStore& ps) {
  std::string meta;
  try {
    meta = nn::load_checkpoint(ckpt, ps);
  } catch (const std::exception& e) {
    throw DataError(std::string("data: ") + e.what());
  }
  return model::model_config_from_meta(meta);
}

// Start/goal pairs at distance >= 10 so trials are nontrivial.
eval::TwoRoomsTrialSpec sample_two_rooms_trial(Rng& rng,
                                               const env::TwoRoomsGeometry& g,
                                               int max_steps, float radius) {
  eval::TwoRoomsTrialSpec spec;
  spec.geometry = g;
  spec.max_steps = max_steps;
  spec.success_radius = radius;
  for (;;) {
    spec.start = env::two_rooms_reset(rng, g);
    spec.goal = env::two_rooms_reset(rng, g);
    if (env::distance(spec.start, spec.goal) >= 10.0f) return spec;
  }
}

int cmd_eval(const CommonOpts& o, const std::string& ckpt) {
  const RunConfig cfg = load(o);
  nn::ParamStore ps;
  const model::ModelConfig mcfg = load_model(ckpt, ps);
  const plan::ModelDynamics dyn(ps, mcfg);
  const auto on_plan = trace_printer(o.verbose_planner);
  std::vector<eval::EvalReport> reports;

  if (cfg.eval.mode == "goal") {
    const env::TwoRoomsGeometry g;
    std::vector<eval::TrialRecord> recs;
    for (int i = 0; i < cfg.eval.trials; ++i) {
      Rng rng = Rng(cfg.seed).stream(static_cast<uint64_t>(i));
      const auto spec = sample_two_rooms_trial(rng, g, cfg.eval.max_steps,
                                               cfg.eval.success_radius);
      env::Position2 final_pos;
      const auto t0 = std::chrono::steady_clock::now();
      const plan::MpcResult r = eval::run_two_rooms_goal_episode(
          dyn, g, spec.start, spec.goal, spec.success_radius, cfg.plan,
          spec.max_steps, rng, &final_pos, on_plan);
      eval::TrialRecord rec;
      rec.success = r.success;
      rec.steps = r.steps;
      rec.final_distance = env::distance(final_pos, spec.goal);
      rec.min_distance = rec.final_distance;
      rec.seconds = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
      recs.push_back(rec);
    }
    eval::EvalReport rep =
        eval::make_report(std::move(recs), cfg.eval.success_radius);
    rep.keys.emplace_back("mode", "goal");
    // wall-clock is inherently nondeterministic; deterministic runs must
    // emit bit-identical metric files
    if (o.deterministic)
      for (auto& r : rep.records) r.seconds = 0.0;
    eval::emit_metrics(rep, o.out + ".goal.csv");
    reports.push_back(std::move(rep));
  } else if (cfg.eval.mode == "timing") {
    const env::TwoRoomsGeometry g;
    auto run = [&](int interval, int episode) {
      plan::PlanConfig pcfg = cfg.plan;
      pcfg.replan_interval = interval;
      Rng rng = Rng(cfg.seed).stream(static_cast<uint64_t>(episode));
      const auto spec = sample_two_rooms_trial(rng, g, cfg.eval.max_steps,
                                               cfg.eval.success_radius);
      eval::TrialRecord rec;
      const plan::MpcResult r = eval::run_two_rooms_goal_episode(
          dyn, g, spec.start, spec.goal, spec.success_radius, pcfg,
          spec.max_steps, rng, nullptr, on_plan);
      rec.success = r.success;
      rec.steps = r.steps;
      return rec;
    };
    auto rows = eval::timing_benchmark(run, cfg.eval.replan_intervals,
                                       cfg.eval.timing_episodes);
    if (o.deterministic)
      for (auto& r : rows) r.seconds_per_episode = 0.0;
    std::ofstream f(o.out + ".timing.csv", std::ios::trunc);
    f << "interval,seconds_per_episode,success_rate,normalized_success\n";
    for (const auto& r : rows) {
      std::printf("interval %2d: %8.3f s/episode  success %.3f  norm %.3f\n",
                  r.replan_interval, r.seconds_per_episode, r.success_rate,
                  r.normalized_success);
      char buf[120];
      std::snprintf(buf, sizeof(buf), "%d,%.6g,%.6g,%.6g\n",
                    r.replan_interval, r.seconds_per_episode, r.success_rate,
                    r.normalized_success);
      f << buf;
    }
  } else if (cfg.eval.mode == "held_out" || cfg.eval.mode == "dmin_buckets") {
    if (mcfg.env != model::EnvKind::kPointMaze)
      throw ConfigError("config: layout generalization needs a pointmaze "
                        "checkpoint");
    const auto train = train_layouts_for(cfg);
    // stateful MPC adapter: replans inside the per-step protocol callback
    struct Adapter {
      const plan::ModelDynamics* dyn;
      plan::PlanConfig pcfg;
      uint64_t seed;
      eval::PlanObserver on_plan;
      uint64_t trial = 0;
      Rng rng{0};
      plan::ActionSeq plan_, warm_;
      bool have_warm = false;
      int cursor = 1 << 30;
      Tensor z_goal;

      std::pair<float, float> operator()(const env::PointMazeState& st,
                                         const eval::MazeTrialSpec& spec,
                                         int remaining) {
        if (remaining == spec.max_steps) {  // fresh trial
          rng = Rng(seed).stream(trial++);
          cursor = 1 << 30;
          have_warm = false;
          env::PointMazeState gs;
          gs.x = spec.goal_x;
          gs.y = spec.goal_y;
          const auto [gi, gv] = eval::maze_obs(spec.layout, gs);
          z_goal = dyn->encode_goal(gi, &gv);
        }
        if (cursor >= pcfg.replan_interval ||
            cursor >= static_cast<int>(plan_.size())) {
          const auto [img, vel] = eval::maze_obs(spec.layout, st);
          const Tensor z0 = dyn->encode(img, &vel);
          const plan::PlanResult r = plan::mppi_plan(
              *dyn, z0, z_goal, pcfg, rng, have_warm ? &warm_ : nullptr);
          if (on_plan) on_plan(r);
          plan_ = r.actions;
          cursor = 0;
        }
        const plan::Action a = plan_[static_cast<size_t>(cursor)];
        ++cursor;
        warm_.assign(plan_.begin() + cursor, plan_.end());
        warm_.resize(static_cast<size_t>(pcfg.horizon),
                     plan::Action{0.0f, 0.0f});
        have_warm = true;
        return {a[0], a[1]};
      }
    };
    Adapter agent{&dyn, cfg.plan, cfg.seed + 1, on_plan};
    Rng rng(cfg.seed);
    const auto mode = cfg.eval.mode == "held_out"
                          ? eval::GeneralizationMode::kHeldOutCount
                          : eval::GeneralizationMode::kDminBuckets;
    reports = eval::eval_layout_generalization(agent, train, mode, rng);
    if (o.deterministic)
      for (auto& rep : reports)
        for (auto& r : rep.records) r.seconds = 0.0;
    for (size_t i = 0; i < reports.size(); ++i)
      eval::emit_metrics(reports[i],
                         o.out + ".gen" + std::to_string(i) + ".csv");
  } else {
    throw ConfigError("config: unknown eval mode '" + cfg.eval.mode + "'");
  }

  util::write_manifest(o.out, "eval", cfg, o.deterministic, o.workers);
  if (!reports.empty()) std::fputs(eval::summarize(reports).c_str(), stdout);
  return 0;
}

int cmd_chase(const CommonOpts& o, const std::string& ckpt) {
  const RunConfig cfg = load(o);
  nn::ParamStore ps;
  const model::ModelConfig mcfg = load_model(ckpt, ps);
  if (mcfg.env != model::EnvKind::kTwoRooms)
    throw ConfigError("config: chase needs a two_rooms checkpoint");
  const plan::ModelDynamics dyn(ps, mcfg);
  const env::TwoRoomsGeometry g;
  const auto on_plan = trace_printer(o.verbose_planner);
  Rng base(cfg.seed);

  auto pldm_policy = [&](int episode) {
    return eval::ChaseAvoidPolicy(
        dyn, g, cfg.plan, Rng(cfg.seed).stream(1000 + episode), on_plan);
  };
  std::vector<eval::ChaseReport> reports;
  reports.push_back(eval::eval_chase_each("pldm", pldm_policy,
                                          cfg.eval.chaser_speed,
                                          cfg.eval.chase_episodes, g, base));
  reports.push_back(eval::eval_chase("zero", eval::zero_policy,
                                     cfg.eval.chaser_speed,
                                     cfg.eval.chase_episodes, g, base));
  reports.push_back(eval::eval_chase(
      "random", eval::random_policy(Rng(cfg.seed).stream(0xabc)),
      cfg.eval.chaser_speed, cfg.eval.chase_episodes, g, base));

  std::ofstream f(o.out + ".chase.csv", std::ios::trunc);
  f << "controller,chaser_speed,success_rate,std_error,mean_distance\n";
  for (const auto& r : reports) {
    std::printf("%-8s speed %.2f: survival %.3f +- %.3f  mean dist %.3f\n",
                r.controller.c_str(), r.chaser_speed, r.success_rate,
                r.std_error, r.mean_distance);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%.6g,%.6g,%.6g,%.6g\n",
                  r.controller.c_str(), r.chaser_speed, r.success_rate,
                  r.std_error, r.mean_distance);
    f << buf;
  }
  // per-episode distance traces for the mean-distance-over-time plot
  std::ofstream tf(o.out + ".chase_traces.csv", std::ios::trunc);
  tf << "controller,episode,step,distance\n";
  for (const auto& r : reports)
    for (size_t e = 0; e < r.distance_traces.size(); ++e)
      for (size_t t = 0; t < r.distance_traces[e].size(); ++t) {
        char buf[120];
        std::snprintf(buf, sizeof(buf), "%s,%zu,%zu,%.6g\n",
                      r.controller.c_str(), e, t, r.distance_traces[e][t]);
        tf << buf;
      }
  util::write_manifest(o.out, "chase", cfg, o.deterministic, o.workers);
  return 0;
}

int cmd_stats(const std::string& file_a, const std::string& file_b) {
  eval::EvalReport a, b;
  try {
    a = eval::load_metrics(file_a);
    b = eval::load_metrics(file_b);
  } catch (const std::exception& e) {
    throw DataError(std::string("data: ") + e.what());
  }
  auto outcomes = [](const eval::EvalReport& r) {
    std::vector<double> xs;
    for (const auto& t : r.records) xs.push_back(t.success ? 1.0 : 0.0);
    return xs;
  };
  eval::WelchResult w;
  try {
    w = eval::welch_t_test(outcomes(a), outcomes(b));
  } catch (const std::exception& e) {
    throw NumericError(e.what());
  }
  std::printf("%-24s %-24s %8s %8s %8s  %s\n", "sample_a", "sample_b", "mean_a",
              "mean_b", "t", "significance");
  std::printf("%-24s %-24s %8.4f %8.4f %8.4f  %s (dof %.2f)\n", file_a.c_str(),
              file_b.c_str(), a.success_rate, b.success_rate, w.t,
              eval::format_significance(w.p).c_str(), w.dof);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PLDM: latent dynamics model training and planning toolchain"};
  app.require_subcommand(1);

  CommonOpts gen_o, train_o, eval_o, chase_o;
  std::string train_data, eval_ckpt, chase_ckpt, stats_a, stats_b;

  auto* gen = app.add_subcommand("gen-data", "generate an offline dataset");
  add_common(gen, gen_o);

  auto* train = app.add_subcommand("train", "train the world model");
  add_common(train, train_o);
  train->add_option("--data", train_data, "dataset path")->required();

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd, eval_o);
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();

  auto* chase = app.add_subcommand("chase", "chase task with avoid objective");
  add_common(chase, chase_o);
  chase->add_option("--ckpt", chase_ckpt, "checkpoint path")->required();

  auto* stats = app.add_subcommand("stats", "Welch's t-test on metric files");
  stats->add_option("file_a", stats_a, "metrics CSV A")->required();
  stats->add_option("file_b", stats_b, "metrics CSV B")->required();

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return cmd_gen_data(gen_o);
    if (train->parsed()) return cmd_train(train_o, train_data);
    if (eval_cmd->parsed()) return cmd_eval(eval_o, eval_ckpt);
    if (chase->parsed()) return cmd_chase(chase_o, chase_ckpt);
    if (stats->parsed()) return cmd_stats(stats_a, stats_b);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const CliError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 0;
}
