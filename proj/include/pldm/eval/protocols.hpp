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

// Evaluation protocols: goal-reaching success over trials, layout
// generalization grouped by D_min, chase survival against baselines,
// replan-interval timing, and metric emission as plot-ready CSV.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pldm/env/chase.hpp"
#include "pldm/env/pointmaze.hpp"
#include "pldm/env/two_rooms.hpp"
#include "pldm/eval/stats.hpp"

namespace pldm::eval {

constexpr float kTwoRoomsSuccessRadius = env::kTwoRoomsActionNorm;
constexpr float kMazeSuccessRadius = 0.5f;  // half a cell
constexpr int kTwoRoomsMaxSteps = 200;

struct TrialRecord {
  bool success = false;
  int steps = 0;             // steps taken until success or max_steps
  float final_distance = 0;  // distance to goal when the trial ended
  float min_distance = 0;    // closest approach over the trajectory
  double seconds = 0;        // wall-clock for the whole trial
};

struct EvalReport {
  double success_rate = 0;
  double std_error = 0;  // sample std / sqrt(n) over per-trial outcomes
  float success_radius = 0;
  std::vector<std::pair<std::string, std::string>> keys;  // ordered grouping
  std::vector<TrialRecord> records;
};

inline EvalReport make_report(std::vector<TrialRecord> records,
                              float success_radius) {
  if (records.empty()) throw std::invalid_argument("eval: no trials");
  EvalReport r;
  r.success_radius = success_radius;
  r.records = std::move(records);
  const double n = static_cast<double>(r.records.size());
  for (const auto& t : r.records) r.success_rate += t.success ? 1.0 : 0.0;
  r.success_rate /= n;
  double var = 0;
  for (const auto& t : r.records) {
    const double d = (t.success ? 1.0 : 0.0) - r.success_rate;
    var += d * d;
  }
  if (r.records.size() > 1) var /= (n - 1.0);
  r.std_error = std::sqrt(var / n);
  return r;
}

// ---------------------------------------------------------------------------
// Goal reaching

struct TwoRoomsTrialSpec {
  env::TwoRoomsGeometry geometry;
  env::Position2 start;
  env::Position2 goal;
  int max_steps = kTwoRoomsMaxSteps;
  float success_radius = kTwoRoomsSuccessRadius;
};

// agent(pos, goal, steps_remaining) -> displacement action. The environment
// clips the action norm; success is checked after every step and at t = 0.
template <class Controller>
EvalReport eval_goal_reaching(Controller&& agent,
                              const std::vector<TwoRoomsTrialSpec>& trials) {
  std::vector<TrialRecord> recs;
  recs.reserve(trials.size());
  float radius = trials.empty() ? kTwoRoomsSuccessRadius
                                : trials.front().success_radius;
  for (const auto& spec : trials) {
    const auto t0 = std::chrono::steady_clock::now();
    TrialRecord rec;
    env::Position2 pos = spec.start;
    float d = env::distance(pos, spec.goal);
    rec.min_distance = d;
    while (d > spec.success_radius && rec.steps < spec.max_steps) {
      const env::Position2 a = agent(pos, spec.goal, spec.max_steps - rec.steps);
      pos = env::two_rooms_step(pos, a.x, a.y, spec.geometry);
      ++rec.steps;
      d = env::distance(pos, spec.goal);
      rec.min_distance = std::min(rec.min_distance, d);
    }
    rec.success = d <= spec.success_radius;
    rec.final_distance = d;
    rec.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    recs.push_back(rec);
  }
  return make_report(std::move(recs), radius);
}

struct MazeTrialSpec {
  env::MazeLayout layout;
  env::PointMazeState start;
  float goal_x = 0, goal_y = 0;
  int max_steps = kTwoRoomsMaxSteps;
  float success_radius = kMazeSuccessRadius;
};

template <class Controller>
EvalReport eval_goal_reaching_maze(Controller&& agent,
                                   const std::vector<MazeTrialSpec>& trials) {
  std::vector<TrialRecord> recs;
  recs.reserve(trials.size());
  float radius =
      trials.empty() ? kMazeSuccessRadius : trials.front().success_radius;
  for (const auto& spec : trials) {
    const auto t0 = std::chrono::steady_clock::now();
    TrialRecord rec;
    env::PointMazeState st = spec.start;
    auto dist = [&](const env::PointMazeState& s) {
      return std::hypot(s.x - spec.goal_x, s.y - spec.goal_y);
    };
    float d = dist(st);
    rec.min_distance = d;
    while (d > spec.success_radius && rec.steps < spec.max_steps) {
      const auto [ax, ay] = agent(st, spec, spec.max_steps - rec.steps);
      st = env::maze_step(st, ax, ay, spec.layout);
      ++rec.steps;
      d = dist(st);
      rec.min_distance = std::min(rec.min_distance, d);
    }
    rec.success = d <= spec.success_radius;
    rec.final_distance = d;
    rec.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    recs.push_back(rec);
  }
  return make_report(std::move(recs), radius);
}

// ---------------------------------------------------------------------------
// Layout generalization

// BFS path length in cells between two free interior cells; -1 unreachable.
inline int maze_cell_distance(const env::MazeLayout& l, int from, int to) {
  std::array<int, 16> dist;
  dist.fill(-1);
  std::vector<int> q{from};
  dist[from] = 0;
  for (size_t h = 0; h < q.size(); ++h) {
    const int c = q[h];
    if (c == to) return dist[c];
    const int r = c / 4, k = c % 4;
    const int nb[4][2] = {{r - 1, k}, {r + 1, k}, {r, k - 1}, {r, k + 1}};
    for (auto& [nr, nk] : nb) {
      if (nr < 0 || nr >= 4 || nk < 0 || nk >= 4) continue;
      const int ni = nr * 4 + nk;
      if (!l.wall(nr, nk) && dist[ni] < 0) {
        dist[ni] = dist[c] + 1;
        q.push_back(ni);
      }
    }
  }
  return dist[to];
}

// Start/goal trial on a layout with BFS cell distance >= min_cells, uniform
// over qualifying free-cell pairs. Start at cell center with zero velocity.
inline MazeTrialSpec sample_maze_trial(const env::MazeLayout& l, Rng& rng,
                                       int min_cells = 3) {
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < 16; ++a) {
    if (l.wall(a / 4, a % 4)) continue;
    for (int b = 0; b < 16; ++b) {
      if (a == b || l.wall(b / 4, b % 4)) continue;
      const int d = maze_cell_distance(l, a, b);
      if (d >= min_cells) pairs.emplace_back(a, b);
    }
  }
  if (pairs.empty())
    throw std::runtime_error("eval: no start/goal pair at the distance bound");
  const auto [a, b] = pairs[static_cast<size_t>(rng.uniform() * pairs.size()) %
                            pairs.size()];
  MazeTrialSpec spec;
  spec.layout = l;
  spec.start.x = (a % 4) + 1.5f;
  spec.start.y = (a / 4) + 1.5f;
  spec.goal_x = (b % 4) + 1.5f;
  spec.goal_y = (b / 4) + 1.5f;
  return spec;
}

// Valid layouts disjoint from (and pairwise distinct under) the train set.
inline std::vector<env::MazeLayout> generate_test_layouts(
    const std::vector<env::MazeLayout>& train, int count, Rng& rng) {
  std::set<uint16_t> seen;
  for (const auto& l : train) seen.insert(l.bits);
  std::vector<env::MazeLayout> out;
  while (static_cast<int>(out.size()) < count) {
    const env::MazeLayout l = env::generate_layout(rng);
    if (seen.insert(l.bits).second) out.push_back(l);
  }
  return out;
}

inline std::string dmin_bucket_key(int d) {
  return "D_min = " + std::to_string(d);
}

// `per_bucket` distinct valid layouts at each exact D_min value. Rejection
// sampling with a cap; on failure reports which buckets were achieved.
inline std::map<int, std::vector<env::MazeLayout>> generate_dmin_buckets(
    const std::vector<env::MazeLayout>& train, const std::vector<int>& dmins,
    int per_bucket, Rng& rng, int max_attempts = 2000000) {
  std::map<int, std::vector<env::MazeLayout>> buckets;
  std::set<uint16_t> seen;
  for (const auto& l : train) seen.insert(l.bits);
  std::set<int> want(dmins.begin(), dmins.end());
  int remaining = per_bucket * static_cast<int>(want.size());
  for (int i = 0; i < max_attempts && remaining > 0; ++i) {
    const env::MazeLayout l = env::generate_layout(rng);
    if (seen.count(l.bits)) continue;
    const int d = env::d_min(l, train);
    if (!want.count(d)) continue;
    auto& b = buckets[d];
    if (static_cast<int>(b.size()) >= per_bucket) continue;
    seen.insert(l.bits);
    b.push_back(l);
    --remaining;
  }
  if (remaining > 0) {
    std::string msg = "eval: could not fill D_min buckets; achieved:";
    for (int d : want) {
      const auto it = buckets.find(d);
      const int got = it == buckets.end() ? 0 : static_cast<int>(it->second.size());
      msg += " " + dmin_bucket_key(d) + " -> " + std::to_string(got) + "/" +
             std::to_string(per_bucket);
    }
    throw std::runtime_error(msg);
  }
  return buckets;
}

enum class GeneralizationMode { kHeldOutCount, kDminBuckets };

// held_out_count: `held_out` unseen layouts, 1 trial each, a single report.
// dmin_buckets: per_bucket layouts x trials_per_layout trials per D_min
// group, one report per group keyed "D_min = d".
template <class Controller>
std::vector<EvalReport> eval_layout_generalization(
    Controller&& agent, const std::vector<env::MazeLayout>& train,
    GeneralizationMode mode, Rng& rng, int held_out = 40,
    const std::vector<int>& dmins = {1, 2, 3, 4, 5}, int per_bucket = 5,
    int trials_per_layout = 5) {
  std::vector<EvalReport> reports;
  if (mode == GeneralizationMode::kHeldOutCount) {
    Rng gen = rng.stream(0);
    std::vector<MazeTrialSpec> trials;
    for (const auto& l : generate_test_layouts(train, held_out, gen)) {
      Rng tr = rng.stream(1 + static_cast<uint64_t>(trials.size()));
      trials.push_back(sample_maze_trial(l, tr));
    }
    EvalReport rep = eval_goal_reaching_maze(agent, trials);
    rep.keys.emplace_back("mode", "held_out");
    reports.push_back(std::move(rep));
    return reports;
  }
  Rng gen = rng.stream(0);
  const auto buckets = generate_dmin_buckets(train, dmins, per_bucket, gen);
  uint64_t stream = 1;
  for (const auto& [d, layouts] : buckets) {
    std::vector<MazeTrialSpec> trials;
    for (const auto& l : layouts)
      for (int t = 0; t < trials_per_layout; ++t) {
        Rng tr = rng.stream(stream++);
        trials.push_back(sample_maze_trial(l, tr));
      }
    EvalReport rep = eval_goal_reaching_maze(agent, trials);
    rep.keys.emplace_back("mode", "dmin_buckets");
    rep.keys.emplace_back("group", dmin_bucket_key(d));
    reports.push_back(std::move(rep));
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Chase protocol

struct ChaseReport {
  std::string controller;
  float chaser_speed = 0;
  double success_rate = 0;
  double std_error = 0;
  double mean_distance = 0;                        // over all steps/episodes
  std::vector<std::vector<float>> distance_traces; // one row per episode
};

// make_policy(episode) -> fresh policy functor; stateful controllers get a
// clean slate per episode. Initial states draw from per-episode rng streams.
template <class PolicyFactory>
ChaseReport eval_chase_each(const std::string& name, PolicyFactory&& make,
                            float chaser_speed, int episodes,
                            const env::TwoRoomsGeometry& g, Rng& rng) {
  ChaseReport rep;
  rep.controller = name;
  rep.chaser_speed = chaser_speed;
  std::vector<TrialRecord> recs;
  double dist_sum = 0;
  size_t dist_n = 0;
  for (int e = 0; e < episodes; ++e) {
    Rng er = rng.stream(static_cast<uint64_t>(e));
    const env::ChaseState st = env::chase_init(er, g, chaser_speed);
    auto policy = make(e);
    const env::ChaseResult res = env::chase_episode(policy, st, g);
    TrialRecord rec;
    rec.success = res.success;
    rec.steps = static_cast<int>(res.distances.size());
    for (float d : res.distances) {
      dist_sum += d;
      ++dist_n;
    }
    recs.push_back(rec);
    rep.distance_traces.push_back(res.distances);
  }
  const EvalReport base = make_report(std::move(recs), env::kChaseSuccessDistance);
  rep.success_rate = base.success_rate;
  rep.std_error = base.std_error;
  rep.mean_distance = dist_n ? dist_sum / static_cast<double>(dist_n) : 0.0;
  return rep;
}

// Stateless-policy convenience wrapper around eval_chase_each.
inline ChaseReport eval_chase(
    const std::string& name,
    const std::function<env::Position2(const env::Position2&,
                                       const env::Position2&)>& policy,
    float chaser_speed, int episodes, const env::TwoRoomsGeometry& g,
    Rng& rng) {
  return eval_chase_each(
      name, [&](int) { return policy; }, chaser_speed, episodes, g, rng);
}

inline env::Position2 zero_policy(const env::Position2&,
                                  const env::Position2&) {
  return {0.0f, 0.0f};
}

// Uniform direction, full action norm.
inline std::function<env::Position2(const env::Position2&,
                                    const env::Position2&)>
random_policy(Rng rng) {
  auto state = std::make_shared<Rng>(rng);
  return [state](const env::Position2&, const env::Position2&) {
    const float ang =
        static_cast<float>(state->uniform() * 2.0 * 3.14159265358979323846);
    return env::Position2{env::kTwoRoomsActionNorm * std::cos(ang),
                          env::kTwoRoomsActionNorm * std::sin(ang)};
  };
}

// ---------------------------------------------------------------------------
// Replan-interval timing

struct TimingRow {
  int replan_interval = 0;
  double seconds_per_episode = 0;
  double success_rate = 0;
  double normalized_success = 0;  // against the first interval
};

// run_episode(interval, episode_index) -> TrialRecord (seconds filled in by
// the caller's clock or left 0 to use this function's own timer).
template <class RunEpisode>
std::vector<TimingRow> timing_benchmark(RunEpisode&& run_episode,
                                        const std::vector<int>& intervals,
                                        int episodes) {
  if (intervals.empty() || episodes <= 0)
    throw std::invalid_argument("eval: timing_benchmark needs work to do");
  std::vector<TimingRow> rows;
  for (int iv : intervals) {
    TimingRow row;
    row.replan_interval = iv;
    double secs = 0, succ = 0;
    for (int e = 0; e < episodes; ++e) {
      const auto t0 = std::chrono::steady_clock::now();
      TrialRecord rec = run_episode(iv, e);
      if (rec.seconds == 0)
        rec.seconds = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
      secs += rec.seconds;
      succ += rec.success ? 1.0 : 0.0;
    }
    row.seconds_per_episode = secs / episodes;
    row.success_rate = succ / episodes;
    rows.push_back(row);
  }
  const double base = rows.front().success_rate;
  for (auto& row : rows)
    row.normalized_success = base > 0 ? row.success_rate / base : 0.0;
  return rows;
}

// ---------------------------------------------------------------------------
// Significance formatting and metric emission

// Paper-style mark: check when p < alpha, cross otherwise.
inline std::string format_significance(double p, double alpha = 0.05) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", p);
  return std::string(p < alpha ? "\xE2\x9C\x93" : "\xE2\x9C\x97") + "(p=" +
         buf + ")";
}

// CSV with a fixed header; one row per trial. Deterministic field order.
inline void emit_metrics(const EvalReport& report, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("eval: cannot write " + path);
  f << "# success_radius=" << report.success_radius;
  for (const auto& [k, v] : report.keys) f << " " << k << "=" << v;
  f << "\n";
  f << "trial,success,steps,final_distance,min_distance,seconds\n";
  char buf[160];
  for (size_t i = 0; i < report.records.size(); ++i) {
    const auto& r = report.records[i];
    std::snprintf(buf, sizeof(buf), "%zu,%d,%d,%.9g,%.9g,%.9g\n", i,
                  r.success ? 1 : 0, r.steps, r.final_distance, r.min_distance,
                  r.seconds);
    f << buf;
  }
  if (!f) throw std::runtime_error("eval: write failed for " + path);
}

inline EvalReport load_metrics(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("eval: cannot read " + path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("# success_radius=", 0) != 0)
    throw std::runtime_error("eval: bad metrics header in " + path);
  std::istringstream hdr(line.substr(2));
  float radius = 0;
  std::vector<std::pair<std::string, std::string>> keys;
  std::string tok;
  while (hdr >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("eval: bad header token " + tok);
    const std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
    if (k == "success_radius")
      radius = std::stof(v);
    else
      keys.emplace_back(k, v);
  }
  std::getline(f, line);  // column header
  std::vector<TrialRecord> recs;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    TrialRecord r;
    size_t idx;
    int success;
    if (std::sscanf(line.c_str(), "%zu,%d,%d,%g,%g,%lg", &idx, &success,
                    &r.steps, &r.final_distance, &r.min_distance,
                    &r.seconds) != 6)
      throw std::runtime_error("eval: bad metrics row: " + line);
    r.success = success != 0;
    recs.push_back(r);
  }
  EvalReport rep = make_report(std::move(recs), radius);
  rep.keys = std::move(keys);
  return rep;
}

// Human-readable summary: one line per report with mean +- standard error.
inline std::string summarize(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  char buf[96];
  for (const auto& rep : reports) {
    std::string key;
    for (const auto& [k, v] : rep.keys) key += (key.empty() ? "" : " ") + k +
                                               "=" + v;
    if (key.empty()) key = "all";
    std::snprintf(buf, sizeof(buf), "%-28s %.3f +- %.3f  (n=%zu)\n",
                  key.c_str(), rep.success_rate, rep.std_error,
                  rep.records.size());
    out << buf;
  }
  return out.str();
}

}  // namespace pldm::eval
