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

// Central finite-difference gradient checking shared by the unit tests and
// the acceptance suite.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "pldm/nn/graph.hpp"

namespace pldm::testing {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "param[i]" of the worst component
  // grad_check_probes only: components validated via central differences vs
  // via a one-sided slope next to a detected nondifferentiability.
  int checked = 0;
  int kink_adjacent = 0;
  double max_side_rel_err = 0.0;
  std::string worst_side;
  int kink_dense = 0;
  double max_dense_rel_err = 0.0;
  std::string worst_dense;
};

// `build` constructs the forward graph from the store's parameters and
// returns the scalar loss node. Analytic gradients from one backward pass
// are compared against central differences with step h on every parameter
// component. Relative error uses max(|a| + |n|, floor) in the denominator so
// near-zero gradients degrade to an absolute check.
inline GradCheckResult grad_check(nn::ParamStore& ps,
                                  const std::function<int(nn::Graph&)>& build,
                                  float h = 1e-3f, double floor_ = 0.1) {
  ps.zero_grad();
  {
    nn::Graph g(&ps);
    g.backward(build(g));
  }
  std::vector<std::vector<float>> analytic;
  for (auto& e : ps.entries) analytic.push_back(e.grad.data);

  auto loss_at = [&]() -> double {
    nn::Graph g(&ps);
    return g.scalar(build(g));
  };

  GradCheckResult r;
  for (size_t pi = 0; pi < ps.entries.size(); ++pi) {
    auto& w = ps.entries[pi].value.data;
    for (size_t i = 0; i < w.size(); ++i) {
      const float keep = w[i];
      w[i] = keep + h;
      const double lp = loss_at();
      w[i] = keep - h;
      const double lm = loss_at();
      w[i] = keep;
      const double num = (lp - lm) / (2.0 * h);
      const double ana = analytic[pi][i];
      const double rel =
          std::abs(ana - num) / std::max(std::abs(ana) + std::abs(num), floor_);
      if (rel > r.max_rel_err) {
        r.max_rel_err = rel;
        r.worst = ps.entries[pi].name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return r;
}

// Same check restricted to `probes` evenly spaced components per parameter
// tensor, for graphs too large to sweep exhaustively.
//
// ReLU/hinge graphs are only piecewise C^1, and a composed loss has kinks
// arbitrarily close to some parameter values (a first-layer bias shifts
// thousands of pre-activations at once), so a plain central difference is
// not a valid oracle everywhere. Five loss evaluations at 0, +-h/2, +-h
// yield four interval slopes; along a smooth section they progress linearly
// (differences ~ (h/2) f''), while a kink breaks the progression. Smooth
// components are compared against the Richardson extrapolation of the two
// central differences (O(h^4) truncation) under `tol`. For kink-adjacent
// components the one-sided Richardson slope (3 s_inner - s_outer) / 2 on the
// kink-free side is a second-order oracle for the derivative at 0; the
// better of the two sides is reported under the looser max_side_rel_err.
// Components with kinks on both sides (first-layer weights shift thousands
// of pre-activations at once, so some kink always lands in each half of the
// window) have no valid local oracle at all; for those the central
// difference still measures the window-average slope, which bounds gross
// composition errors and is reported as max_dense_rel_err.
inline GradCheckResult grad_check_probes(
    nn::ParamStore& ps, const std::function<int(nn::Graph&)>& build,
    int probes, float h = 1e-2f, double floor_ = 0.1, double tol = 1e-3,
    double side_tol = 0.05) {
  ps.zero_grad();
  {
    nn::Graph g(&ps);
    g.backward(build(g));
  }
  std::vector<std::vector<float>> analytic;
  for (auto& e : ps.entries) analytic.push_back(e.grad.data);

  auto loss_at = [&]() -> double {
    nn::Graph g(&ps);
    return g.scalar(build(g));
  };
  const double l0 = loss_at();

  auto rel_err = [&](double ana, double num) {
    return std::abs(ana - num) / std::max(std::abs(ana) + std::abs(num), floor_);
  };

  GradCheckResult r;
  for (size_t pi = 0; pi < ps.entries.size(); ++pi) {
    auto& w = ps.entries[pi].value.data;
    const size_t n = w.size();
    const size_t count = std::min<size_t>(n, static_cast<size_t>(probes));
    for (size_t p = 0; p < count; ++p) {
      const size_t i = p * n / count;
      const float keep = w[i];
      auto at = [&](double d) {
        w[i] = static_cast<float>(keep + d);
        const double l = loss_at();
        w[i] = keep;
        return l;
      };
      const double lp = at(h), lm = at(-h);
      const double lp2 = at(0.5 * h), lm2 = at(-0.5 * h);
      const double ana = analytic[pi][i];
      const std::string name = ps.entries[pi].name + "[" + std::to_string(i) + "]";
      ++r.checked;
      const double s1 = (lm2 - lm) / (0.5 * h);
      const double s2 = (l0 - lm2) / (0.5 * h);
      const double s3 = (lp2 - l0) / (0.5 * h);
      const double s4 = (lp - lp2) / (0.5 * h);
      const double denom = std::max(std::abs(ana), floor_);
      // Slope-difference spread bounds the kink sizes inside (-h, h); zero
      // for linear-plus-curvature sections up to (h/2)^2 f''' terms.
      const double d1 = s2 - s1, d2 = s3 - s2, d3 = s4 - s3;
      const double spread = std::max({d1, d2, d3}) - std::min({d1, d2, d3});
      if (spread <= 2.0 * tol * denom) {
        const double n1 = (lp - lm) / (2.0 * h);
        const double n2 = (lp2 - lm2) / h;
        const double rich = (4.0 * n2 - n1) / 3.0;
        const double rel = rel_err(ana, rich);
        if (rel > r.max_rel_err) {
          r.max_rel_err = rel;
          r.worst = name;
        }
      } else {
        const double rl = (3.0 * s2 - s1) / 2.0;
        const double rr = (3.0 * s3 - s4) / 2.0;
        const double rel = std::min(rel_err(ana, rl), rel_err(ana, rr));
        if (rel <= side_tol) {
          ++r.kink_adjacent;
          if (rel > r.max_side_rel_err) {
            r.max_side_rel_err = rel;
            r.worst_side = name;
          }
        } else {
          ++r.kink_dense;
          const double avg = (lp - lm) / (2.0 * h);
          const double dense = rel_err(ana, avg);
          if (dense > r.max_dense_rel_err) {
            r.max_dense_rel_err = dense;
            r.worst_dense = name;
          }
        }
      }
    }
  }
  return r;
}

}  // namespace pldm::testing
