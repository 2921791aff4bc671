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

// Welch's t-test with a from-scratch Student-t survival function. The
// regularized incomplete beta is evaluated by the modified Lentz continued
// fraction (Numerical Recipes betacf form) to absolute error < 1e-10.

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace pldm::eval {

namespace detail {

inline double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("stats: incomplete beta did not converge");
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0))
    throw std::invalid_argument("stats: incomplete_beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  // use the continued fraction on the rapidly converging side
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::betacf(a, b, x) / a;
  return 1.0 - front * detail::betacf(b, a, 1.0 - x) / b;
}

// P(T > t) for Student's t with `dof` degrees of freedom.
inline double student_t_sf(double t, double dof) {
  if (!(dof > 0.0)) throw std::invalid_argument("stats: dof must be positive");
  const double p = incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t)) / 2.0;
  return t >= 0.0 ? p : 1.0 - p;
}

struct WelchResult {
  double t = 0;
  double p = 0;  // one-sided, mean_a > mean_b
  double dof = 0;
};

struct SampleMoments {
  double mean = 0;
  double var = 0;  // unbiased
  size_t n = 0;
};

inline SampleMoments sample_moments(const std::vector<double>& xs) {
  SampleMoments m;
  m.n = xs.size();
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(m.n);
  for (double x : xs) m.var += (x - m.mean) * (x - m.mean);
  m.var /= static_cast<double>(m.n - 1);
  return m;
}

// Welch's unequal-variance t-test; one-sided alternative mean_a > mean_b.
inline WelchResult welch_t_test(const std::vector<double>& a,
                                const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("stats: welch_t_test needs n >= 2 per sample");
  const SampleMoments ma = sample_moments(a), mb = sample_moments(b);
  const double va = ma.var / static_cast<double>(ma.n);
  const double vb = mb.var / static_cast<double>(mb.n);
  if (va + vb <= 0.0)
    throw std::invalid_argument("stats: welch_t_test needs positive variance");
  WelchResult r;
  r.t = (ma.mean - mb.mean) / std::sqrt(va + vb);
  r.dof = (va + vb) * (va + vb) /
          (va * va / static_cast<double>(ma.n - 1) +
           vb * vb / static_cast<double>(mb.n - 1));
  r.p = student_t_sf(r.t, r.dof);
  return r;
}

}  // namespace pldm::eval
