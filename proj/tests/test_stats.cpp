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

// Reference values frozen from independent high-precision oracles
// (mpmath regularized betainc at 30 digits; scipy.stats for Welch).

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pldm/eval/stats.hpp"

using namespace pldm::eval;

namespace {
bool sig6(double got, double want) {
  return std::fabs(got - want) <= 5e-7 * std::fabs(want);
}
}  // namespace

TEST_CASE("incomplete beta matches mpmath to 1e-10") {
  struct Case {
    double a, b, x, want;
  };
  const Case cases[] = {
      {0.5, 0.5, 0.25, 0.33333333333333333333},
      {2, 3, 0.5, 0.6875},
      {10, 0.5, 0.99, 0.65792817515678432735},
      {5, 5, 0.1, 0.00089092000000000022945},
      {0.5, 8, 0.7, 0.99998494517835856893},
      {30, 40, 0.45, 0.64474800855856811281},
      {0.01, 3, 0.5, 0.99931173718971033885},
      {7, 2, 0.999, 0.99997211179022386},
  };
  for (const auto& c : cases) {
    CAPTURE(c.a, c.b, c.x);
    REQUIRE(std::fabs(incomplete_beta(c.a, c.b, c.x) - c.want) < 1e-10);
  }
  REQUIRE(incomplete_beta(2, 3, 0.0) == 0.0);
  REQUIRE(incomplete_beta(2, 3, 1.0) == 1.0);
  REQUIRE_THROWS_AS(incomplete_beta(0.0, 1.0, 0.5), std::invalid_argument);
}

TEST_CASE("student-t survival function matches scipy") {
  REQUIRE(std::fabs(student_t_sf(2.5, 7.0) - 0.020496109292876437) < 1e-12);
  REQUIRE(std::fabs(student_t_sf(-1.3, 3.7) - 0.8656666379136864) < 1e-12);
  REQUIRE(student_t_sf(0.0, 5.0) == Catch::Approx(0.5));
}

TEST_CASE("welch t-test matches scipy to 6 significant digits") {
  const WelchResult r = welch_t_test({1, 2, 3, 4, 5}, {2, 3, 4, 5, 6});
  REQUIRE(sig6(r.t, -1.0));
  REQUIRE(sig6(r.p, 0.8267032464563329));
  REQUIRE(sig6(r.dof, 8.0));

  const WelchResult r2 = welch_t_test({0.9, 0.7, 0.85, 0.92, 0.78, 0.88},
                                      {0.6, 0.65, 0.55, 0.7, 0.5});
  REQUIRE(sig6(r2.t, 4.852059578693596));
  REQUIRE(sig6(r2.p, 0.00048196598261751014));
  REQUIRE(sig6(r2.dof, 8.806633233645606));
}

TEST_CASE("welch t-test degenerate and symmetry properties") {
  const WelchResult r = welch_t_test({1, 2, 3}, {1, 2, 3});
  REQUIRE(r.t == 0.0);
  REQUIRE(r.p == Catch::Approx(0.5));

  const WelchResult ab = welch_t_test({1.2, 3.4, 2.2, 5.0}, {0.3, 1.1, 0.9});
  const WelchResult ba = welch_t_test({0.3, 1.1, 0.9}, {1.2, 3.4, 2.2, 5.0});
  REQUIRE(ab.t == Catch::Approx(-ba.t));
  REQUIRE(ab.dof == Catch::Approx(ba.dof));
  REQUIRE(ab.p == Catch::Approx(1.0 - ba.p));

  REQUIRE_THROWS_AS(welch_t_test({1.0}, {1, 2, 3}), std::invalid_argument);
  REQUIRE_THROWS_AS(welch_t_test({1, 1, 1}, {2, 2}), std::invalid_argument);
}
