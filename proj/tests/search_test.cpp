// Copyright 2026 The CAWS Planner Authors
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

#include <gtest/gtest.h>

#include <cmath>

#include "caws/io.hpp"
#include "caws/search.hpp"
#include "support.hpp"

namespace caws {
namespace {

const char* const kScenarios[] = {"straight.txt", "turn90.txt", "front90_rear75.txt", "bicycle.txt",
                                  "parking.txt"};

// Independent feasibility oracle: some rolling direction of every wheel,
// perpendicular to the wheel's ICM vector, lies within its limits.
bool oracle_feasible(const Eigen::Vector2d& r, const WheelLayout& layout) {
  for (const Wheel& w : layout.wheels) {
    const Eigen::Vector2d q = r + w.position;
    const double a = std::atan2(q.x(), -q.y());
    bool ok = false;
    for (double cand : {a, wrap_angle(a + kPi)}) {
      ok = ok || (cand >= w.steer_lower - 1e-9 && cand <= w.steer_upper + 1e-9);
    }
    if (!ok) return false;
  }
  return true;
}

TEST(SampleIcmGrid, EpsilonValues) {
  SearchConfig cfg;
  const IcmSampleSet set = sample_icm_grid(cfg);
  ASSERT_EQ(set.eps_values.size(), 9u);
  const double e = cfg.eps_offset;
  for (int i = 0; i <= 8; ++i) {
    EXPECT_DOUBLE_EQ(set.eps_values[i], (kPi * i + e) / (16.0 + e));
    EXPECT_GT(set.eps_values[i], 0.0);
    EXPECT_LT(set.eps_values[i], kPi / 2);
  }
  EXPECT_NEAR(set.eps_values[4], kPi / 4, 1e-4);
  EXPECT_NEAR(std::tan(set.eps_values[4]), 1.0, 1e-3);
  EXPECT_NEAR(set.eps_values[0], 6.25e-5, 1e-7);
  EXPECT_NEAR(std::tan(set.eps_values[0]), 6.25e-5, 1e-7);
  EXPECT_GT(std::tan(set.eps_values[8]), 1e4);
}

TEST(SampleIcmGrid, PsiAndOmegaValues) {
  const IcmSampleSet set = sample_icm_grid(SearchConfig{});
  ASSERT_EQ(set.psi_values.size(), 9u);
  EXPECT_DOUBLE_EQ(set.psi_values.front(), -kPi);
  EXPECT_DOUBLE_EQ(set.psi_values.back(), kPi);
  EXPECT_DOUBLE_EQ(set.omega_values.front(), -kPi / 2);
  EXPECT_DOUBLE_EQ(set.omega_values.back(), kPi / 2);
  // Eight uniform samples plus the translation row.
  EXPECT_EQ(set.omega_values.size(), 9u);
  EXPECT_TRUE(std::is_sorted(set.omega_values.begin(), set.omega_values.end()));
  EXPECT_EQ(std::count(set.omega_values.begin(), set.omega_values.end(), 0.0), 1);
}

TEST(SampleIcmGrid, SamplesMapToRadiusVector) {
  const IcmSampleSet set = sample_icm_grid(SearchConfig{});
  // Per (eps, psi): eight rotations and two translations.
  EXPECT_EQ(set.samples.size(), 9u * 9u * 10u);
  for (const IcmSample& s : set.samples) {
    ASSERT_TRUE(s.r.allFinite());
    EXPECT_NEAR(s.r.x(), -std::tan(s.eps) * std::cos(s.psi), 1e-12 * std::max(1.0, s.r.norm()));
    EXPECT_NEAR(s.r.y(), -std::tan(s.eps) * std::sin(s.psi), 1e-12 * std::max(1.0, s.r.norm()));
    if (s.translation) {
      EXPECT_EQ(s.omega, 0.0);
      EXPECT_NEAR(s.direction.norm(), 1.0, 1e-12);
      EXPECT_NEAR(s.direction.dot(s.r), 0.0, 1e-9 * std::max(1.0, s.r.norm()));
    } else {
      EXPECT_NE(s.omega, 0.0);
    }
  }
}

TEST(Feasible, SpotRotationIsTangential) {
  const WheelLayout layout = test::square_layout();
  const auto flags = feasible({0.0, 0.0}, layout);
  ASSERT_TRUE(flags.has_value());
  const auto m = make_rotation_maneuver({0.0, 0.0}, 1.0, 1.0, layout);
  ASSERT_TRUE(m.has_value());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const Eigen::Vector2d& w = layout.wheels[i].position;
    // Steering perpendicular to the wheel's radius, within limits.
    const double s = m->wheel_steer[i];
    EXPECT_NEAR(std::cos(s) * w.x() + std::sin(s) * w.y(), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(s), kPi / 2 - std::atan2(std::abs(w.y()), std::abs(w.x())), 1e-12);
  }
}

TEST(Feasible, BicycleRequiresIcmOnRearAxle) {
  WheelLayout layout = test::square_layout(90.0, 0.001);
  EXPECT_FALSE(feasible({0.3, 1.0}, layout).has_value());
  EXPECT_FALSE(feasible({-0.5, 0.2}, layout).has_value());
  // On the rear axle line (x = -0.6 in the body frame, so r.x = 0.6).
  EXPECT_TRUE(feasible({0.6, 2.0}, layout).has_value());
}

TEST(Feasible, SixtyDegreeBandIsExcluded) {
  const WheelLayout l90 = test::square_layout(90.0, 90.0);
  const WheelLayout l60 = test::square_layout(60.0, 60.0);
  const Eigen::Vector2d r(0.3, 0.0);
  EXPECT_TRUE(feasible(r, l90).has_value());
  EXPECT_FALSE(feasible(r, l60).has_value());
  EXPECT_FALSE(oracle_feasible(r, l60));
}

TEST(Feasible, AgreesWithOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (double lim : {90.0, 75.0, 60.0, 30.0}) {
    const WheelLayout layout = test::square_layout(lim, lim);
    for (int i = 0; i < 2000; ++i) {
      const Eigen::Vector2d r(u(rng), u(rng));
      EXPECT_EQ(feasible(r, layout).has_value(), oracle_feasible(r, layout)) << r.transpose();
    }
  }
}

TEST(ForwardSimulate, QuarterArc) {
  const auto step = forward_simulate(BodyState{}, {0.0, -1.0}, kPi / 2, 1.0, test::square_layout());
  ASSERT_TRUE(step.has_value());
  EXPECT_NEAR(step->successor.x, 1.0, 1e-12);
  EXPECT_NEAR(step->successor.y, 1.0, 1e-12);
  EXPECT_NEAR(step->successor.theta, kPi / 2, 1e-12);
}

TEST(ForwardSimulate, SpotRotation) {
  const auto step = forward_simulate(BodyState{}, {0.0, 0.0}, 1.0, 0.5, test::square_layout());
  ASSERT_TRUE(step.has_value());
  EXPECT_NEAR(step->successor.x, 0.0, 1e-15);
  EXPECT_NEAR(step->successor.y, 0.0, 1e-15);
  EXPECT_NEAR(step->successor.theta, 0.5, 1e-15);
}

TEST(ForwardSimulate, NearStraightArc) {
  const IcmSampleSet set = sample_icm_grid(SearchConfig{});
  const double radius = std::tan(set.eps_values.back());
  const Eigen::Vector2d r(0.0, -radius);
  const auto step = forward_simulate(BodyState{}, r, 1.0 / radius, 1.0, test::square_layout());
  ASSERT_TRUE(step.has_value());
  const Eigen::Vector2d p(step->successor.x, step->successor.y);
  EXPECT_NEAR(p.norm(), 1.0, 1e-6);
  // Lateral drift of the endpoint from the initial velocity direction.
  EXPECT_LE(std::abs(p.y()), 1.0 / (2 * radius) + 1e-12);
}

TEST(ForwardSimulate, SuccessorVelocityMatchesIcm) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const WheelLayout layout = test::square_layout();
  int tested = 0;
  while (tested < 300) {
    BodyState from;
    from.x = u(rng);
    from.y = u(rng);
    from.theta = 3 * u(rng);
    const Eigen::Vector2d r(u(rng), u(rng));
    const double omega = u(rng);
    if (std::abs(omega) < 1e-3) continue;
    const auto step = forward_simulate(from, r, omega, std::abs(u(rng)), layout);
    if (!step) continue;
    const Eigen::Vector2d v = body_velocity_from_icm({r}, omega, step->successor.theta);
    EXPECT_NEAR(step->successor.vx, v.x(), 1e-9);
    EXPECT_NEAR(step->successor.vy, v.y(), 1e-9);
    EXPECT_NEAR(step->successor.omega, omega, 1e-15);
    // The world-frame ICM is fixed during the motion.
    const Eigen::Vector2d c0 = from.position() - rotation(from.theta) * r;
    const Eigen::Vector2d c1 = step->successor.position() - rotation(step->successor.theta) * r;
    EXPECT_LE((c0 - c1).norm(), 1e-9);
    ++tested;
  }
}

TEST(StepCost, Examples) {
  WheelLayout layout = test::square_layout();
  layout.max_wheel_accel = 2.0;
  layout.max_steer_rate = 1.0;
  Limits limits;
  limits.v_max = 2.0;
  limits.yaw_rate_max = 1.0;
  Weights weights;
  const WheelState a{{0.0, 0.1, 0.0, 0.0}, {0.0, 0.5, 0.0, 0.0}};
  const WheelState b{{0.3, 0.1, -0.2, 0.0}, {1.0, 0.5, 0.2, 0.0}};
  const StepCost c = step_cost(a, b, 1.0, 0.2, layout, limits, weights);
  EXPECT_NEAR(c.t_w, std::sqrt(0.25 + 0.09), 1e-12);
  EXPECT_NEAR(c.t_w, 0.5831, 1e-4);
  EXPECT_NEAR(c.t_body, 0.5, 1e-12);
  EXPECT_NEAR(c.total, 0.5831, 1e-4);

  EXPECT_EQ(step_cost(a, a, 0.0, 0.0, layout, limits, weights).total, 0.0);

  weights.k_vw = 0.0;
  weights.k_delta = 2.0;
  const StepCost d = step_cost(a, b, 1.0, 0.2, layout, limits, weights);
  EXPECT_NEAR(d.total, std::max(std::sqrt(2.0) * 0.3, 0.5), 1e-12);
}

TEST(StepCost, SteerDifferenceIsWrapped) {
  const WheelLayout layout = test::square_layout();
  const WheelState a{{kPi - 0.05, 0, 0, 0}, {0, 0, 0, 0}};
  const WheelState b{{-kPi + 0.05, 0, 0, 0}, {0, 0, 0, 0}};
  EXPECT_NEAR(step_cost(a, b, 0.0, 0.0, layout, Limits{}, Weights{}).t_delta, 0.1, 1e-12);
}

TEST(Heuristic, Examples) {
  Limits limits;
  limits.v_max = 2.0;
  limits.yaw_rate_max = 0.5;
  EXPECT_NEAR(heuristic({0, 0, 0.3}, {3, 4, 0.3}, limits, 1.0), 2.5, 1e-12);
  EXPECT_NEAR(heuristic({0, 0, 0.3}, {3, 4, 0.3}, limits, 0.7), 0.7 * 2.5, 1e-12);
  EXPECT_EQ(heuristic({1, 2, 3}, {1, 2, 3}, limits, 1.0), 0.0);
  EXPECT_NEAR(heuristic({0, 0, 0}, {0, 0, 1}, limits, 1.0), 2.0, 1e-12);
  // Heading differences are wrapped.
  EXPECT_NEAR(heuristic({0, 0, 0}, {0, 0, 2 * kPi + 0.25}, limits, 1.0), 0.5, 1e-12);
}

TEST(Plan, StraightDrive) {
  const Scenario sc = test::load_named("straight.txt");
  const InitialTrajectory t = plan(sc);
  const double bound = 5.0 / sc.limits.v_max;
  EXPECT_GE(t.total_time, bound * 0.8);
  EXPECT_LE(t.total_time, bound * 1.2);
  for (const auto& k : t.knots) {
    EXPECT_NEAR(k.state.y, 0.0, 1e-9);
    EXPECT_NEAR(k.state.theta, 0.0, 1e-9);
  }
}

TEST(Plan, GoalEqualsStart) {
  Scenario sc = test::empty_scenario();
  sc.goal = sc.start;
  const InitialTrajectory t = plan(sc);
  ASSERT_EQ(t.knots.size(), 1u);
  EXPECT_EQ(t.total_time, 0.0);
}

TEST(Plan, EnclosedGoalHasNoPath) {
  // 8 m square map with a ring of occupied cells around the goal.
  const int n = 40;
  const double res = 0.2;
  std::vector<bool> cells(n * n, false);
  const Eigen::Vector2d origin(-4.0, -4.0);
  const Eigen::Vector2d goal(2.0, 0.0);
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      const double d = (origin + Eigen::Vector2d(ix + 0.5, iy + 0.5) * res - goal).norm();
      if (d > 1.3 && d < 1.7) cells[iy * n + ix] = true;
    }
  }
  Scenario sc = test::empty_scenario();
  sc.grid = OccupancyGrid(n, n, res, origin, cells);
  sc.start.x = -2.5;
  sc.goal.x = goal.x();
  sc.footprint = {0.5, 0.4, 0.0};
  ASSERT_NO_THROW(sc.validate());
  try {
    plan(sc);
    FAIL() << "expected NoPath";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoPath);
    EXPECT_NE(std::string(e.what()).find("expanding"), std::string::npos);
  }
}

TEST(Plan, ExpansionBudget) {
  Scenario sc = test::load_named("parking.txt");
  sc.search.max_expansions = 5;
  try {
    plan(sc);
    FAIL() << "expected NoPath";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoPath);
  }
}

class PlanProperties : public ::testing::TestWithParam<const char*> {};

TEST_P(PlanProperties, Invariants) {
  const Scenario sc = test::load_named(GetParam());
  const WheelLayout layout = sc.search_layout();
  const InitialTrajectory t = plan(sc);
  ASSERT_GE(t.knots.size(), 2u);

  // Start, goal tolerance and timing.
  const auto s0 = state_array(t.knots.front().state), start = state_array(sc.start);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(s0[i], start[i]);
  const BodyState& end = t.knots.back().state;
  EXPECT_LE(std::hypot(end.x - sc.goal.x, end.y - sc.goal.y), sc.search.goal_pos_tol + 1e-9);
  EXPECT_LE(std::abs(wrap_angle(end.theta - sc.goal.theta)), sc.search.goal_heading_tol + 1e-9);
  EXPECT_NEAR(t.total_time, total_time(t.knots), 1e-12);
  const double h = heuristic({sc.start.x, sc.start.y, sc.start.theta}, {end.x, end.y, end.theta},
                             sc.limits, 1.0);
  EXPECT_GE(t.total_time, h - 1e-9);

  for (std::size_t k = 0; k < t.knots.size(); ++k) {
    const TrajectoryKnot& knot = t.knots[k];
    // Steering within limits.
    ASSERT_EQ(knot.wheel_steer.size(), layout.size());
    for (std::size_t i = 0; i < layout.size(); ++i) {
      EXPECT_TRUE(steer_within(knot.wheel_steer[i], layout.wheels[i])) << "knot " << k << " wheel " << i;
    }
    // Collision-free knots and nonnegative durations.
    EXPECT_FALSE(collides(sc.grid, sc.footprint, {knot.state.x, knot.state.y, knot.state.theta}));
    EXPECT_GE(knot.dt, 0.0);
    if (k + 1 < t.knots.size()) {
      EXPECT_GT(knot.dt, 0.0);
    }
    // Phase bookkeeping.
    if (k > 0) {
      const TrajectoryKnot& prev = t.knots[k - 1];
      const bool changed = prev.direction_flags != knot.direction_flags;
      EXPECT_EQ(knot.phase, prev.phase + (changed ? 1 : 0));
      if (changed) {
        EXPECT_TRUE(prev.keyframe);
        EXPECT_TRUE(knot.keyframe);
      }
    }
  }
  EXPECT_TRUE(t.knots.front().keyframe);
  EXPECT_TRUE(t.knots.back().keyframe);
}

TEST_P(PlanProperties, Deterministic) {
  const Scenario sc = test::load_named(GetParam());
  const InitialTrajectory a = plan(sc);
  const InitialTrajectory b = plan(sc);
  EXPECT_EQ(write_trajectory(a.knots), write_trajectory(b.knots));
  EXPECT_EQ(a.nodes_expanded, b.nodes_expanded);
}

INSTANTIATE_TEST_SUITE_P(Scenarios, PlanProperties, ::testing::ValuesIn(kScenarios));

TEST(ManeuverLibrary, WithinLimitsAndCap) {
  SearchConfig cfg;
  const IcmSampleSet set = sample_icm_grid(cfg);
  for (double lim : {90.0, 75.0, 60.0}) {
    const WheelLayout layout = test::square_layout(lim, lim);
    const auto lib = build_maneuver_library(set, layout, Limits{}, cfg);
    ASSERT_FALSE(lib.empty());
    for (const Maneuver& m : lib) {
      EXPECT_LE(m.arc_length, cfg.arc_cap + 1e-9);
      for (std::size_t i = 0; i < layout.size(); ++i) {
        EXPECT_TRUE(steer_within(m.wheel_steer[i], layout.wheels[i]));
      }
    }
  }
}

}  // namespace
}  // namespace caws
