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

// Shared fixtures for the test binaries.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "caws/optimizer.hpp"
#include "caws/scenario.hpp"
#include "caws/trajectory.hpp"

namespace caws::test {

inline std::string scenario_path(const std::string& name) {
  return std::string(CAWS_SCENARIO_DIR) + "/" + name;
}

inline Scenario load_named(const std::string& name) { return load_scenario_file(scenario_path(name)); }

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Fresh scratch directory below the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const std::filesystem::path dir = std::filesystem::path(CAWS_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

struct CommandResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

/// Runs the command-line tool with `args`, capturing both output streams.
inline CommandResult run_cli(const std::string& args, const std::string& tag) {
  const std::filesystem::path dir = scratch_dir("cli_capture_" + tag);
  const std::string out = (dir / "stdout.txt").string();
  const std::string err = (dir / "stderr.txt").string();
  const std::string cmd = std::string("\"") + CAWS_CLI_PATH + "\" " + args + " >\"" + out +
                          "\" 2>\"" + err + "\"";
  const int status = std::system(cmd.c_str());
  CommandResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text(out);
  r.err = read_text(err);
  return r;
}

/// Four wheels at (+-0.6, +-0.4) with symmetric limits (degrees).
inline WheelLayout square_layout(double front_deg = 90.0, double rear_deg = 90.0) {
  WheelLayout layout;
  const double xs[] = {0.6, 0.6, -0.6, -0.6};
  const double ys[] = {0.4, -0.4, 0.4, -0.4};
  for (int i = 0; i < 4; ++i) {
    const double lim = (i < 2 ? front_deg : rear_deg) * kDegToRad;
    layout.wheels.push_back({Eigen::Vector2d(xs[i], ys[i]), -lim, lim});
  }
  layout.max_wheel_speed = 1.5;
  layout.max_wheel_accel = 1.0;
  layout.max_steer_rate = 1.0;
  return layout;
}

/// Empty square map of side `size` metres centred on the origin.
inline Scenario empty_scenario(double size = 20.0, double resolution = 0.2,
                               const WheelLayout& layout = square_layout()) {
  Scenario sc;
  const int cells = static_cast<int>(std::lround(size / resolution));
  sc.grid = OccupancyGrid(cells, cells, resolution, {-size / 2.0, -size / 2.0}, {});
  sc.layout = layout;
  sc.footprint.half_length = 0.8;
  sc.footprint.half_width = 0.55;
  sc.limits.v_max = 1.0;
  sc.limits.yaw_rate_max = 1.0;
  sc.limits.accel_max = 1.0;
  sc.limits.yaw_accel_max = 1.0;
  sc.limits.dt_min = 0.02;
  sc.limits.dt_max = 0.5;
  return sc;
}

/// A trajectory that already satisfies every constraint family, with the
/// scenario whose boundary states are its end points.
struct FeasibleCase {
  Scenario scenario;
  std::vector<TrajectoryKnot> knots;
};

/// Draws smooth constant-plus-ramp controls from rest, integrates them
/// exactly and keeps the result only if the full constraint report is clean.
inline std::optional<FeasibleCase> random_feasible_case(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_int_distribution<int> count(8, 16);
  std::uniform_real_distribution<double> step(0.15, 0.4);
  FeasibleCase c;
  c.scenario = empty_scenario();
  const Scenario& sc = c.scenario;
  const int K = count(rng);
  BodyState s;
  s.theta = kPi * unit(rng);
  const Eigen::Vector3d a0(0.3 * unit(rng), 0.3 * unit(rng), 0.2 * unit(rng));
  const Eigen::Vector3d a1(0.2 * unit(rng), 0.2 * unit(rng), 0.2 * unit(rng));
  for (int k = 0; k < K; ++k) {
    TrajectoryKnot knot;
    knot.state = s;
    if (k + 1 < K) {
      const Eigen::Vector3d u = a0 + a1 * (static_cast<double>(k) / K);
      knot.control = {u.x(), u.y(), u.z()};
      knot.dt = step(rng);
      s = rk4_step(s, knot.control, knot.dt);
    }
    c.knots.push_back(knot);
  }
  // Rolling directions: one per wheel, fixed by the first moving knot.
  std::vector<int> flags(sc.layout.size(), 1);
  for (std::size_t i = 0; i < sc.layout.size(); ++i) {
    const WheelMotion m = wheel_velocity(c.knots[1].state, sc.layout.wheels[i].position);
    if (m.v_body.x() < 0.0) flags[i] = -1;
  }
  for (auto& k : c.knots) k.direction_flags = flags;
  assign_phases(c.knots);
  refresh_wheel_fields(c.knots, sc.layout);
  c.scenario.start = c.knots.front().state;
  c.scenario.goal = c.knots.back().state;
  const ConstraintReport r =
      constraint_report(c.knots, sc.start, sc.goal, sc.layout, sc.limits);
  if (r.max_residual() > 1e-9 || trajectory_collides(c.knots, sc)) return std::nullopt;
  return c;
}

inline std::vector<FeasibleCase> feasible_cases(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<FeasibleCase> out;
  while (out.size() < n) {
    if (auto c = random_feasible_case(rng)) out.push_back(std::move(*c));
  }
  return out;
}

/// Worst relative mismatch between block derivatives and central
/// differences at `x` (step 1e-6 relative), normalized per block by the
/// largest derivative magnitude.
inline double worst_block_gradient_error(const NlpProblem& nlp, const std::vector<double>& x) {
  double worst = 0.0;
  Eigen::MatrixXd jac;
  std::vector<Eigen::MatrixXd> hess;
  for (const auto& b : nlp.blocks) {
    const int n = static_cast<int>(b->vars.size());
    std::vector<double> local(n), out(b->outputs), plus(b->outputs), minus(b->outputs);
    for (int i = 0; i < n; ++i) local[i] = x[b->vars[i]];
    b->derivatives(local.data(), out.data(), jac, hess);
    const double scale = std::max(1e-8, jac.cwiseAbs().maxCoeff());
    for (int i = 0; i < n; ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(local[i]));
      std::vector<double> xp = local, xm = local;
      xp[i] += h;
      xm[i] -= h;
      b->values(xp.data(), plus.data());
      b->values(xm.data(), minus.data());
      for (int o = 0; o < b->outputs; ++o) {
        const double fd = (plus[o] - minus[o]) / (xp[i] - xm[i]);
        worst = std::max(worst, std::abs(fd - jac(o, i)) / scale);
      }
    }
  }
  return worst;
}

}  // namespace caws::test
