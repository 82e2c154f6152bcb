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

#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "caws/kinematics.hpp"

namespace caws {

/// One time sample of a trajectory. `dt` and `control` describe the interval
/// from this knot to the next one (zero on the last knot).
struct TrajectoryKnot {
  BodyState state;
  BodyControl control;
  double dt = 0.0;
  int phase = 0;
  bool keyframe = false;
  std::vector<int> direction_flags;
  std::vector<double> wheel_steer;  // body frame, rad
  std::vector<double> wheel_speed;  // signed by direction flag, m/s
};

inline double total_time(const std::vector<TrajectoryKnot>& knots) {
  double t = 0.0;
  for (const auto& k : knots) t += k.dt;
  return t;
}

/// Phase ids from direction-flag change points; keyframes at the first and
/// last knot of every phase.
inline void assign_phases(std::vector<TrajectoryKnot>& knots) {
  for (std::size_t k = 0; k < knots.size(); ++k) {
    knots[k].phase =
        k == 0 ? 0
               : knots[k - 1].phase +
                     (knots[k].direction_flags != knots[k - 1].direction_flags ? 1 : 0);
  }
  for (std::size_t k = 0; k < knots.size(); ++k) {
    const bool first = k == 0 || knots[k - 1].phase != knots[k].phase;
    const bool last = k + 1 == knots.size() || knots[k + 1].phase != knots[k].phase;
    knots[k].keyframe = first || last;
  }
}

/// True where the phase changes on either side of the knot.
inline bool is_phase_transition(const std::vector<TrajectoryKnot>& knots, std::size_t k) {
  const bool before = k > 0 && knots[k - 1].phase != knots[k].phase;
  const bool after = k + 1 < knots.size() && knots[k + 1].phase != knots[k].phase;
  return before || after;
}

/// Exactly zero body velocity.
inline bool at_rest(const BodyState& s) { return s.vx == 0.0 && s.vy == 0.0 && s.omega == 0.0; }

/// Maximal runs [first, last] of interior knots at rest whose neighbors
/// move: stops in the middle of a trajectory.
inline std::vector<std::pair<std::size_t, std::size_t>> stop_runs(
    const std::vector<TrajectoryKnot>& knots) {
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  const std::size_t n = knots.size();
  for (std::size_t k = 1; k + 1 < n;) {
    if (!at_rest(knots[k].state)) {
      ++k;
      continue;
    }
    std::size_t m = k;
    while (m + 2 < n && at_rest(knots[m + 1].state)) ++m;
    if (!at_rest(knots[k - 1].state) && !at_rest(knots[m + 1].state)) runs.emplace_back(k, m);
    k = m + 1;
  }
  return runs;
}

/// Recomputes per-wheel steering and speed from the knot states. Where a wheel
/// is (nearly) at rest its steering holds the previous defined value within
/// the same phase, and otherwise takes the next defined value (the direction
/// the wheel turns to while stopped).
inline void refresh_wheel_fields(std::vector<TrajectoryKnot>& knots,
                                 const WheelLayout& layout) {
  const std::size_t nw = layout.size();
  std::vector<std::vector<bool>> defined(knots.size(), std::vector<bool>(nw, false));
  for (std::size_t k = 0; k < knots.size(); ++k) {
    auto& knot = knots[k];
    if (knot.direction_flags.size() != nw) knot.direction_flags.assign(nw, 1);
    knot.wheel_steer.assign(nw, 0.0);
    knot.wheel_speed.assign(nw, 0.0);
    for (std::size_t i = 0; i < nw; ++i) {
      const WheelMotion m = wheel_velocity(knot.state, layout.wheels[i].position,
                                           knot.direction_flags[i]);
      knot.wheel_speed[i] = m.speed;
      knot.wheel_steer[i] = m.steer_body;
      defined[k][i] = m.steer_defined;
    }
  }
  const std::size_t n = knots.size();
  for (std::size_t i = 0; i < nw; ++i) {
    std::vector<std::optional<std::size_t>> prev(n), next(n);
    std::optional<std::size_t> last;
    for (std::size_t k = 0; k < n; ++k) {
      prev[k] = last;
      if (defined[k][i]) last = k;
    }
    last.reset();
    for (std::size_t k = n; k-- > 0;) {
      next[k] = last;
      if (defined[k][i]) last = k;
    }
    std::vector<double> steer(n);
    for (std::size_t k = 0; k < n; ++k) steer[k] = knots[k].wheel_steer[i];
    for (std::size_t k = 0; k < n; ++k) {
      if (defined[k][i]) continue;
      if (prev[k] && knots[*prev[k]].phase == knots[k].phase) {
        knots[k].wheel_steer[i] = steer[*prev[k]];
      } else if (next[k]) {
        knots[k].wheel_steer[i] = steer[*next[k]];
      } else if (prev[k]) {
        knots[k].wheel_steer[i] = steer[*prev[k]];
      }
    }
  }
}

}  // namespace caws
