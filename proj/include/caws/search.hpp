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

// Time-cost second-order Hybrid-A*.
//
// Maneuvers are constant-ICM motions sampled on a spherical grid
// (eps, psi) -> r = -tan(eps) (cos psi, sin psi) combined with yaw-rate
// samples. Each maneuver is kept only if every wheel can steer perpendicular
// to its ICM vector within its limits, for one of the two rolling directions.
// Nodes carry pose, body velocity and the per-wheel steering/speed of the
// maneuver that produced them; step costs and the heuristic are in seconds.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "caws/error.hpp"
#include "caws/grid.hpp"
#include "caws/kinematics.hpp"
#include "caws/scenario.hpp"
#include "caws/trajectory.hpp"

namespace caws {

struct IcmSample {
  double eps = 0.0;
  double psi = 0.0;
  double omega = 0.0;
  Eigen::Vector2d r = Eigen::Vector2d::Zero();
  // omega == 0 rows become pure translations along +/- the perpendicular of r.
  bool translation = false;
  Eigen::Vector2d direction = Eigen::Vector2d::Zero();
};

struct IcmSampleSet {
  std::vector<double> eps_values;
  std::vector<double> psi_values;
  std::vector<double> omega_values;
  double arc_cap = 0.0;
  std::vector<IcmSample> samples;
};

/// Perpendicular of v (rotation by +90 degrees).
inline Eigen::Vector2d perp(const Eigen::Vector2d& v) { return {-v.y(), v.x()}; }

inline IcmSampleSet sample_icm_grid(const SearchConfig& config) {
  IcmSampleSet set;
  const int n_eps = config.n_eps;
  const int n_psi = config.n_psi;
  const double offset = config.eps_offset;
  for (int i = 0; i <= n_eps; ++i) {
    set.eps_values.push_back((kPi * i + offset) / (2.0 * n_eps + offset));
  }
  for (int i = 0; i <= n_psi; ++i) {
    set.psi_values.push_back(-kPi + 2.0 * kPi * i / n_psi);
  }
  const int n_omega = config.n_omega;
  for (int i = 0; i < n_omega; ++i) {
    set.omega_values.push_back(n_omega == 1 ? 0.0 : -kPi / 2.0 + kPi * i / (n_omega - 1));
  }
  // An even sample count misses omega = 0; add it so that straight
  // translations are always available.
  if (std::none_of(set.omega_values.begin(), set.omega_values.end(),
                   [](double w) { return std::abs(w) < 1e-12; })) {
    set.omega_values.insert(std::upper_bound(set.omega_values.begin(), set.omega_values.end(), 0.0),
                            0.0);
  }
  set.arc_cap = config.arc_cap;
  for (double eps : set.eps_values) {
    for (double psi : set.psi_values) {
      const Eigen::Vector2d unit(std::cos(psi), std::sin(psi));
      const Eigen::Vector2d r = -std::tan(eps) * unit;
      for (double omega : set.omega_values) {
        if (std::abs(omega) < 1e-12) {
          for (double sign : {1.0, -1.0}) {
            IcmSample s{eps, psi, 0.0, r, true, sign * perp(-unit)};
            set.samples.push_back(s);
          }
        } else {
          set.samples.push_back({eps, psi, omega, r, false, Eigen::Vector2d::Zero()});
        }
      }
    }
  }
  return set;
}

inline bool steer_within(double steer, const Wheel& wheel, double tol = 1e-9) {
  return steer >= wheel.steer_lower - tol && steer <= wheel.steer_upper + tol;
}

struct WheelAssignment {
  std::vector<double> steer;  // body frame
  std::vector<int> flags;     // +1: wheel rolls along dirs[i]; -1: against it
};

/// Picks, per wheel, the rolling direction whose steering angle is within
/// limits, preferring the smaller |steer| and then forward rolling.
inline std::optional<WheelAssignment> assign_directions(
    const std::vector<Eigen::Vector2d>& dirs, const WheelLayout& layout) {
  WheelAssignment out;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const Wheel& wheel = layout.wheels[i];
    const Eigen::Vector2d& v = dirs[i];
    if (v.norm() < 1e-12) {
      // The wheel sits on the ICM: any steering works.
      out.steer.push_back(std::clamp(0.0, wheel.steer_lower, wheel.steer_upper));
      out.flags.push_back(1);
      continue;
    }
    const double fwd = std::atan2(v.y(), v.x());
    const double bwd = wrap_angle(fwd + kPi);
    const bool fwd_ok = steer_within(fwd, wheel);
    const bool bwd_ok = steer_within(bwd, wheel);
    if (!fwd_ok && !bwd_ok) return std::nullopt;
    const bool use_bwd = bwd_ok && (!fwd_ok || std::abs(bwd) < std::abs(fwd) - 1e-12);
    out.steer.push_back(use_bwd ? bwd : fwd);
    out.flags.push_back(use_bwd ? -1 : 1);
  }
  return out;
}

/// Direction flags (relative to a positive yaw rate) for rotating about the
/// ICM at body position -r, or nullopt when some wheel cannot steer there.
inline std::optional<std::vector<int>> feasible(const Eigen::Vector2d& r,
                                                const WheelLayout& layout) {
  std::vector<Eigen::Vector2d> dirs;
  for (const Wheel& w : layout.wheels) dirs.push_back(perp(r + w.position));
  auto assignment = assign_directions(dirs, layout);
  if (!assignment) return std::nullopt;
  return assignment->flags;
}

/// Constant-ICM motion primitive, body frame.
struct Maneuver {
  bool translation = false;
  Eigen::Vector2d r = Eigen::Vector2d::Zero();
  double omega = 0.0;
  Eigen::Vector2d velocity_body = Eigen::Vector2d::Zero();
  double duration = 0.0;
  double arc_length = 0.0;
  double rotation = 0.0;
  Pose2 delta_pose;                  // displacement in the start body frame
  BodyState end_velocity;            // vx, vy (start body frame) and omega at the end
  std::vector<double> wheel_steer;
  std::vector<double> wheel_speed;
  std::vector<int> direction_flags;
};

inline BodyState apply_maneuver(const BodyState& from, const Maneuver& m, double tau);

namespace detail {
inline Maneuver with_displacement(Maneuver m) {
  const BodyState end = apply_maneuver(BodyState{}, m, m.duration);
  m.delta_pose = {end.x, end.y, end.theta};
  m.end_velocity = BodyState{0.0, 0.0, 0.0, end.vx, end.vy, end.omega};
  return m;
}
}  // namespace detail

inline std::optional<Maneuver> make_rotation_maneuver(const Eigen::Vector2d& r, double omega,
                                                      double duration,
                                                      const WheelLayout& layout) {
  std::vector<Eigen::Vector2d> dirs;
  for (const Wheel& w : layout.wheels) dirs.push_back(perp(r + w.position));
  auto assignment = assign_directions(dirs, layout);
  if (!assignment) return std::nullopt;
  Maneuver m;
  m.r = r;
  m.omega = omega;
  m.velocity_body = omega * perp(r);
  m.duration = duration;
  m.arc_length = std::abs(omega) * r.norm() * duration;
  m.rotation = omega * duration;
  m.wheel_steer = assignment->steer;
  const int sign = omega >= 0.0 ? 1 : -1;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const int flag = assignment->flags[i] * sign;
    m.direction_flags.push_back(flag);
    m.wheel_speed.push_back(flag * std::abs(omega) * dirs[i].norm());
  }
  return detail::with_displacement(std::move(m));
}

inline std::optional<Maneuver> make_translation_maneuver(const Eigen::Vector2d& velocity_body,
                                                         double duration,
                                                         const WheelLayout& layout) {
  std::vector<Eigen::Vector2d> dirs(layout.size(), velocity_body);
  auto assignment = assign_directions(dirs, layout);
  if (!assignment) return std::nullopt;
  Maneuver m;
  m.translation = true;
  m.velocity_body = velocity_body;
  m.duration = duration;
  m.arc_length = velocity_body.norm() * duration;
  m.wheel_steer = assignment->steer;
  m.direction_flags = assignment->flags;
  for (int flag : m.direction_flags) m.wheel_speed.push_back(flag * velocity_body.norm());
  return detail::with_displacement(std::move(m));
}

/// State after executing `m` for `tau` seconds from `from`: an exact rigid
/// rotation about the world-frame ICM (or a straight translation).
inline BodyState apply_maneuver(const BodyState& from, const Maneuver& m, double tau) {
  BodyState out;
  if (m.translation) {
    const Eigen::Vector2d v = rotation(from.theta) * m.velocity_body;
    out.x = from.x + v.x() * tau;
    out.y = from.y + v.y() * tau;
    out.theta = from.theta;
    out.vx = v.x();
    out.vy = v.y();
    out.omega = 0.0;
    return out;
  }
  const Eigen::Vector2d center = from.position() - rotation(from.theta) * m.r;
  out.theta = from.theta + m.omega * tau;
  const Eigen::Vector2d p = center + rotation(out.theta) * m.r;
  const Eigen::Vector2d v = body_velocity_from_icm({m.r}, m.omega, out.theta);
  out.x = p.x();
  out.y = p.y();
  out.vx = v.x();
  out.vy = v.y();
  out.omega = m.omega;
  return out;
}

struct SimulatedStep {
  Maneuver maneuver;
  BodyState successor;
};

/// Rotates `from` about the ICM given by body-frame radius `r` at yaw rate
/// `omega` for `duration`. Nullopt when (r, layout) is infeasible.
inline std::optional<SimulatedStep> forward_simulate(const BodyState& from,
                                                     const Eigen::Vector2d& r, double omega,
                                                     double duration,
                                                     const WheelLayout& layout) {
  auto m = make_rotation_maneuver(r, omega, duration, layout);
  if (!m) return std::nullopt;
  return SimulatedStep{*m, apply_maneuver(from, *m, duration)};
}

/// Factor (<= 1) that brings body speed, yaw rate and wheel speeds within
/// limits.
inline double timing_scale(const Maneuver& m, const Limits& limits, const WheelLayout& layout) {
  double scale = 1.0;
  const double speed = m.velocity_body.norm();
  if (speed > limits.v_max) scale = std::min(scale, limits.v_max / speed);
  if (std::abs(m.omega) > limits.yaw_rate_max) {
    scale = std::min(scale, limits.yaw_rate_max / std::abs(m.omega));
  }
  for (double s : m.wheel_speed) {
    if (std::abs(s) > layout.max_wheel_speed) {
      scale = std::min(scale, layout.max_wheel_speed / std::abs(s));
    }
  }
  return scale;
}

/// Slows `m` down by `scale` keeping its geometry.
inline Maneuver retime(Maneuver m, double scale) {
  if (scale >= 1.0) return m;
  m.omega *= scale;
  m.velocity_body *= scale;
  m.duration /= scale;
  for (double& s : m.wheel_speed) s *= scale;
  return detail::with_displacement(std::move(m));
}

/// Feasible maneuvers for every sample; durations follow the arc-length cap
/// and are stretched so the motion respects the speed limits.
inline std::vector<Maneuver> build_maneuver_library(const IcmSampleSet& set,
                                                    const WheelLayout& layout,
                                                    const Limits& limits,
                                                    const SearchConfig& config) {
  std::vector<Maneuver> out;
  auto duplicate = [&](const Maneuver& m) {
    for (const Maneuver& o : out) {
      if (o.translation == m.translation && o.omega == m.omega &&
          (o.r - m.r).norm() <= 1e-12 * std::max(1.0, m.r.norm()) &&
          (o.velocity_body - m.velocity_body).norm() <= 1e-12) {
        return true;
      }
    }
    return false;
  };
  for (const IcmSample& s : set.samples) {
    std::optional<Maneuver> m;
    if (s.translation) {
      const double speed = std::min(limits.v_max, layout.max_wheel_speed);
      const double duration = std::min(set.arc_cap / speed, config.search_dt_max);
      m = make_translation_maneuver(s.direction * speed, duration, layout);
    } else {
      const double speed = std::abs(s.omega) * s.r.norm();
      const double duration =
          speed > 0.0 ? std::min(set.arc_cap / speed, config.search_dt_max) : config.search_dt_max;
      m = make_rotation_maneuver(s.r, s.omega, duration, layout);
    }
    if (!m) continue;
    Maneuver timed = retime(*m, timing_scale(*m, limits, layout));
    if (!duplicate(timed)) out.push_back(std::move(timed));
  }
  // Equal-cost ties resolve in library order: prefer straight lines over
  // nearly straight arcs.
  std::stable_partition(out.begin(), out.end(), [](const Maneuver& m) { return m.translation; });
  return out;
}

struct WheelState {
  std::vector<double> steer;
  std::vector<double> speed;
};

struct StepCost {
  double t_vw = 0.0;
  double t_delta = 0.0;
  double t_w = 0.0;
  double t_body = 0.0;
  double total = 0.0;
};

/// Time-denominated transition cost between consecutive wheel states.
inline StepCost step_cost(const WheelState& prev, const WheelState& next, double distance,
                          double rotation_change, const WheelLayout& layout,
                          const Limits& limits, const Weights& weights) {
  double dv = 0.0;
  double dd = 0.0;
  for (std::size_t i = 0; i < prev.steer.size(); ++i) {
    dv = std::max(dv, std::abs(next.speed[i] - prev.speed[i]));
    dd = std::max(dd, std::abs(wrap_angle(next.steer[i] - prev.steer[i])));
  }
  StepCost c;
  c.t_vw = dv / layout.max_wheel_accel;
  c.t_delta = dd / layout.max_steer_rate;
  c.t_w = std::sqrt(weights.k_vw * c.t_vw * c.t_vw + weights.k_delta * c.t_delta * c.t_delta);
  c.t_body = std::max(std::abs(distance) / limits.v_max, std::abs(rotation_change) / limits.yaw_rate_max);
  c.total = std::max(c.t_w, c.t_body);
  return c;
}

/// Straight-line time-to-go with the heading difference wrapped.
inline double heuristic(const Pose2& pose, const Pose2& goal, const Limits& limits, double k_h) {
  const double t_v = std::hypot(goal.x - pose.x, goal.y - pose.y) / limits.v_max;
  const double t_theta = std::abs(wrap_angle(goal.theta - pose.theta)) / limits.yaw_rate_max;
  return k_h * std::max(t_v, t_theta);
}

struct SearchNode {
  BodyState state;  // pose and world-frame body velocity
  int maneuver = -1;  // index into the planner's maneuver table, -1 at start
  int phase = 0;
  double g = 0.0;
  double h = 0.0;
  int parent = -1;
};

struct InitialTrajectory {
  std::vector<TrajectoryKnot> knots;
  double total_time = 0.0;
  int nodes_expanded = 0;
};

namespace detail {

struct NodeKey {
  int ix;
  int iy;
  int heading;
  int octant;
  std::uint32_t flags;
  bool operator==(const NodeKey&) const = default;
};

struct NodeKeyHash {
  std::size_t operator()(const NodeKey& k) const {
    std::uint64_t h = 1469598103934665603ull;
    for (std::uint64_t v : {std::uint64_t(std::uint32_t(k.ix)), std::uint64_t(std::uint32_t(k.iy)),
                            std::uint64_t(k.heading), std::uint64_t(k.octant), std::uint64_t(k.flags)}) {
      h ^= v;
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

struct OpenEntry {
  double f;
  double h;
  std::uint64_t seq;
  int node;
  // priority_queue is a max-heap; invert for (f, h, seq) ascending.
  bool operator<(const OpenEntry& o) const {
    if (f != o.f) return f > o.f;
    if (h != o.h) return h > o.h;
    return seq > o.seq;
  }
};

inline std::uint32_t flag_signature(const std::vector<int>& flags) {
  std::uint32_t s = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i] < 0) s |= 1u << i;
  }
  return s;
}

}  // namespace detail

/// Connects `from` to `goal` with a single constant-ICM motion, if feasible.
inline std::optional<Maneuver> goal_shot(const BodyState& from, const BodyState& goal,
                                         const WheelLayout& layout, const Limits& limits) {
  const double dtheta = wrap_angle(goal.theta - from.theta);
  const Eigen::Vector2d p0 = from.position();
  const Eigen::Vector2d p1 = goal.position();
  std::optional<Maneuver> m;
  if (std::abs(dtheta) < 1e-6) {
    const Eigen::Vector2d d = rotation(from.theta).transpose() * (p1 - p0);
    const double dist = d.norm();
    if (dist < 1e-12) return std::nullopt;
    const double speed = std::min(limits.v_max, layout.max_wheel_speed);
    m = make_translation_maneuver(d / dist * speed, dist / speed, layout);
    return m;
  }
  // Rotation center c with p1 = c + R(dtheta) (p0 - c).
  const Eigen::Matrix2d a = Eigen::Matrix2d::Identity() - rotation(dtheta);
  const Eigen::Vector2d c = a.inverse() * (p1 - rotation(dtheta) * p0);
  const Eigen::Vector2d r = rotation(from.theta).transpose() * (p0 - c);
  m = make_rotation_maneuver(r, dtheta > 0 ? 1.0 : -1.0, std::abs(dtheta), layout);
  if (!m) return std::nullopt;
  return retime(*m, timing_scale(*m, limits, layout));
}

/// Hybrid-A* from scenario.start to scenario.goal. Throws kNoPath.
inline InitialTrajectory plan(const Scenario& scenario) {
  const WheelLayout layout = scenario.search_layout();
  const SearchConfig& cfg = scenario.search;
  const Limits& limits = scenario.limits;
  const std::size_t nw = layout.size();
  const Pose2 goal_pose{scenario.goal.x, scenario.goal.y, scenario.goal.theta};

  std::vector<Maneuver> maneuvers =
      build_maneuver_library(sample_icm_grid(cfg), layout, limits, cfg);
  const std::size_t library_size = maneuvers.size();

  auto at_goal = [&](const BodyState& s) {
    return std::hypot(s.x - goal_pose.x, s.y - goal_pose.y) <= cfg.goal_pos_tol &&
           std::abs(wrap_angle(s.theta - goal_pose.theta)) <= cfg.goal_heading_tol;
  };

  InitialTrajectory result;
  if (at_goal(scenario.start)) {
    TrajectoryKnot k;
    k.state = scenario.start;
    k.direction_flags.assign(nw, 1);
    result.knots.push_back(k);
    refresh_wheel_fields(result.knots, layout);
    assign_phases(result.knots);
    return result;
  }

  const double pos_res = scenario.position_resolution();
  const double heading_res = 2.0 * kPi / cfg.heading_bins;
  const std::vector<int> forward_flags(nw, 1);
  auto flags_of = [&](const SearchNode& n) -> const std::vector<int>& {
    return n.maneuver < 0 ? forward_flags : maneuvers[n.maneuver].direction_flags;
  };
  auto key_of = [&](const SearchNode& n) {
    detail::NodeKey k;
    k.ix = static_cast<int>(std::floor(n.state.x / pos_res));
    k.iy = static_cast<int>(std::floor(n.state.y / pos_res));
    const double th = wrap_angle(n.state.theta) + kPi;
    k.heading = static_cast<int>(std::floor(th / heading_res)) % cfg.heading_bins;
    const double speed = std::hypot(n.state.vx, n.state.vy);
    if (speed < 1e-9) {
      k.octant = 8;
    } else {
      const double a = std::atan2(n.state.vy, n.state.vx) + kPi;
      k.octant = static_cast<int>(std::floor(a / (kPi / 4.0))) % 8;
    }
    k.flags = detail::flag_signature(flags_of(n));
    return k;
  };
  const WheelState rest{std::vector<double>(nw, 0.0), std::vector<double>(nw, 0.0)};
  auto wheels_of = [&](const SearchNode& n) {
    if (n.maneuver < 0) return rest;
    const Maneuver& m = maneuvers[n.maneuver];
    return WheelState{m.wheel_steer, m.wheel_speed};
  };
  const double sweep_radius = scenario.footprint.circumradius();
  const double sweep_step = 0.5 * scenario.grid.resolution();
  auto sweep_clear = [&](const BodyState& from, const Maneuver& m) {
    const double travel = m.arc_length + std::abs(m.rotation) * sweep_radius;
    const int n = std::max(1, static_cast<int>(std::ceil(travel / sweep_step)));
    for (int j = 1; j <= n; ++j) {
      const BodyState s = apply_maneuver(from, m, m.duration * j / n);
      if (collides(scenario.grid, scenario.footprint, {s.x, s.y, s.theta})) return false;
    }
    return true;
  };

  std::vector<SearchNode> nodes;
  std::priority_queue<detail::OpenEntry> open;
  std::unordered_set<detail::NodeKey, detail::NodeKeyHash> closed;
  std::unordered_map<detail::NodeKey, double, detail::NodeKeyHash> best_g;
  std::uint64_t seq = 0;

  SearchNode root;
  root.state = scenario.start;
  root.h = heuristic({root.state.x, root.state.y, root.state.theta}, goal_pose, limits,
                     scenario.weights.k_h);
  nodes.push_back(root);
  open.push({root.h, root.h, seq++, 0});
  best_g[key_of(root)] = 0.0;

  auto push_successor = [&](int parent, int maneuver_index, bool check_closed) {
    const SearchNode& p = nodes[parent];
    const Maneuver& m = maneuvers[maneuver_index];
    SearchNode s;
    s.state = apply_maneuver(p.state, m, m.duration);
    s.maneuver = maneuver_index;
    s.parent = parent;
    const detail::NodeKey key = key_of(s);
    if (check_closed && closed.count(key)) return;
    const StepCost c =
        step_cost(wheels_of(p), WheelState{m.wheel_steer, m.wheel_speed}, m.arc_length,
                  m.rotation, layout, limits, scenario.weights);
    s.g = p.g + c.total;
    if (check_closed) {
      const auto it = best_g.find(key);
      if (it != best_g.end() && it->second <= s.g) return;
    }
    if (!sweep_clear(p.state, m)) return;
    s.phase = p.phase + (p.maneuver >= 0 && flags_of(p) != m.direction_flags ? 1 : 0);
    s.h = heuristic({s.state.x, s.state.y, s.state.theta}, goal_pose, limits, scenario.weights.k_h);
    if (check_closed) best_g[key] = s.g;
    nodes.push_back(s);
    open.push({s.g + s.h, s.h, seq++, static_cast<int>(nodes.size() - 1)});
  };

  int expanded = 0;
  int goal_node = -1;
  while (!open.empty()) {
    const detail::OpenEntry top = open.top();
    open.pop();
    const SearchNode node = nodes[top.node];
    if (at_goal(node.state)) {
      goal_node = top.node;
      break;
    }
    const detail::NodeKey key = key_of(node);
    if (closed.count(key)) continue;
    closed.insert(key);
    if (++expanded > cfg.max_expansions) break;

    if (std::hypot(node.state.x - goal_pose.x, node.state.y - goal_pose.y) <= cfg.shot_radius) {
      if (auto shot = goal_shot(node.state, scenario.goal, layout, limits)) {
        maneuvers.push_back(*shot);
        push_successor(top.node, static_cast<int>(maneuvers.size() - 1), false);
      }
    }
    for (std::size_t i = 0; i < library_size; ++i) {
      push_successor(top.node, static_cast<int>(i), true);
    }
  }
  if (goal_node < 0) {
    throw Error(ErrorCode::kNoPath,
                "no path found after expanding " + std::to_string(expanded) + " nodes");
  }

  std::vector<int> chain;
  for (int n = goal_node; n >= 0; n = nodes[n].parent) chain.push_back(n);
  std::reverse(chain.begin(), chain.end());

  TrajectoryKnot first;
  first.state = scenario.start;
  first.direction_flags =
      chain.size() > 1 ? maneuvers[nodes[chain[1]].maneuver].direction_flags : forward_flags;
  result.knots.push_back(first);
  for (std::size_t c = 1; c < chain.size(); ++c) {
    const Maneuver& m = maneuvers[nodes[chain[c]].maneuver];
    const BodyState from = nodes[chain[c - 1]].state;
    if (m.direction_flags != result.knots.back().direction_flags) {
      // Rolling directions change: stop, then dwell at rest long enough for
      // every wheel to turn to its new steering angle.
      TrajectoryKnot& last = result.knots.back();
      last.state.vx = last.state.vy = last.state.omega = 0.0;
      last.wheel_speed.assign(nw, 0.0);
      double turn = 0.0;
      for (std::size_t i = 0; i < nw; ++i) {
        turn = std::max(turn, std::abs(wrap_angle(m.wheel_steer[i] - last.wheel_steer[i])));
      }
      const double need = turn / layout.max_steer_rate;
      const int steps = std::max(1, static_cast<int>(std::ceil(need / limits.dt_max - 1e-9)));
      const double dwell_dt = std::clamp(need / steps, limits.dt_min, limits.dt_max);
      TrajectoryKnot dwell = last;
      dwell.direction_flags = m.direction_flags;
      dwell.wheel_steer = m.wheel_steer;
      last.dt = dwell_dt;
      for (int j = 0; j < steps; ++j) {
        dwell.dt = j + 1 < steps ? dwell_dt : 0.0;
        result.knots.push_back(dwell);
      }
    }
    const int n = std::max(1, static_cast<int>(std::ceil(m.duration / cfg.knot_dt - 1e-9)));
    for (int j = 1; j <= n; ++j) {
      result.knots.back().dt = m.duration / n;
      TrajectoryKnot k;
      k.state = apply_maneuver(from, m, m.duration * j / n);
      k.direction_flags = m.direction_flags;
      k.wheel_steer = m.wheel_steer;
      k.wheel_speed = m.wheel_speed;
      result.knots.push_back(k);
    }
  }
  // The start knot is at rest: hold the steering of the first maneuver.
  result.knots.front().wheel_speed.assign(nw, 0.0);
  result.knots.front().wheel_steer =
      result.knots.size() > 1 ? result.knots[1].wheel_steer : std::vector<double>(nw, 0.0);
  assign_phases(result.knots);
  result.total_time = total_time(result.knots);
  result.nodes_expanded = expanded;
  return result;
}

}  // namespace caws
