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

// Trajectory smoothing by direct transcription.
//
// Decision variables: K knot states x_k = (x, y, theta, vx, vy, omega), K-1
// controls u_k = (ax, ay, alpha) and K-1 step durations dt_k. Consecutive
// knots are tied by one RK4 step of the double-integrator dynamics. Wheel
// steering constraints are polynomial in the wheel velocity, so a wheel at
// rest is an ordinary point of the program.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <tuple>
#include <type_traits>
#include <vector>

#include "caws/error.hpp"
#include "caws/grid.hpp"
#include "caws/kinematics.hpp"
#include "caws/nlp_solver.hpp"
#include "caws/scenario.hpp"
#include "caws/search.hpp"
#include "caws/trajectory.hpp"

namespace caws {

/// One classical RK4 step of d/dt (x, y, theta, vx, vy, omega) =
/// (vx, vy, omega, ax, ay, alpha) with the control held constant.
template <typename T>
std::array<T, 6> rk4(const T* x, const T* u, const T& dt) {
  auto f = [&](const std::array<T, 6>& s) {
    return std::array<T, 6>{s[3], s[4], s[5], u[0], u[1], u[2]};
  };
  std::array<T, 6> s0;
  for (int i = 0; i < 6; ++i) s0[i] = x[i];
  auto axpy = [](const std::array<T, 6>& a, const T& h, const std::array<T, 6>& b) {
    std::array<T, 6> r;
    for (int i = 0; i < 6; ++i) r[i] = a[i] + h * b[i];
    return r;
  };
  const T half = dt * 0.5;
  const auto k1 = f(s0);
  const auto k2 = f(axpy(s0, half, k1));
  const auto k3 = f(axpy(s0, half, k2));
  const auto k4 = f(axpy(s0, dt, k3));
  std::array<T, 6> out;
  for (int i = 0; i < 6; ++i) {
    out[i] = s0[i] + dt * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
  }
  return out;
}

inline std::array<double, 6> state_array(const BodyState& s) {
  return {s.x, s.y, s.theta, s.vx, s.vy, s.omega};
}

inline BodyState state_from(const double* a) { return {a[0], a[1], a[2], a[3], a[4], a[5]}; }

inline BodyState rk4_step(const BodyState& x, const BodyControl& u, double dt) {
  const auto s = state_array(x);
  const double c[3] = {u.ax, u.ay, u.alpha};
  const auto out = rk4(s.data(), c, dt);
  return state_from(out.data());
}

inline Eigen::Matrix<double, 6, 1> continuity_residual(const BodyState& x, const BodyControl& u,
                                                       double dt, const BodyState& next) {
  const BodyState pred = rk4_step(x, u, dt);
  Eigen::Matrix<double, 6, 1> r;
  r << next.x - pred.x, next.y - pred.y, next.theta - pred.theta, next.vx - pred.vx,
      next.vy - pred.vy, next.omega - pred.omega;
  return r;
}

/// Steering-cone residual; feasible iff <= 0. The first term is the product of
/// cross products with both limit directions, the second rejects the mirrored
/// cone that the product alone also admits.
template <typename T>
void steer_limit_terms(const T& vx, const T& vy, double lower, double upper, T& cone,
                       T& half_plane) {
  cone = (vx * std::sin(upper) - vy * std::cos(upper)) *
         (vx * std::sin(lower) - vy * std::cos(lower));
  const double mid = 0.5 * (lower + upper);
  half_plane = -(vx * std::cos(mid) + vy * std::sin(mid));
}

/// Scalar steering-limit residual of the body-frame wheel velocity v_rw,
/// rolling direction D_w. Feasible iff <= 0.
inline double steer_limit_residual(const Eigen::Vector2d& v_rw, int direction, double lower,
                                   double upper) {
  const double vx = direction * v_rw.x();
  const double vy = direction * v_rw.y();
  double cone = 0.0;
  double half = 0.0;
  steer_limit_terms(vx, vy, lower, upper, cone, half);
  if (upper - lower >= kPi - 1e-12) return half;
  return std::max(cone, half);
}

/// Steering-rate residual between consecutive knots; feasible iff >= 0.
inline double steer_rate_residual(const Eigen::Vector2d& v_t, const Eigen::Vector2d& v_prev,
                                  int d_t, int d_prev, double rate_limit, double dt) {
  return (d_t * v_t).dot(d_prev * v_prev) - v_t.norm() * v_prev.norm() * std::cos(rate_limit * dt);
}

/// Zero iff the body is at rest wherever the phase changes.
inline double mode_keyframe_residual(double speed, int m_prev, int m_here, int m_next) {
  return speed * (std::abs(m_here - m_next) + std::abs(m_here - m_prev));
}

struct ConstraintReport {
  double continuity = 0.0;
  double steer_limit = 0.0;
  double steer_rate = 0.0;
  double mode_keyframe = 0.0;
  double dt_bounds = 0.0;
  double boundary = 0.0;
  double wheel_speed = 0.0;
  double wheel_accel = 0.0;
  double control_bounds = 0.0;
  double objective = 0.0;
  int iterations = 0;

  double max_residual() const {
    return std::max({continuity, steer_limit, steer_rate, mode_keyframe, dt_bounds, boundary,
                     wheel_speed, wheel_accel, control_bounds});
  }

  /// (name, value) for every residual family, in a fixed order.
  std::vector<std::pair<std::string, double>> families() const {
    return {{"continuity", continuity},       {"steer_limit", steer_limit},
            {"steer_rate", steer_rate},       {"mode_keyframe", mode_keyframe},
            {"dt_bounds", dt_bounds},         {"boundary", boundary},
            {"wheel_speed", wheel_speed},     {"wheel_accel", wheel_accel},
            {"control_bounds", control_bounds}};
  }
};

enum class SolveStatus { kConverged, kMaxIterations, kInfeasible };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kConverged:
      return "Converged";
    case SolveStatus::kMaxIterations:
      return "MaxIterations";
    case SolveStatus::kInfeasible:
      return "Infeasible";
  }
  return "Unknown";
}

struct OptimizedTrajectory {
  std::vector<TrajectoryKnot> knots;
  double total_time = 0.0;
  ConstraintReport report;
  SolveStatus status = SolveStatus::kConverged;
  std::string message;
};

struct SolveOptions {
  int max_iterations = 3000;
  double feas_tol = 1e-6;
  double opt_tol = 1e-6;
};

/// Transcribed program: reference knots (the warm start), fixed boundary
/// states, direction flags and phases per knot.
struct OptProblem {
  std::vector<TrajectoryKnot> reference;
  BodyState start;
  BodyState goal;
  WheelLayout layout;
  Limits limits;
  Weights weights;

  int knots() const { return static_cast<int>(reference.size()); }
  int state_index(int k, int j) const { return 6 * k + j; }
  int control_index(int k, int j) const { return 6 * knots() + 3 * k + j; }
  int dt_index(int k) const { return 9 * knots() - 3 + k; }
  int size() const { return 10 * knots() - 4; }

  std::vector<double> pack(const std::vector<TrajectoryKnot>& ks) const {
    std::vector<double> v(size(), 0.0);
    for (int k = 0; k < knots(); ++k) {
      const auto s = state_array(ks[k].state);
      for (int j = 0; j < 6; ++j) v[state_index(k, j)] = s[j];
      if (k + 1 < knots()) {
        v[control_index(k, 0)] = ks[k].control.ax;
        v[control_index(k, 1)] = ks[k].control.ay;
        v[control_index(k, 2)] = ks[k].control.alpha;
        v[dt_index(k)] = ks[k].dt;
      }
    }
    return v;
  }

  /// Knots from a variable vector; flags and phases come from the reference.
  std::vector<TrajectoryKnot> unpack(const std::vector<double>& v) const {
    std::vector<TrajectoryKnot> out = reference;
    for (int k = 0; k < knots(); ++k) {
      out[k].state = state_from(&v[state_index(k, 0)]);
      if (k + 1 < knots()) {
        out[k].control = {v[control_index(k, 0)], v[control_index(k, 1)], v[control_index(k, 2)]};
        out[k].dt = v[dt_index(k)];
      } else {
        out[k].control = {};
        out[k].dt = 0.0;
      }
    }
    refresh_wheel_fields(out, layout);
    return out;
  }
};

/// Problem from an initial trajectory; the last knot is replaced by the goal
/// (heading unwrapped to the nearest turn of the reference).
inline OptProblem make_problem(const std::vector<TrajectoryKnot>& initial, const Scenario& sc) {
  OptProblem p;
  p.reference = initial;
  p.start = sc.start;
  p.goal = sc.goal;
  if (!initial.empty()) {
    const double turns = std::round((initial.back().state.theta - sc.goal.theta) / (2.0 * kPi));
    p.goal.theta = sc.goal.theta + 2.0 * kPi * turns;
  }
  p.layout = sc.layout;
  p.limits = sc.limits;
  p.weights = sc.weights;
  assign_phases(p.reference);
  return p;
}

// Objective pieces, generic over double and Jet2.
template <typename T>
T tracking_term(const T& x, const T& y, const T& th, const Pose2& ref, const Weights& w) {
  const T dx = x - ref.x;
  const T dy = y - ref.y;
  const T dth = th - ref.theta;
  return w.task * (dx * dx + dy * dy + w.heading * (dth * dth));
}

template <typename T>
T effort_time_term(const T* u, const T& dt, const Weights& w) {
  return (w.effort[0] * (u[0] * u[0]) + w.effort[1] * (u[1] * u[1]) + w.effort[2] * (u[2] * u[2])) *
             dt +
         dt;
}

/// Objective of a knot sequence against the problem's reference.
inline double objective(const OptProblem& p, const std::vector<TrajectoryKnot>& ks) {
  double j = 0.0;
  for (int k = 0; k < p.knots(); ++k) {
    const BodyState& r = p.reference[k].state;
    j += tracking_term(ks[k].state.x, ks[k].state.y, ks[k].state.theta, Pose2{r.x, r.y, r.theta},
                       p.weights);
    if (k + 1 < p.knots()) {
      const double u[3] = {ks[k].control.ax, ks[k].control.ay, ks[k].control.alpha};
      j += effort_time_term(u, ks[k].dt, p.weights);
    }
  }
  return j;
}

namespace detail {

// (m/s)^2; wheel speeds well below this no longer scale the steering-rate
// residual down.
inline constexpr double kRateSpeedScale2 = 1e-4;

inline bool steer_cone_active(const Wheel& w) { return w.steer_upper - w.steer_lower < kPi - 1e-12; }
inline bool steer_half_plane_active(const Wheel& w) {
  return w.steer_upper - w.steer_lower <= kPi + 1e-12;
}

}  // namespace detail

/// Residual families of a knot sequence (all >= 0, zero when satisfied).
inline ConstraintReport constraint_report(const std::vector<TrajectoryKnot>& ks,
                                          const BodyState& start, const BodyState& goal,
                                          const WheelLayout& layout, const Limits& limits) {
  ConstraintReport r;
  const int n = static_cast<int>(ks.size());
  if (n == 0) return r;
  auto phase = [&](int k) { return ks[std::clamp(k, 0, n - 1)].phase; };
  for (int k = 0; k < n; ++k) {
    const BodyState& s = ks[k].state;
    if (k + 1 < n) {
      const auto c = continuity_residual(s, ks[k].control, ks[k].dt, ks[k + 1].state);
      r.continuity = std::max(r.continuity, c.cwiseAbs().maxCoeff());
      r.dt_bounds = std::max({r.dt_bounds, limits.dt_min - ks[k].dt, ks[k].dt - limits.dt_max});
      const BodyControl& u = ks[k].control;
      r.control_bounds = std::max({r.control_bounds, std::abs(u.ax) - limits.accel_max,
                                   std::abs(u.ay) - limits.accel_max,
                                   std::abs(u.alpha) - limits.yaw_accel_max});
    }
    r.mode_keyframe = std::max(
        r.mode_keyframe, mode_keyframe_residual(std::hypot(s.vx, s.vy), phase(k - 1), phase(k),
                                                phase(k + 1)));
    for (std::size_t i = 0; i < layout.size(); ++i) {
      const Wheel& w = layout.wheels[i];
      const int d = ks[k].direction_flags[i];
      Eigen::Vector2d v;
      wheel_body_velocity(s.theta, s.vx, s.vy, s.omega, w.position, v.x(), v.y());
      r.wheel_speed = std::max(r.wheel_speed, v.norm() - layout.max_wheel_speed);
      if (detail::steer_half_plane_active(w)) {
        r.steer_limit =
            std::max(r.steer_limit, steer_limit_residual(v, d, w.steer_lower, w.steer_upper));
      }
      if (k > 0) {
        const BodyState& sp = ks[k - 1].state;
        Eigen::Vector2d vp;
        wheel_body_velocity(sp.theta, sp.vx, sp.vy, sp.omega, w.position, vp.x(), vp.y());
        r.steer_rate = std::max(
            r.steer_rate, -steer_rate_residual(v, vp, d, ks[k - 1].direction_flags[i],
                                               layout.max_steer_rate, ks[k - 1].dt));
      }
      // Wheel acceleration at both ends of every interval.
      for (int e = 0; e < 2 && k + 1 < n; ++e) {
        const BodyState& se = ks[k + e].state;
        const BodyControl& u = ks[k].control;
        Eigen::Vector2d a;
        wheel_world_acceleration(se.theta, se.omega, u.ax, u.ay, u.alpha, w.position, a.x(),
                                 a.y());
        r.wheel_accel = std::max(r.wheel_accel, a.norm() - layout.max_wheel_accel);
      }
    }
  }
  // Across a stop the wheels turn while at rest: the directions before and
  // after must be reachable within the whole stop duration.
  for (const auto& [first, last] : stop_runs(ks)) {
    double span = 0.0;
    for (std::size_t j = first - 1; j <= last; ++j) span += ks[j].dt;
    const BodyState& sa = ks[first - 1].state;
    const BodyState& sb = ks[last + 1].state;
    for (std::size_t i = 0; i < layout.size(); ++i) {
      Eigen::Vector2d va, vb;
      wheel_body_velocity(sa.theta, sa.vx, sa.vy, sa.omega, layout.wheels[i].position, va.x(),
                          va.y());
      wheel_body_velocity(sb.theta, sb.vx, sb.vy, sb.omega, layout.wheels[i].position, vb.x(),
                          vb.y());
      const double reach = std::min(layout.max_steer_rate * span, kPi);
      r.steer_rate = std::max(
          r.steer_rate, -steer_rate_residual(vb, va, ks[last + 1].direction_flags[i],
                                             ks[first - 1].direction_flags[i], reach, 1.0));
    }
  }
  const auto s0 = state_array(ks.front().state);
  const auto sf = state_array(ks.back().state);
  const auto b0 = state_array(start);
  const auto bf = state_array(goal);
  for (int j = 0; j < 6; ++j) {
    const double e0 = j == 2 ? wrap_angle(s0[j] - b0[j]) : s0[j] - b0[j];
    const double ef = j == 2 ? wrap_angle(sf[j] - bf[j]) : sf[j] - bf[j];
    r.boundary = std::max({r.boundary, std::abs(e0), std::abs(ef)});
  }
  for (double* f : {&r.continuity, &r.steer_limit, &r.steer_rate, &r.mode_keyframe, &r.dt_bounds,
                    &r.boundary, &r.wheel_speed, &r.wheel_accel, &r.control_bounds}) {
    *f = std::max(*f, 0.0);
  }
  return r;
}

namespace detail {

/// Unit direction D_w v_w of a wheel at a reference knot.
inline Eigen::Vector2d reference_direction(const TrajectoryKnot& knot, const Wheel& w, int d) {
  Eigen::Vector2d v;
  const BodyState& s = knot.state;
  wheel_body_velocity(s.theta, s.vx, s.vy, s.omega, w.position, v.x(), v.y());
  return v.norm() > 0.0 ? Eigen::Vector2d(d * v.normalized()) : Eigen::Vector2d(1.0, 0.0);
}

}  // namespace detail

/// Steering across reference stops. The knot before a stop stays within one
/// interval of steering travel of the reference approach direction, the knot
/// after it within one interval of the departure direction, and the stop lasts
/// long enough to turn every wheel between the two. Call after the dt bounds
/// are set.
inline void add_stop_blocks(const OptProblem& p, NlpProblem& nlp) {
  const double rate = p.layout.max_steer_rate;
  for (const auto& [first, last] : stop_runs(p.reference)) {
    double turn = 0.0;
    for (std::size_t i = 0; i < p.layout.size(); ++i) {
      const Wheel& wheel = p.layout.wheels[i];
      const Eigen::Vector2d pos = wheel.position;
      const int da = p.reference[first - 1].direction_flags[i];
      const int db = p.reference[last + 1].direction_flags[i];
      const Eigen::Vector2d ra = detail::reference_direction(p.reference[first - 1], wheel, da);
      const Eigen::Vector2d rb = detail::reference_direction(p.reference[last + 1], wheel, db);
      turn = std::max(turn, std::acos(std::clamp(ra.dot(rb), -1.0, 1.0)));
      for (const auto& [knot, interval, dir, ref] :
           {std::tuple{first - 1, first - 1, da, ra}, std::tuple{last + 1, last, db, rb}}) {
        const int k = static_cast<int>(knot);
        const std::vector<int> vars{p.state_index(k, 2), p.state_index(k, 3), p.state_index(k, 4),
                                    p.state_index(k, 5), p.dt_index(static_cast<int>(interval))};
        const double d = dir;
        const Eigen::Vector2d r = ref;
        nlp.blocks.push_back(make_block<5>(
            BlockKind::kInequality, vars, 2, [pos, d, r, rate](const auto* x, auto* out) {
              using T = std::remove_cv_t<std::remove_reference_t<decltype(x[0])>>;
              using std::cos;
              using std::sqrt;
              T vx, vy;
              wheel_body_velocity(x[0], x[1], x[2], x[3], pos, vx, vy);
              const T dot = d * (vx * r.x() + vy * r.y());
              const T a2 = vx * vx + vy * vy;
              const T cs = cos(rate * x[4]);
              const T na = a2 + detail::kRateSpeedScale2;
              out[0] = -dot / sqrt(na);
              out[1] = (a2 * (cs * cs) - dot * dot) / na;
            }));
      }
    }
    // Each dwell interval carries an equal share of the turn.
    if (last == first) continue;
    const double share = turn / rate / static_cast<double>(last - first);
    for (std::size_t j = first; j < last; ++j) {
      double& lo = nlp.lower[p.dt_index(static_cast<int>(j))];
      lo = std::clamp(share, lo, nlp.upper[p.dt_index(static_cast<int>(j))]);
    }
  }
}

/// Assembles the program: bounds pin boundary states and keyframe speeds.
inline NlpProblem transcribe(const OptProblem& p) {
  NlpProblem nlp;
  const int K = p.knots();
  nlp.n = p.size();
  const double inf = std::numeric_limits<double>::infinity();
  nlp.lower.assign(nlp.n, -inf);
  nlp.upper.assign(nlp.n, inf);
  auto pin = [&](int i, double v) { nlp.lower[i] = nlp.upper[i] = v; };
  const auto s0 = state_array(p.start);
  const auto sf = state_array(p.goal);
  for (int j = 0; j < 6; ++j) {
    pin(p.state_index(0, j), s0[j]);
    pin(p.state_index(K - 1, j), sf[j]);
  }
  for (int k = 1; k + 1 < K; ++k) {
    if (is_phase_transition(p.reference, k) || at_rest(p.reference[k].state)) {
      // Mode switches and planned stops happen at a full stop, wheels included.
      for (int j = 3; j < 6; ++j) pin(p.state_index(k, j), 0.0);
    }
  }
  for (int k = 0; k + 1 < K; ++k) {
    nlp.lower[p.dt_index(k)] = p.limits.dt_min;
    nlp.upper[p.dt_index(k)] = p.limits.dt_max;
    for (int j = 0; j < 2; ++j) {
      nlp.lower[p.control_index(k, j)] = -p.limits.accel_max;
      nlp.upper[p.control_index(k, j)] = p.limits.accel_max;
    }
    nlp.lower[p.control_index(k, 2)] = -p.limits.yaw_accel_max;
    nlp.upper[p.control_index(k, 2)] = p.limits.yaw_accel_max;
  }

  const Weights w = p.weights;
  for (int k = 0; k < K; ++k) {
    const BodyState& rs = p.reference[k].state;
    const Pose2 ref{rs.x, rs.y, rs.theta};
    nlp.blocks.push_back(make_block<3>(
        BlockKind::kObjective, {p.state_index(k, 0), p.state_index(k, 1), p.state_index(k, 2)}, 1,
        [ref, w](const auto* x, auto* out) { out[0] = tracking_term(x[0], x[1], x[2], ref, w); }));
  }
  for (int k = 0; k + 1 < K; ++k) {
    nlp.blocks.push_back(make_block<4>(
        BlockKind::kObjective,
        {p.control_index(k, 0), p.control_index(k, 1), p.control_index(k, 2), p.dt_index(k)}, 1,
        [w](const auto* x, auto* out) { out[0] = effort_time_term(x, x[3], w); }));
  }

  // Continuity: x_{k+1} - RK4(x_k, u_k, dt_k) = 0.
  for (int k = 0; k + 1 < K; ++k) {
    std::vector<int> vars;
    for (int j = 0; j < 6; ++j) vars.push_back(p.state_index(k, j));
    for (int j = 0; j < 3; ++j) vars.push_back(p.control_index(k, j));
    vars.push_back(p.dt_index(k));
    for (int j = 0; j < 6; ++j) vars.push_back(p.state_index(k + 1, j));
    nlp.blocks.push_back(make_block<16>(BlockKind::kEquality, vars, 6, [](const auto* x, auto* out) {
      const auto next = rk4(x, x + 6, x[9]);
      for (int j = 0; j < 6; ++j) out[j] = x[10 + j] - next[j];
    }));
  }

  const double vmax2 = p.layout.max_wheel_speed * p.layout.max_wheel_speed;
  const double amax2 = p.layout.max_wheel_accel * p.layout.max_wheel_accel;
  for (std::size_t i = 0; i < p.layout.size(); ++i) {
    const Wheel wheel = p.layout.wheels[i];
    const Eigen::Vector2d pos = wheel.position;
    for (int k = 0; k < K; ++k) {
      const std::vector<int> vel{p.state_index(k, 2), p.state_index(k, 3), p.state_index(k, 4),
                                 p.state_index(k, 5)};
      // Wheel speed: |v_w|^2 <= max^2.
      nlp.blocks.push_back(
          make_block<4>(BlockKind::kInequality, vel, 1, [pos, vmax2](const auto* x, auto* out) {
            using T = std::remove_cv_t<std::remove_reference_t<decltype(x[0])>>;
            T vx, vy;
            wheel_body_velocity(x[0], x[1], x[2], x[3], pos, vx, vy);
            out[0] = (vx * vx + vy * vy - vmax2) / vmax2;
          }));
      // Steering limits on D_w v_w as two linear half-planes: v must lie
      // counterclockwise of the lower limit and clockwise of the upper one.
      const double d = p.reference[k].direction_flags[i];
      if (detail::steer_half_plane_active(wheel)) {
        const bool both = detail::steer_cone_active(wheel);
        const Eigen::Vector2d lo(std::cos(wheel.steer_lower), std::sin(wheel.steer_lower));
        const Eigen::Vector2d hi(std::cos(wheel.steer_upper), std::sin(wheel.steer_upper));
        nlp.blocks.push_back(make_block<4>(
            BlockKind::kInequality, vel, both ? 2 : 1, [pos, d, lo, hi, both](const auto* x, auto* out) {
              using T = std::remove_cv_t<std::remove_reference_t<decltype(x[0])>>;
              T vx, vy;
              wheel_body_velocity(x[0], x[1], x[2], x[3], pos, vx, vy);
              out[0] = -d * (lo.x() * vy - lo.y() * vx);
              if (both) out[1] = -d * (vx * hi.y() - vy * hi.x());
            }));
      }
      if (k + 1 == K) continue;
      // Wheel acceleration at both ends of the interval.
      for (int e = 0; e < 2; ++e) {
        const std::vector<int> vars{p.state_index(k + e, 2), p.state_index(k + e, 5),
                                    p.control_index(k, 0), p.control_index(k, 1),
                                    p.control_index(k, 2)};
        nlp.blocks.push_back(
            make_block<5>(BlockKind::kInequality, vars, 1, [pos, amax2](const auto* x, auto* out) {
              using T = std::remove_cv_t<std::remove_reference_t<decltype(x[0])>>;
              T ax, ay;
              wheel_world_acceleration(x[0], x[1], x[2], x[3], x[4], pos, ax, ay);
              out[0] = (ax * ax + ay * ay - amax2) / amax2;
            }));
      }
      // Steering rate between knots k and k + 1, squared angle form:
      // a.b >= 0 and (a.b)^2 >= |a|^2 |b|^2 cos^2(rate dt).
      const double da = p.reference[k + 1].direction_flags[i];
      const double db = p.reference[k].direction_flags[i];
      const double rate = p.layout.max_steer_rate;
      std::vector<int> vars = vel;
      for (int j = 2; j < 6; ++j) vars.push_back(p.state_index(k + 1, j));
      vars.push_back(p.dt_index(k));
      nlp.blocks.push_back(make_block<9>(
          BlockKind::kInequality, vars, 2, [pos, da, db, rate](const auto* x, auto* out) {
            using T = std::remove_cv_t<std::remove_reference_t<decltype(x[0])>>;
            using std::cos;
            using std::sqrt;
            T bx, by, ax, ay;
            wheel_body_velocity(x[0], x[1], x[2], x[3], pos, bx, by);
            wheel_body_velocity(x[4], x[5], x[6], x[7], pos, ax, ay);
            const T dot = (da * db) * (ax * bx + ay * by);
            const T cs = cos(rate * x[8]);
            const T a2 = ax * ax + ay * ay;
            const T b2 = bx * bx + by * by;
            // Positive normalization keeps the feasible set and makes the
            // residual roughly an angle deficit at any speed.
            const T na = a2 + detail::kRateSpeedScale2;
            const T nb = b2 + detail::kRateSpeedScale2;
            out[0] = -dot / sqrt(na * nb);
            out[1] = (a2 * b2 * (cs * cs) - dot * dot) / (na * nb);
          }));
    }
  }
  add_stop_blocks(p, nlp);
  return nlp;
}

/// First knot of every interval, sampled poses along each interval, checked
/// against the map.
inline bool trajectory_collides(const std::vector<TrajectoryKnot>& ks, const Scenario& sc) {
  const double step = 0.5 * sc.grid.resolution();
  const double radius = sc.footprint.circumradius();
  for (std::size_t k = 0; k < ks.size(); ++k) {
    const BodyState& s = ks[k].state;
    if (collides(sc.grid, sc.footprint, {s.x, s.y, s.theta})) return true;
    if (k + 1 == ks.size()) break;
    const BodyState& e = ks[k + 1].state;
    const double travel = std::hypot(e.x - s.x, e.y - s.y) + radius * std::abs(e.theta - s.theta);
    const int n = std::max(1, static_cast<int>(std::ceil(travel / step)));
    for (int j = 1; j < n; ++j) {
      const BodyState m = rk4_step(s, ks[k].control, ks[k].dt * j / n);
      if (collides(sc.grid, sc.footprint, {m.x, m.y, m.theta})) return true;
    }
  }
  return false;
}

/// Warm start: reference states, last knot at the goal, controls from finite
/// differences of the knot velocities.
inline std::vector<TrajectoryKnot> initial_guess(const OptProblem& p) {
  std::vector<TrajectoryKnot> ks = p.reference;
  ks.back().state = p.goal;
  for (std::size_t k = 0; k + 1 < ks.size(); ++k) {
    const double dt = std::clamp(ks[k].dt, p.limits.dt_min, p.limits.dt_max);
    ks[k].dt = dt;
    const BodyState& a = ks[k].state;
    const BodyState& b = ks[k + 1].state;
    ks[k].control = {std::clamp((b.vx - a.vx) / dt, -p.limits.accel_max, p.limits.accel_max),
                     std::clamp((b.vy - a.vy) / dt, -p.limits.accel_max, p.limits.accel_max),
                     std::clamp((b.omega - a.omega) / dt, -p.limits.yaw_accel_max,
                                p.limits.yaw_accel_max)};
  }
  ks.back().dt = 0.0;
  ks.back().control = {};
  return ks;
}

/// Smooths `initial` subject to the full constraint set.
inline OptimizedTrajectory solve(const std::vector<TrajectoryKnot>& initial, const Scenario& sc,
                                 const SolveOptions& options = {}) {
  if (initial.size() < 2) {
    throw Error(ErrorCode::kBadInitialGuess, "initial trajectory needs at least two knots");
  }
  const BodyState& s0 = initial.front().state;
  const auto a = state_array(s0);
  const auto b = state_array(sc.start);
  for (int j = 0; j < 6; ++j) {
    if (std::abs(a[j] - b[j]) > 1e-9) {
      throw Error(ErrorCode::kBadInitialGuess, "initial trajectory does not begin at the start state");
    }
  }
  const BodyState& sf = initial.back().state;
  if (std::hypot(sf.x - sc.goal.x, sf.y - sc.goal.y) > sc.search.goal_pos_tol + 1e-9 ||
      std::abs(wrap_angle(sf.theta - sc.goal.theta)) > sc.search.goal_heading_tol + 1e-9) {
    throw Error(ErrorCode::kBadInitialGuess, "initial trajectory does not end at the goal");
  }

  const OptProblem problem = make_problem(initial, sc);
  const NlpProblem nlp = transcribe(problem);
  NlpOptions nopt;
  nopt.max_iterations = options.max_iterations;
  nopt.feas_tol = options.feas_tol;
  nopt.opt_tol = options.opt_tol;
  auto report_violation = [&](const std::vector<double>& v) {
    return constraint_report(problem.unpack(v), problem.start, problem.goal, problem.layout,
                             problem.limits)
        .max_residual();
  };
  AugmentedLagrangian solver(nlp, nopt, report_violation);
  const NlpResult res = solver.solve(problem.pack(initial_guess(problem)));

  OptimizedTrajectory out;
  out.knots = problem.unpack(res.x);
  out.total_time = total_time(out.knots);
  out.report = constraint_report(out.knots, problem.start, problem.goal, problem.layout,
                                 problem.limits);
  out.report.objective = objective(problem, out.knots);
  out.report.iterations = res.iterations;
  if (res.status == NlpStatus::kConverged) {
    out.status = SolveStatus::kConverged;
  } else if (res.stalled && out.report.max_residual() > options.feas_tol) {
    out.status = SolveStatus::kInfeasible;
    out.message = "constraint residuals remain above tolerance";
  } else {
    out.status = SolveStatus::kMaxIterations;
    out.message = "iteration limit reached";
  }
  if (out.status == SolveStatus::kConverged && trajectory_collides(out.knots, sc)) {
    out.status = SolveStatus::kInfeasible;
    out.message = "smoothed trajectory collides with the map";
  }
  return out;
}

}  // namespace caws
