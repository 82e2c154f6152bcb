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

// Kinematic trajectory follower and tracking metrics.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "caws/kinematics.hpp"
#include "caws/optimizer.hpp"
#include "caws/trajectory.hpp"

namespace caws {

// Reference wheel speed (m/s) below which the follower treats a wheel as
// stopped and pre-steers toward the next motion.
inline constexpr double kRestWheelSpeed = 1e-4;

/// Body-frame twist: linear velocity of the control center and yaw rate.
struct Twist {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;
};

/// Pose after moving with a constant body twist for `tau` seconds.
inline Pose2 se2_exp(const Pose2& pose, const Twist& xi, double tau) {
  const double phi = xi.omega * tau;
  double dx, dy;
  if (std::abs(phi) < 1e-9) {
    dx = xi.vx * tau - 0.5 * xi.vy * tau * phi;
    dy = xi.vy * tau + 0.5 * xi.vx * tau * phi;
  } else {
    const double s = std::sin(phi) / xi.omega;
    const double c = (1.0 - std::cos(phi)) / xi.omega;
    dx = s * xi.vx - c * xi.vy;
    dy = c * xi.vx + s * xi.vy;
  }
  const double ct = std::cos(pose.theta);
  const double st = std::sin(pose.theta);
  return {pose.x + ct * dx - st * dy, pose.y + st * dx + ct * dy, pose.theta + phi};
}

/// Constant body twist taking `a` to `b` in time `tau`.
inline Twist se2_log(const Pose2& a, const Pose2& b, double tau) {
  const double ct = std::cos(a.theta);
  const double st = std::sin(a.theta);
  const double ex = ct * (b.x - a.x) + st * (b.y - a.y);
  const double ey = -st * (b.x - a.x) + ct * (b.y - a.y);
  const double phi = b.theta - a.theta;
  Twist xi;
  xi.omega = phi / tau;
  if (std::abs(phi) < 1e-9) {
    xi.vx = (ex + 0.5 * phi * ey) / tau;
    xi.vy = (ey - 0.5 * phi * ex) / tau;
    return xi;
  }
  // Inverse of V(phi) = [[s, -c], [c, s]] / phi with s = sin, c = 1 - cos.
  const double s = std::sin(phi) / phi;
  const double c = (1.0 - std::cos(phi)) / phi;
  const double det = s * s + c * c;
  xi.vx = (s * ex + c * ey) / det / tau;
  xi.vy = (-c * ex + s * ey) / det / tau;
  return xi;
}

/// Continuous-time view of a knot sequence.
struct ReferencePath {
  std::function<BodyState(double)> state_at;
  std::function<std::vector<int>(double)> flags_at;
  double duration = 0.0;
};

namespace detail {

inline std::size_t interval_at(const std::vector<TrajectoryKnot>& ks, double t, double& tau) {
  double t0 = 0.0;
  for (std::size_t k = 0; k + 1 < ks.size(); ++k) {
    if (t <= t0 + ks[k].dt || k + 2 == ks.size()) {
      tau = std::clamp(t - t0, 0.0, ks[k].dt);
      return k;
    }
    t0 += ks[k].dt;
  }
  tau = 0.0;
  return 0;
}

inline std::vector<int> flags_at(const std::vector<TrajectoryKnot>& ks, double t) {
  double tau = 0.0;
  const std::size_t k = interval_at(ks, t, tau);
  // Use the flags of the knot the motion is heading into unless it is a stop.
  if (k + 1 < ks.size() && tau > 0.0) return ks[k + 1].direction_flags;
  return ks[k].direction_flags;
}

}  // namespace detail

/// Controls held over each interval (the smoothed trajectory's own dynamics).
inline ReferencePath smooth_reference(const std::vector<TrajectoryKnot>& ks) {
  ReferencePath r;
  r.duration = total_time(ks);
  r.state_at = [ks](double t) {
    if (ks.size() < 2) return ks.front().state;
    double tau = 0.0;
    const std::size_t k = detail::interval_at(ks, t, tau);
    return rk4_step(ks[k].state, ks[k].control, tau);
  };
  r.flags_at = [ks](double t) { return detail::flags_at(ks, t); };
  return r;
}

/// Constant body twist over each interval, matching consecutive knot poses
/// exactly; knot velocities and controls are ignored. This is how the raw
/// search output moves.
inline ReferencePath piecewise_twist_reference(const std::vector<TrajectoryKnot>& ks) {
  ReferencePath r;
  r.duration = total_time(ks);
  r.state_at = [ks](double t) {
    if (ks.size() < 2) return ks.front().state;
    double tau = 0.0;
    const std::size_t k = detail::interval_at(ks, t, tau);
    const BodyState& a = ks[k].state;
    const BodyState& b = ks[k + 1].state;
    const Pose2 pa{a.x, a.y, a.theta};
    const Twist xi = ks[k].dt > 0.0 ? se2_log(pa, {b.x, b.y, b.theta}, ks[k].dt) : Twist{};
    const Pose2 p = se2_exp(pa, xi, tau);
    const Eigen::Vector2d v = rotation(p.theta) * Eigen::Vector2d(xi.vx, xi.vy);
    return BodyState{p.x, p.y, p.theta, v.x(), v.y(), xi.omega};
  };
  r.flags_at = [ks](double t) { return detail::flags_at(ks, t); };
  return r;
}

struct ActuationLimits {
  double steer_rate = 1.0;   // rad/s
  double wheel_accel = 1.0;  // m/s^2
  double wheel_speed = 1.5;  // m/s

  static ActuationLimits from(const WheelLayout& layout) {
    return {layout.max_steer_rate, layout.max_wheel_accel, layout.max_wheel_speed};
  }
};

struct FollowSample {
  double t = 0.0;
  BodyState commanded;  // reference state at t
  BodyState achieved;   // world-frame pose and velocity
  Twist achieved_twist; // body frame, over the tick starting at t
  std::vector<double> commanded_steer;
  std::vector<double> commanded_speed;
  std::vector<double> steer;        // achieved, body frame
  std::vector<double> speed;        // achieved, signed
  std::vector<double> ideal_steer;  // from the achieved rigid motion
};

struct FollowRecord {
  double period = 0.02;
  std::vector<FollowSample> samples;
};

struct FollowerOptions {
  double period = 0.02;          // s
  double feedback_gain = 1.0;    // 1/s, pose error to body twist
};

/// Largest period not above `preferred` that samples every interval of the
/// knot sequence at least twice.
inline double follower_period(const std::vector<TrajectoryKnot>& ks, double preferred = 0.02) {
  double period = preferred;
  for (std::size_t k = 0; k + 1 < ks.size(); ++k) {
    if (ks[k].dt > 0.0) period = std::min(period, 0.5 * ks[k].dt);
  }
  return period;
}

/// Moves `current` toward `target` by at most `max_step` (angles wrapped).
inline double rate_limit_angle(double current, double target, double max_step) {
  return wrap_angle(current + std::clamp(wrap_angle(target - current), -max_step, max_step));
}

inline double rate_limit(double current, double target, double max_step) {
  return current + std::clamp(target - current, -max_step, max_step);
}

/// Least-squares rigid body twist from body-frame wheel velocities.
inline Twist rigid_fit(const WheelLayout& layout, const std::vector<Eigen::Vector2d>& v) {
  const int n = static_cast<int>(layout.size());
  Eigen::MatrixXd a(2 * n, 3);
  Eigen::VectorXd b(2 * n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d& w = layout.wheels[i].position;
    a.row(2 * i) << 1.0, 0.0, -w.y();
    a.row(2 * i + 1) << 0.0, 1.0, w.x();
    b[2 * i] = v[i].x();
    b[2 * i + 1] = v[i].y();
  }
  const Eigen::Vector3d x = a.completeOrthogonalDecomposition().solve(b);
  return {x[0], x[1], x[2]};
}

/// Tracks `ref` with rate-limited wheels. Each tick: body twist = reference
/// motion over the tick plus proportional pose feedback; wheel commands from
/// that twist; achieved wheel states step toward the commands under the
/// limits; the body moves with the rigid fit of the achieved wheel velocities.
inline FollowRecord rollout(const ReferencePath& ref, const WheelLayout& layout,
                            const ActuationLimits& limits, const FollowerOptions& options = {}) {
  FollowRecord rec;
  rec.period = options.period;
  if (!(ref.duration > 0.0)) return rec;
  const double h = options.period;
  const std::size_t nw = layout.size();
  const int ticks = static_cast<int>(std::ceil(ref.duration / h - 1e-9));

  BodyState start = ref.state_at(0.0);
  Pose2 pose{start.x, start.y, start.theta};
  std::vector<double> steer(nw, 0.0), speed(nw, 0.0), cmd_steer(nw, 0.0);

  auto feedforward = [&](double t) {
    const BodyState a = ref.state_at(std::min(t, ref.duration));
    const BodyState b = ref.state_at(std::min(t + h, ref.duration));
    return se2_log({a.x, a.y, a.theta}, {b.x, b.y, b.theta}, h);
  };
  auto wheel_velocity_of = [&](const Twist& xi, std::size_t i) {
    const Eigen::Vector2d& w = layout.wheels[i].position;
    return Eigen::Vector2d(xi.vx - xi.omega * w.y(), xi.vy + xi.omega * w.x());
  };
  // Reference steering per tick, and the next defined one for ticks where
  // the reference wheel is at rest: stopped wheels turn toward it early.
  std::vector<Twist> ff(ticks + 1);
  std::vector<std::vector<int>> tick_flags(ticks + 1);
  std::vector<std::vector<bool>> ff_moving(ticks + 1, std::vector<bool>(nw, false));
  std::vector<std::vector<double>> ahead(ticks + 1, std::vector<double>(nw, 0.0));
  std::vector<bool> have(nw, false);
  std::vector<double> next(nw, 0.0);
  for (int j = 0; j <= ticks; ++j) {
    ff[j] = feedforward(j * h);
    tick_flags[j] = ref.flags_at(std::min((j + 0.5) * h, ref.duration));
  }
  for (int j = ticks; j >= 0; --j) {
    for (std::size_t i = 0; i < nw; ++i) {
      const Eigen::Vector2d v = wheel_velocity_of(ff[j], i);
      if (v.norm() > kRestWheelSpeed) {
        const double d = tick_flags[j][i] >= 0 ? 1.0 : -1.0;
        next[i] = wrap_angle(std::atan2(d * v.y(), d * v.x()));
        have[i] = true;
        ff_moving[j][i] = true;
      }
      ahead[j][i] = have[i] ? next[i] : cmd_steer[i];
    }
  }
  // After the last moving tick, wheels hold the last defined steering.
  std::fill(have.begin(), have.end(), false);
  for (int j = 0; j <= ticks; ++j) {
    for (std::size_t i = 0; i < nw; ++i) {
      if (ff_moving[j][i]) {
        have[i] = true;
        next[i] = ahead[j][i];
      }
    }
  }
  for (int j = ticks; j >= 0; --j) {
    bool tail = true;
    for (std::size_t i = 0; i < nw; ++i) {
      if (ff_moving[j][i]) tail = false;
    }
    if (!tail) break;
    for (std::size_t i = 0; i < nw; ++i) {
      if (have[i]) ahead[j][i] = next[i];
    }
  }
  // Wheels start aligned with the first defined command.
  steer = cmd_steer = ahead[0];

  for (int j = 0; j <= ticks; ++j) {
    const double t = j * h;
    const BodyState r0 = ref.state_at(std::min(t, ref.duration));
    const std::vector<int>& flags = tick_flags[j];

    // Feedforward twist of the reference over the tick, plus pose feedback
    // in the achieved body frame.
    Twist xi = ff[j];
    const double ct = std::cos(pose.theta);
    const double st = std::sin(pose.theta);
    const double ex = ct * (r0.x - pose.x) + st * (r0.y - pose.y);
    const double ey = -st * (r0.x - pose.x) + ct * (r0.y - pose.y);
    const double eth = wrap_angle(r0.theta - pose.theta);
    xi.vx += options.feedback_gain * ex;
    xi.vy += options.feedback_gain * ey;
    xi.omega += options.feedback_gain * eth;

    FollowSample s;
    s.t = t;
    s.commanded = r0;
    s.commanded_steer.resize(nw);
    s.commanded_speed.resize(nw);
    std::vector<Eigen::Vector2d> achieved(nw);
    for (std::size_t i = 0; i < nw; ++i) {
      const Eigen::Vector2d v = wheel_velocity_of(xi, i);
      const double d = flags[i] >= 0 ? 1.0 : -1.0;
      const double norm = v.norm();
      if (!ff_moving[j][i]) {
        cmd_steer[i] = ahead[j][i];
      } else if (norm > kSteerSpeedEps) {
        cmd_steer[i] = wrap_angle(std::atan2(d * v.y(), d * v.x()));
      }
      s.commanded_steer[i] = cmd_steer[i];
      s.commanded_speed[i] = d * norm;
    }
    for (std::size_t i = 0; i < nw; ++i) {
      steer[i] = rate_limit_angle(steer[i], s.commanded_steer[i], limits.steer_rate * h);
      speed[i] = std::clamp(rate_limit(speed[i], s.commanded_speed[i], limits.wheel_accel * h),
                            -limits.wheel_speed, limits.wheel_speed);
      achieved[i] = speed[i] * Eigen::Vector2d(std::cos(steer[i]), std::sin(steer[i]));
    }
    const Twist fit = rigid_fit(layout, achieved);
    s.achieved_twist = fit;
    const Eigen::Vector2d vw = rotation(pose.theta) * Eigen::Vector2d(fit.vx, fit.vy);
    s.achieved = {pose.x, pose.y, pose.theta, vw.x(), vw.y(), fit.omega};
    s.steer = steer;
    s.speed = speed;
    s.ideal_steer.resize(nw);
    for (std::size_t i = 0; i < nw; ++i) {
      const Eigen::Vector2d v = wheel_velocity_of(fit, i);
      const double sign = speed[i] < 0.0 ? -1.0 : 1.0;
      s.ideal_steer[i] = v.norm() > kSteerSpeedEps ? wrap_angle(std::atan2(sign * v.y(), sign * v.x()))
                                                    : steer[i];
    }
    rec.samples.push_back(std::move(s));
    pose = se2_exp(pose, fit, h);
  }
  return rec;
}

inline FollowRecord rollout(const OptimizedTrajectory& traj, const WheelLayout& layout,
                            const ActuationLimits& limits, const FollowerOptions& options = {}) {
  if (traj.knots.empty()) return FollowRecord{options.period, {}};
  return rollout(smooth_reference(traj.knots), layout, limits, options);
}

struct SlideRatio {
  std::vector<double> literal;  // max_w v cos(delta_real - delta_ref)
  std::vector<double> lateral;  // max_w |v sin(delta_real - delta_ref)|
};

inline SlideRatio slide_ratio(const FollowRecord& rec) {
  SlideRatio out;
  for (const FollowSample& s : rec.samples) {
    double lit = s.speed.empty() ? 0.0 : -std::numeric_limits<double>::infinity();
    double lat = 0.0;
    for (std::size_t i = 0; i < s.speed.size(); ++i) {
      const double v = std::abs(s.speed[i]);
      const double e = s.steer[i] - s.ideal_steer[i];
      lit = std::max(lit, v * std::cos(e));
      lat = std::max(lat, std::abs(v * std::sin(e)));
    }
    out.literal.push_back(lit);
    out.lateral.push_back(lat);
  }
  return out;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  for (double x : v) m.std += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(m.std / static_cast<double>(v.size()));
  return m;
}

struct Metrics {
  double mean_position_error = 0.0;  // m
  double mean_heading_error = 0.0;   // rad
  MeanStd slide_literal;
  MeanStd slide_lateral;
  double max_slide_lateral = 0.0;
  Eigen::Vector3d mean_abs_velocity = Eigen::Vector3d::Zero();  // |vx|, |vy|, |omega|, body frame
  Eigen::Vector3d mean_abs_accel = Eigen::Vector3d::Zero();
  Eigen::Vector3d mean_abs_jerk = Eigen::Vector3d::Zero();

  /// Sum of the per-axis mean absolute jerks.
  double jerk_total() const { return mean_abs_jerk.sum(); }
};

/// Nearest-point distance and heading error of each achieved pose against
/// the reference path, sampled densely and joined by straight segments.
inline Metrics metrics(const FollowRecord& rec, const ReferencePath& ref) {
  Metrics m;
  if (rec.samples.empty()) return m;
  const int n_ref = std::max(2, static_cast<int>(std::ceil(ref.duration / (0.25 * rec.period))) + 1);
  std::vector<Pose2> poly;
  for (int i = 0; i < n_ref; ++i) {
    const BodyState s = ref.state_at(ref.duration * i / (n_ref - 1));
    poly.push_back({s.x, s.y, s.theta});
  }
  double sum_d = 0.0;
  double sum_th = 0.0;
  for (const FollowSample& s : rec.samples) {
    double best = std::numeric_limits<double>::infinity();
    double best_th = 0.0;
    for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
      const Eigen::Vector2d a(poly[i].x, poly[i].y);
      const Eigen::Vector2d b(poly[i + 1].x, poly[i + 1].y);
      const Eigen::Vector2d p(s.achieved.x, s.achieved.y);
      const Eigen::Vector2d ab = b - a;
      const double len2 = ab.squaredNorm();
      const double u = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
      const double d = (a + u * ab - p).norm();
      double th_err = 0.0;
      if (len2 > 1e-18) {
        const double th = poly[i].theta + u * (poly[i + 1].theta - poly[i].theta);
        th_err = std::abs(wrap_angle(s.achieved.theta - th));
      } else {
        // Stationary segment: nearest heading within the segment's sweep.
        const double lo = std::min(poly[i].theta, poly[i + 1].theta);
        const double hi = std::max(poly[i].theta, poly[i + 1].theta);
        const double mid = 0.5 * (lo + hi);
        const double off = wrap_angle(s.achieved.theta - mid);
        th_err = std::max(0.0, std::abs(off) - 0.5 * (hi - lo));
      }
      // Equally near segments (a spot rotation) resolve by heading.
      if (d < best - 1e-9) {
        best = d;
        best_th = th_err;
      } else if (d <= best + 1e-9) {
        best = std::min(best, d);
        best_th = std::min(best_th, th_err);
      }
    }
    sum_d += best;
    sum_th += best_th;
  }
  const double count = static_cast<double>(rec.samples.size());
  m.mean_position_error = sum_d / count;
  m.mean_heading_error = sum_th / count;

  const SlideRatio sr = slide_ratio(rec);
  m.slide_literal = mean_std(sr.literal);
  m.slide_lateral = mean_std(sr.lateral);
  for (double v : sr.lateral) m.max_slide_lateral = std::max(m.max_slide_lateral, v);

  const double h = rec.period;
  std::vector<Eigen::Vector3d> vel, acc, jerk;
  for (const FollowSample& s : rec.samples) {
    vel.emplace_back(s.achieved_twist.vx, s.achieved_twist.vy, s.achieved_twist.omega);
  }
  for (std::size_t i = 1; i < vel.size(); ++i) acc.push_back((vel[i] - vel[i - 1]) / h);
  for (std::size_t i = 1; i < acc.size(); ++i) jerk.push_back((acc[i] - acc[i - 1]) / h);
  auto mean_abs = [](const std::vector<Eigen::Vector3d>& v) {
    Eigen::Vector3d out = Eigen::Vector3d::Zero();
    if (v.empty()) return out;
    for (const auto& x : v) out += x.cwiseAbs();
    return Eigen::Vector3d(out / static_cast<double>(v.size()));
  };
  m.mean_abs_velocity = mean_abs(vel);
  m.mean_abs_accel = mean_abs(acc);
  m.mean_abs_jerk = mean_abs(jerk);
  return m;
}

/// Same path traversed backwards: knots reversed, velocities negated,
/// controls kept (acceleration is even under time reversal), flags negated.
inline std::vector<TrajectoryKnot> time_reversed(const std::vector<TrajectoryKnot>& ks) {
  std::vector<TrajectoryKnot> out(ks.rbegin(), ks.rend());
  const std::size_t n = out.size();
  for (std::size_t j = 0; j < n; ++j) {
    BodyState& s = out[j].state;
    s.vx = -s.vx;
    s.vy = -s.vy;
    s.omega = -s.omega;
    for (int& f : out[j].direction_flags) f = -f;
    for (double& v : out[j].wheel_speed) v = -v;
    if (j + 1 < n) {
      out[j].dt = ks[n - 2 - j].dt;
      out[j].control = ks[n - 2 - j].control;
    } else {
      out[j].dt = 0.0;
      out[j].control = {};
    }
  }
  assign_phases(out);
  return out;
}

}  // namespace caws
