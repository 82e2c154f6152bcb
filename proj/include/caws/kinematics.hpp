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

// Planar rigid-body kinematics for all-wheel-steering chassis.
//
// Frames: the world frame is fixed; the robot (body) frame is attached to the
// control center and rotated by the heading theta. Wheel positions are given
// in the body frame. All angles are radians.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "caws/error.hpp"

namespace caws {

inline constexpr double kPi = std::numbers::pi;

/// Below this yaw rate the instantaneous center of motion is at infinity.
inline constexpr double kOmegaSingular = 1e-6;
/// Below this wheel speed the steering angle is undefined and held.
inline constexpr double kSteerSpeedEps = 1e-9;

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double angle) {
  double wrapped = std::remainder(angle, 2.0 * kPi);
  if (wrapped <= -kPi) wrapped += 2.0 * kPi;
  return wrapped;
}

struct BodyState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // unwrapped
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;

  Eigen::Vector2d position() const { return {x, y}; }
  Eigen::Vector2d velocity() const { return {vx, vy}; }
  bool is_finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(theta) &&
           std::isfinite(vx) && std::isfinite(vy) && std::isfinite(omega);
  }
};

struct BodyControl {
  double ax = 0.0;
  double ay = 0.0;
  double alpha = 0.0;
};

struct Wheel {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();  // body frame, meters
  double steer_lower = -kPi / 2.0;
  double steer_upper = kPi / 2.0;
};

/// Fixed wheel positions plus per-wheel steering bounds and shared actuator
/// limits.
struct WheelLayout {
  std::vector<Wheel> wheels;
  double max_wheel_speed = 1.5;   // m/s
  double max_wheel_accel = 1.0;   // m/s^2
  double max_steer_rate = 1.0;    // rad/s

  std::size_t size() const { return wheels.size(); }

  /// Throws kValidationError naming the offending field.
  void validate() const {
    auto fail = [](const std::string& what) {
      throw Error(ErrorCode::kValidationError, what);
    };
    if (wheels.empty()) fail("robot.wheels: at least one wheel required");
    for (std::size_t i = 0; i < wheels.size(); ++i) {
      const Wheel& w = wheels[i];
      const std::string tag = "robot.wheel[" + std::to_string(i) + "]";
      if (!w.position.allFinite()) fail(tag + ": position not finite");
      if (!(w.steer_lower < w.steer_upper)) {
        fail(tag + ": steer_lower must be below steer_upper");
      }
      if (!(w.steer_lower > -kPi - 1e-12 && w.steer_upper <= kPi + 1e-12)) {
        fail(tag + ": steering bounds must lie in (-180, 180] degrees");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if ((wheels[j].position - w.position).norm() < 1e-9) {
          fail(tag + ": duplicate wheel position");
        }
      }
    }
    if (!(max_wheel_speed > 0.0)) fail("robot.max_wheel_speed must be positive");
    if (!(max_wheel_accel > 0.0)) fail("robot.max_wheel_accel must be positive");
    if (!(max_steer_rate > 0.0)) fail("robot.max_steer_rate must be positive");
  }
};

/// Vector from the instantaneous center of motion to the control center,
/// expressed in the body frame.
struct IcmRadius {
  Eigen::Vector2d r = Eigen::Vector2d::Zero();
};

struct WheelMotion {
  Eigen::Vector2d v_world = Eigen::Vector2d::Zero();
  Eigen::Vector2d v_body = Eigen::Vector2d::Zero();
  double steer_world = 0.0;
  double steer_body = 0.0;  // wrapped to (-pi, pi]
  double speed = 0.0;       // signed by the rolling direction
  bool steer_defined = false;
};

inline Eigen::Matrix2d rotation(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Eigen::Matrix2d m;
  m << c, -s, s, c;
  return m;
}

/// Time derivative of rotation(theta): K(theta) * omega.
inline Eigen::Matrix2d omega_matrix(double theta, double omega) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Eigen::Matrix2d k;
  k << -s, -c, c, -s;
  return k * omega;
}

/// Throws kSingularIcm when |omega| is below `omega_singular`.
inline IcmRadius icm_radius(const BodyState& state,
                            double omega_singular = kOmegaSingular) {
  if (!(std::abs(state.omega) >= omega_singular)) {
    throw Error(ErrorCode::kSingularIcm,
                "ICM undefined for yaw rate " + std::to_string(state.omega));
  }
  // K(theta) is orthonormal, so its transpose is its inverse.
  const Eigen::Matrix2d k = omega_matrix(state.theta, 1.0);
  return {k.transpose() * (state.velocity() / state.omega)};
}

inline Eigen::Vector2d body_velocity_from_icm(const IcmRadius& icm,
                                              double omega, double theta) {
  return omega_matrix(theta, omega) * icm.r;
}

/// Half-angle form of atan2; throws kDegenerateBackward when v points along
/// the negative x axis.
inline double steering_halfangle(const Eigen::Vector2d& v) {
  const double norm = v.norm();
  const double denom = norm + v.x();
  if (norm == 0.0 || denom == 0.0) {
    throw Error(ErrorCode::kDegenerateBackward,
                "half-angle steering undefined for backward velocity");
  }
  return 2.0 * std::atan(v.y() / denom);
}

/// Velocity and steering of the wheel at body-frame position `w`.
///
/// `direction` (+1/-1) picks the rolling direction: the reported steering is
/// the angle of direction * v_body and the speed is signed accordingly. When
/// the wheel speed is below `steer_eps`, `held_steer_body` is reported.
inline WheelMotion wheel_velocity(const BodyState& state,
                                  const Eigen::Vector2d& w, int direction = 1,
                                  double held_steer_body = 0.0,
                                  double steer_eps = kSteerSpeedEps) {
  WheelMotion m;
  m.v_world = state.velocity() + omega_matrix(state.theta, state.omega) * w;
  m.v_body = rotation(state.theta).transpose() * m.v_world;
  const double norm = m.v_world.norm();
  m.speed = direction >= 0 ? norm : -norm;
  if (norm > steer_eps) {
    const double sign = direction >= 0 ? 1.0 : -1.0;
    m.steer_body =
        wrap_angle(std::atan2(sign * m.v_body.y(), sign * m.v_body.x()));
    m.steer_world =
        wrap_angle(std::atan2(sign * m.v_world.y(), sign * m.v_world.x()));
    m.steer_defined = true;
  } else {
    m.steer_body = wrap_angle(held_steer_body);
    m.steer_world = wrap_angle(m.steer_body + state.theta);
  }
  return m;
}

/// Time derivative of the world-frame wheel velocity.
inline Eigen::Vector2d wheel_acceleration(const BodyState& state,
                                          const BodyControl& control,
                                          const Eigen::Vector2d& w) {
  const Eigen::Vector2d accel(control.ax, control.ay);
  return accel - rotation(state.theta) * w * (state.omega * state.omega) +
         omega_matrix(state.theta, control.alpha) * w;
}

// Scalar-generic forms used by the trajectory optimizer (any type with the
// usual arithmetic plus sin/cos found by ADL or std::).

/// Body-frame wheel velocity from (theta, vx, vy, omega).
template <typename T>
void wheel_body_velocity(const T& theta, const T& vx, const T& vy,
                         const T& omega, const Eigen::Vector2d& w, T& out_x,
                         T& out_y) {
  using std::cos;
  using std::sin;
  const T c = cos(theta);
  const T s = sin(theta);
  out_x = c * vx + s * vy - omega * w.y();
  out_y = c * vy - s * vx + omega * w.x();
}

/// World-frame wheel acceleration from (theta, omega, ax, ay, alpha).
template <typename T>
void wheel_world_acceleration(const T& theta, const T& omega, const T& ax,
                              const T& ay, const T& alpha,
                              const Eigen::Vector2d& w, T& out_x, T& out_y) {
  using std::cos;
  using std::sin;
  const T c = cos(theta);
  const T s = sin(theta);
  const T w2 = omega * omega;
  // a - omega^2 R w + alpha K w
  out_x = ax - w2 * (c * w.x() - s * w.y()) + alpha * (-s * w.x() - c * w.y());
  out_y = ay - w2 * (s * w.x() + c * w.y()) + alpha * (c * w.x() - s * w.y());
}

}  // namespace caws
