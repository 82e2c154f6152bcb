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

#include <Eigen/Dense>

#include <cmath>

namespace caws {

/// Forward-mode second-order dual number over N independent variables:
/// value, gradient and (symmetric) Hessian.
template <int N>
struct Jet2 {
  using Vec = Eigen::Matrix<double, N, 1>;
  using Mat = Eigen::Matrix<double, N, N>;

  double v = 0.0;
  Vec g = Vec::Zero();
  Mat h = Mat::Zero();

  Jet2() = default;
  Jet2(double value) : v(value) {}  // NOLINT: implicit constants are intended

  static Jet2 variable(double value, int index) {
    Jet2 j(value);
    j.g[index] = 1.0;
    return j;
  }

  Jet2& operator+=(const Jet2& o) {
    v += o.v;
    g += o.g;
    h += o.h;
    return *this;
  }
  Jet2& operator-=(const Jet2& o) {
    v -= o.v;
    g -= o.g;
    h -= o.h;
    return *this;
  }
  Jet2& operator*=(const Jet2& o) { return *this = *this * o; }
  Jet2& operator/=(const Jet2& o) { return *this = *this / o; }

  friend Jet2 operator-(const Jet2& a) {
    Jet2 r;
    r.v = -a.v;
    r.g = -a.g;
    r.h = -a.h;
    return r;
  }
  friend Jet2 operator+(Jet2 a, const Jet2& b) { return a += b; }
  friend Jet2 operator-(Jet2 a, const Jet2& b) { return a -= b; }
  friend Jet2 operator*(const Jet2& a, const Jet2& b) {
    Jet2 r;
    r.v = a.v * b.v;
    r.g = a.v * b.g + b.v * a.g;
    r.h = a.v * b.h + b.v * a.h + a.g * b.g.transpose() + b.g * a.g.transpose();
    return r;
  }
  friend Jet2 operator*(double s, Jet2 a) {
    a.v *= s;
    a.g *= s;
    a.h *= s;
    return a;
  }
  friend Jet2 operator*(Jet2 a, double s) { return s * a; }
  friend Jet2 operator/(const Jet2& a, const Jet2& b) { return a * reciprocal(b); }
  friend Jet2 operator/(Jet2 a, double s) { return (1.0 / s) * a; }

  /// f(a) given f, f', f'' at a.v.
  friend Jet2 chain(const Jet2& a, double f, double df, double d2f) {
    Jet2 r;
    r.v = f;
    r.g = df * a.g;
    r.h = df * a.h + d2f * a.g * a.g.transpose();
    return r;
  }
  friend Jet2 reciprocal(const Jet2& a) {
    const double inv = 1.0 / a.v;
    return chain(a, inv, -inv * inv, 2.0 * inv * inv * inv);
  }
  friend Jet2 sin(const Jet2& a) {
    const double s = std::sin(a.v);
    return chain(a, s, std::cos(a.v), -s);
  }
  friend Jet2 cos(const Jet2& a) {
    const double c = std::cos(a.v);
    return chain(a, c, -std::sin(a.v), -c);
  }
  friend Jet2 sqrt(const Jet2& a) {
    const double s = std::sqrt(a.v);
    return chain(a, s, 0.5 / s, -0.25 / (s * a.v));
  }
};

/// Value part of a scalar or jet.
inline double value_of(double x) { return x; }
template <int N>
double value_of(const Jet2<N>& x) {
  return x.v;
}

}  // namespace caws
