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

// Scenario: map, robot, limits, weights, search configuration, start and
// goal. Text format (angles in degrees, angular rates in deg/s):
//
//   [map]
//   resolution = 0.2
//   origin = -10 -10          # world position of the lower-left grid corner
//   ..........                # one row per line, first line is the top row
//   ...##.....                # '#' occupied, '.' free
//
//   [robot]
//   wheel_x = 0.6 0.6 -0.6 -0.6
//   wheel_y = 0.4 -0.4 0.4 -0.4
//   steer_lower = -90 -90 -90 -90
//   steer_upper = 90 90 90 90
//   search_steer_lower = ...  # optional, limits used by the search only
//   search_steer_upper = ...
//   max_wheel_speed = 1.5
//   max_wheel_accel = 1.0
//   max_steer_rate = 57.29578
//   half_length = 0.8
//   half_width = 0.55
//   inflation = 0.0
//
//   [limits]  v_max, yaw_rate_max, accel_max, yaw_accel_max, dt_min, dt_max
//   [weights] k_h, k_vw, k_delta, effort = a b c, task, heading
//   [search]  n_eps, n_psi, n_omega, eps_offset, arc_cap, search_dt_max,
//             knot_dt, position_resolution, heading_bins, goal_pos_tol,
//             goal_heading_tol, max_expansions, shot_radius
//   [start] / [goal]  x, y, theta, vx, vy, omega
//
// Lines starting with '#' followed by a space, or text after " #", are
// comments. Keys omitted from [limits], [weights] and [search] take their
// defaults below.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "caws/error.hpp"
#include "caws/grid.hpp"
#include "caws/kinematics.hpp"

namespace caws {

inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;

struct Limits {
  double v_max = 1.0;          // m/s
  double yaw_rate_max = 1.0;   // rad/s
  double accel_max = 1.0;      // m/s^2, per body axis
  double yaw_accel_max = 1.0;  // rad/s^2
  double dt_min = 0.02;        // s
  double dt_max = 0.5;         // s
};

struct Weights {
  double k_h = 1.0;
  double k_vw = 1.0;
  double k_delta = 1.0;
  Eigen::Vector3d effort = Eigen::Vector3d::Constant(0.1);  // diag(A)
  double task = 1.0;
  double heading = 1.0;  // m^2/rad^2 in the tracking term
};

struct SearchConfig {
  int n_eps = 8;
  int n_psi = 8;
  int n_omega = 8;
  double eps_offset = 1e-3;
  double arc_cap = 1.0;            // m
  double search_dt_max = 1.0;      // s
  double knot_dt = 0.25;           // s, knot spacing of the emitted trajectory
  double position_resolution = 0;  // m; 0 selects 2x the map resolution
  int heading_bins = 16;
  double goal_pos_tol = 0.2;       // m
  double goal_heading_tol = 0.1;   // rad
  int max_expansions = 200000;
  double shot_radius = 3.0;        // m; analytic goal connection range
};

struct Scenario {
  OccupancyGrid grid;
  WheelLayout layout;
  // Steering bounds used by the search, when they differ from `layout`.
  std::optional<std::vector<std::pair<double, double>>> search_steer_limits;
  Footprint footprint;
  BodyState start;
  BodyState goal;
  Limits limits;
  Weights weights;
  SearchConfig search;

  WheelLayout search_layout() const {
    WheelLayout out = layout;
    if (search_steer_limits) {
      for (std::size_t i = 0; i < out.wheels.size(); ++i) {
        out.wheels[i].steer_lower = (*search_steer_limits)[i].first;
        out.wheels[i].steer_upper = (*search_steer_limits)[i].second;
      }
    }
    return out;
  }

  double position_resolution() const {
    return search.position_resolution > 0.0 ? search.position_resolution
                                            : 2.0 * grid.resolution();
  }

  /// Throws kValidationError naming the offending field.
  void validate() const {
    auto fail = [](const std::string& what) {
      throw Error(ErrorCode::kValidationError, what);
    };
    layout.validate();
    footprint.validate();
    if (search_steer_limits) {
      if (search_steer_limits->size() != layout.size()) {
        fail("robot.search_steer_lower/upper: wheel count mismatch");
      }
      for (const auto& [lo, hi] : *search_steer_limits) {
        if (!(lo < hi)) fail("robot.search_steer_lower must be below search_steer_upper");
      }
    }
    const std::pair<const char*, double> positive[] = {
        {"limits.v_max", limits.v_max},
        {"limits.yaw_rate_max", limits.yaw_rate_max},
        {"limits.accel_max", limits.accel_max},
        {"limits.yaw_accel_max", limits.yaw_accel_max},
        {"limits.dt_min", limits.dt_min},
        {"limits.dt_max", limits.dt_max},
        {"search.eps_offset", search.eps_offset},
        {"search.arc_cap", search.arc_cap},
        {"search.search_dt_max", search.search_dt_max},
        {"search.knot_dt", search.knot_dt},
        {"search.goal_pos_tol", search.goal_pos_tol},
        {"search.goal_heading_tol", search.goal_heading_tol},
    };
    for (const auto& [name, value] : positive) {
      if (!(value > 0.0) || !std::isfinite(value)) {
        fail(std::string(name) + " must be positive");
      }
    }
    if (!(limits.dt_min < limits.dt_max)) fail("limits.dt_min must be below limits.dt_max");
    if (!(layout.max_steer_rate * limits.dt_max < kPi / 2.0)) {
      fail("robot.max_steer_rate * limits.dt_max must be below 90 degrees");
    }
    if (search.n_eps < 1 || search.n_psi < 1 || search.n_omega < 1) {
      fail("search.n_eps/n_psi/n_omega must be at least 1");
    }
    if (search.heading_bins < 1) fail("search.heading_bins must be at least 1");
    if (search.max_expansions < 1) fail("search.max_expansions must be at least 1");
    if (weights.k_h < 0 || weights.k_vw < 0 || weights.k_delta < 0 ||
        weights.task < 0 || weights.heading < 0 || (weights.effort.array() < 0).any()) {
      fail("weights must be non-negative");
    }
    if (!start.is_finite()) fail("start: non-finite value");
    if (!goal.is_finite()) fail("goal: non-finite value");
    if (collides(grid, footprint, {start.x, start.y, start.theta})) {
      fail("start: pose is in collision");
    }
    if (collides(grid, footprint, {goal.x, goal.y, goal.theta})) {
      fail("goal: pose is in collision");
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<double> parse_numbers(const std::string& key,
                                         const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string token;
  while (in >> token) {
    try {
      std::size_t used = 0;
      const double v = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
      out.push_back(v);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParseError, key + ": not a number: '" + token + "'");
    }
  }
  return out;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string format_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ' ';
    out += format_double(values[i]);
  }
  return out;
}

}  // namespace detail

inline Scenario load_scenario(const std::string& text) {
  using Section = std::map<std::string, std::string>;
  std::map<std::string, Section> sections;
  std::vector<std::string> rows;
  std::string current;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find(" #");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty() || line.rfind("# ", 0) == 0 || (line == "#" && current != "map")) {
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw Error(ErrorCode::kParseError,
                    "line " + std::to_string(line_no) + ": malformed section header");
      }
      current = detail::trim(line.substr(1, line.size() - 2));
      sections[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (current == "map" && line.find_first_not_of("#.") == std::string::npos) {
        rows.push_back(line);
        continue;
      }
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": expected key = value");
    }
    if (current.empty()) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": key outside of a section");
    }
    sections[current][detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }

  auto section = [&](const std::string& name) -> const Section& {
    const auto it = sections.find(name);
    if (it == sections.end()) {
      throw Error(ErrorCode::kParseError, "missing section [" + name + "]");
    }
    return it->second;
  };
  auto list = [&](const std::string& sec, const std::string& key,
                  bool required) -> std::optional<std::vector<double>> {
    const Section& s = section(sec);
    const auto it = s.find(key);
    if (it == s.end()) {
      if (required) throw Error(ErrorCode::kParseError, sec + "." + key + ": missing");
      return std::nullopt;
    }
    return detail::parse_numbers(sec + "." + key, it->second);
  };
  auto scalar = [&](const std::string& sec, const std::string& key,
                    std::optional<double> fallback) -> double {
    const bool has_section = sections.count(sec) > 0;
    if (!has_section) {
      if (fallback) return *fallback;
      throw Error(ErrorCode::kParseError, "missing section [" + sec + "]");
    }
    const auto values = list(sec, key, !fallback.has_value());
    if (!values) return *fallback;
    if (values->size() != 1) {
      throw Error(ErrorCode::kParseError, sec + "." + key + ": expected one number");
    }
    return values->front();
  };

  Scenario sc;

  // [map]
  const double resolution = scalar("map", "resolution", std::nullopt);
  const auto origin = list("map", "origin", false).value_or(std::vector<double>{0.0, 0.0});
  if (origin.size() != 2) throw Error(ErrorCode::kParseError, "map.origin: expected two numbers");
  if (rows.empty()) throw Error(ErrorCode::kParseError, "map: no grid rows");
  const int width = static_cast<int>(rows.front().size());
  const int height = static_cast<int>(rows.size());
  std::vector<bool> cells(static_cast<std::size_t>(width) * height, false);
  for (int r = 0; r < height; ++r) {
    if (static_cast<int>(rows[r].size()) != width) {
      throw Error(ErrorCode::kParseError, "map: row " + std::to_string(r) + " has wrong length");
    }
    const int iy = height - 1 - r;
    for (int ix = 0; ix < width; ++ix) {
      cells[static_cast<std::size_t>(iy) * width + ix] = rows[r][ix] == '#';
    }
  }
  sc.grid = OccupancyGrid(width, height, resolution, {origin[0], origin[1]}, std::move(cells));

  // [robot]
  const auto wx = *list("robot", "wheel_x", true);
  const auto wy = *list("robot", "wheel_y", true);
  const auto lo = *list("robot", "steer_lower", true);
  const auto hi = *list("robot", "steer_upper", true);
  if (wy.size() != wx.size() || lo.size() != wx.size() || hi.size() != wx.size()) {
    throw Error(ErrorCode::kValidationError,
                "robot: wheel_x, wheel_y, steer_lower, steer_upper lengths differ");
  }
  for (std::size_t i = 0; i < wx.size(); ++i) {
    sc.layout.wheels.push_back(
        {Eigen::Vector2d(wx[i], wy[i]), lo[i] * kDegToRad, hi[i] * kDegToRad});
  }
  const auto slo = list("robot", "search_steer_lower", false);
  const auto shi = list("robot", "search_steer_upper", false);
  if (slo.has_value() != shi.has_value()) {
    throw Error(ErrorCode::kValidationError,
                "robot: search_steer_lower and search_steer_upper must be given together");
  }
  if (slo) {
    if (slo->size() != wx.size() || shi->size() != wx.size()) {
      throw Error(ErrorCode::kValidationError,
                  "robot: search_steer_lower/upper lengths differ from wheel count");
    }
    std::vector<std::pair<double, double>> limits;
    for (std::size_t i = 0; i < wx.size(); ++i) {
      limits.emplace_back((*slo)[i] * kDegToRad, (*shi)[i] * kDegToRad);
    }
    sc.search_steer_limits = std::move(limits);
  }
  const WheelLayout defaults_layout;
  sc.layout.max_wheel_speed = scalar("robot", "max_wheel_speed", defaults_layout.max_wheel_speed);
  sc.layout.max_wheel_accel = scalar("robot", "max_wheel_accel", defaults_layout.max_wheel_accel);
  sc.layout.max_steer_rate =
      scalar("robot", "max_steer_rate", defaults_layout.max_steer_rate * kRadToDeg) * kDegToRad;
  sc.footprint.half_length = scalar("robot", "half_length", std::nullopt);
  sc.footprint.half_width = scalar("robot", "half_width", std::nullopt);
  sc.footprint.inflation = scalar("robot", "inflation", 0.0);

  // [limits]
  const Limits dl;
  sc.limits.v_max = scalar("limits", "v_max", dl.v_max);
  sc.limits.yaw_rate_max = scalar("limits", "yaw_rate_max", dl.yaw_rate_max * kRadToDeg) * kDegToRad;
  sc.limits.accel_max = scalar("limits", "accel_max", dl.accel_max);
  sc.limits.yaw_accel_max =
      scalar("limits", "yaw_accel_max", dl.yaw_accel_max * kRadToDeg) * kDegToRad;
  sc.limits.dt_min = scalar("limits", "dt_min", dl.dt_min);
  sc.limits.dt_max = scalar("limits", "dt_max", dl.dt_max);

  // [weights]
  const Weights dw;
  sc.weights.k_h = scalar("weights", "k_h", dw.k_h);
  sc.weights.k_vw = scalar("weights", "k_vw", dw.k_vw);
  sc.weights.k_delta = scalar("weights", "k_delta", dw.k_delta);
  sc.weights.task = scalar("weights", "task", dw.task);
  sc.weights.heading = scalar("weights", "heading", dw.heading);
  if (sections.count("weights")) {
    if (const auto effort = list("weights", "effort", false)) {
      if (effort->size() != 3) {
        throw Error(ErrorCode::kParseError, "weights.effort: expected three numbers");
      }
      sc.weights.effort = {(*effort)[0], (*effort)[1], (*effort)[2]};
    }
  }

  // [search]
  const SearchConfig ds;
  auto integer = [&](const std::string& key, int fallback) {
    const double v = scalar("search", key, fallback);
    if (v != std::floor(v)) throw Error(ErrorCode::kParseError, "search." + key + ": expected an integer");
    return static_cast<int>(v);
  };
  sc.search.n_eps = integer("n_eps", ds.n_eps);
  sc.search.n_psi = integer("n_psi", ds.n_psi);
  sc.search.n_omega = integer("n_omega", ds.n_omega);
  sc.search.eps_offset = scalar("search", "eps_offset", ds.eps_offset);
  sc.search.arc_cap = scalar("search", "arc_cap", ds.arc_cap);
  sc.search.search_dt_max = scalar("search", "search_dt_max", ds.search_dt_max);
  sc.search.knot_dt = scalar("search", "knot_dt", ds.knot_dt);
  sc.search.position_resolution = scalar("search", "position_resolution", ds.position_resolution);
  sc.search.heading_bins = integer("heading_bins", ds.heading_bins);
  sc.search.goal_pos_tol = scalar("search", "goal_pos_tol", ds.goal_pos_tol);
  sc.search.goal_heading_tol = scalar("search", "goal_heading_tol", ds.goal_heading_tol);
  sc.search.max_expansions = integer("max_expansions", ds.max_expansions);
  sc.search.shot_radius = scalar("search", "shot_radius", ds.shot_radius);

  auto state = [&](const std::string& sec) {
    BodyState s;
    s.x = scalar(sec, "x", std::nullopt);
    s.y = scalar(sec, "y", std::nullopt);
    s.theta = scalar(sec, "theta", std::nullopt) * kDegToRad;
    s.vx = scalar(sec, "vx", 0.0);
    s.vy = scalar(sec, "vy", 0.0);
    s.omega = scalar(sec, "omega", 0.0) * kDegToRad;
    return s;
  };
  sc.start = state("start");
  sc.goal = state("goal");

  sc.validate();
  return sc;
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kParseError, "cannot open scenario file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_scenario(buffer.str());
}

/// Inverse of load_scenario.
inline std::string serialize_scenario(const Scenario& sc) {
  using detail::format_double;
  using detail::format_list;
  std::ostringstream out;
  const OccupancyGrid& g = sc.grid;
  out << "[map]\n";
  out << "resolution = " << format_double(g.resolution()) << "\n";
  out << "origin = " << format_double(g.origin().x()) << " " << format_double(g.origin().y()) << "\n";
  for (int iy = g.height() - 1; iy >= 0; --iy) {
    std::string row(static_cast<std::size_t>(g.width()), '.');
    for (int ix = 0; ix < g.width(); ++ix) {
      if (g.occupied(ix, iy)) row[ix] = '#';
    }
    out << row << "\n";
  }

  auto column = [&](auto getter) {
    std::vector<double> v;
    for (std::size_t i = 0; i < sc.layout.size(); ++i) v.push_back(getter(i));
    return format_list(v);
  };
  out << "\n[robot]\n";
  out << "wheel_x = " << column([&](std::size_t i) { return sc.layout.wheels[i].position.x(); }) << "\n";
  out << "wheel_y = " << column([&](std::size_t i) { return sc.layout.wheels[i].position.y(); }) << "\n";
  out << "steer_lower = "
      << column([&](std::size_t i) { return sc.layout.wheels[i].steer_lower * kRadToDeg; }) << "\n";
  out << "steer_upper = "
      << column([&](std::size_t i) { return sc.layout.wheels[i].steer_upper * kRadToDeg; }) << "\n";
  if (sc.search_steer_limits) {
    out << "search_steer_lower = "
        << column([&](std::size_t i) { return (*sc.search_steer_limits)[i].first * kRadToDeg; })
        << "\n";
    out << "search_steer_upper = "
        << column([&](std::size_t i) { return (*sc.search_steer_limits)[i].second * kRadToDeg; })
        << "\n";
  }
  out << "max_wheel_speed = " << format_double(sc.layout.max_wheel_speed) << "\n";
  out << "max_wheel_accel = " << format_double(sc.layout.max_wheel_accel) << "\n";
  out << "max_steer_rate = " << format_double(sc.layout.max_steer_rate * kRadToDeg) << "\n";
  out << "half_length = " << format_double(sc.footprint.half_length) << "\n";
  out << "half_width = " << format_double(sc.footprint.half_width) << "\n";
  out << "inflation = " << format_double(sc.footprint.inflation) << "\n";

  const Limits& l = sc.limits;
  out << "\n[limits]\n";
  out << "v_max = " << format_double(l.v_max) << "\n";
  out << "yaw_rate_max = " << format_double(l.yaw_rate_max * kRadToDeg) << "\n";
  out << "accel_max = " << format_double(l.accel_max) << "\n";
  out << "yaw_accel_max = " << format_double(l.yaw_accel_max * kRadToDeg) << "\n";
  out << "dt_min = " << format_double(l.dt_min) << "\n";
  out << "dt_max = " << format_double(l.dt_max) << "\n";

  const Weights& w = sc.weights;
  out << "\n[weights]\n";
  out << "k_h = " << format_double(w.k_h) << "\n";
  out << "k_vw = " << format_double(w.k_vw) << "\n";
  out << "k_delta = " << format_double(w.k_delta) << "\n";
  out << "effort = " << format_list({w.effort[0], w.effort[1], w.effort[2]}) << "\n";
  out << "task = " << format_double(w.task) << "\n";
  out << "heading = " << format_double(w.heading) << "\n";

  const SearchConfig& s = sc.search;
  out << "\n[search]\n";
  out << "n_eps = " << s.n_eps << "\n";
  out << "n_psi = " << s.n_psi << "\n";
  out << "n_omega = " << s.n_omega << "\n";
  out << "eps_offset = " << format_double(s.eps_offset) << "\n";
  out << "arc_cap = " << format_double(s.arc_cap) << "\n";
  out << "search_dt_max = " << format_double(s.search_dt_max) << "\n";
  out << "knot_dt = " << format_double(s.knot_dt) << "\n";
  out << "position_resolution = " << format_double(s.position_resolution) << "\n";
  out << "heading_bins = " << s.heading_bins << "\n";
  out << "goal_pos_tol = " << format_double(s.goal_pos_tol) << "\n";
  out << "goal_heading_tol = " << format_double(s.goal_heading_tol) << "\n";
  out << "max_expansions = " << s.max_expansions << "\n";
  out << "shot_radius = " << format_double(s.shot_radius) << "\n";

  auto state = [&](const char* name, const BodyState& st) {
    out << "\n[" << name << "]\n";
    out << "x = " << format_double(st.x) << "\n";
    out << "y = " << format_double(st.y) << "\n";
    out << "theta = " << format_double(st.theta * kRadToDeg) << "\n";
    out << "vx = " << format_double(st.vx) << "\n";
    out << "vy = " << format_double(st.vy) << "\n";
    out << "omega = " << format_double(st.omega * kRadToDeg) << "\n";
  };
  state("start", sc.start);
  state("goal", sc.goal);
  return out.str();
}

}  // namespace caws
