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

// Text formats: trajectory tables, ICM traces, follower records and run
// reports. Numbers are printed with 12 significant digits so that files are
// stable across runs and diffable.

#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "caws/error.hpp"
#include "caws/evaluate.hpp"
#include "caws/kinematics.hpp"
#include "caws/optimizer.hpp"
#include "caws/trajectory.hpp"

namespace caws {

enum class TableFormat { kCsv, kTabular };

namespace io_detail {

inline std::string num(double v) {
  if (v == 0.0) return "0";  // no negative zero
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

/// Joins rows either with commas or as right-aligned fixed-width columns.
inline std::string render(const std::vector<std::vector<std::string>>& rows, TableFormat format) {
  std::string out;
  if (format == TableFormat::kCsv) {
    for (const auto& row : rows) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) out += ',';
        out += row[c];
      }
      out += '\n';
    }
    return out;
  }
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += "  ";
      out += std::string(width[c] - row[c].size(), ' ') + row[c];
    }
    out += '\n';
  }
  return out;
}

/// Splits a data line on commas, or on whitespace when it has none.
inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  if (line.find(',') != std::string::npos) {
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
      const auto b = field.find_first_not_of(" \t\r");
      const auto e = field.find_last_not_of(" \t\r");
      out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
  } else {
    std::istringstream in(line);
    std::string field;
    while (in >> field) out.push_back(field);
  }
  return out;
}

inline double parse_double(const std::string& s, int line, const std::string& column) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::kParseError, "line " + std::to_string(line) + ": column " + column +
                                            ": not a finite number: '" + s + "'");
  }
  return v;
}

inline std::vector<std::string> trajectory_header(std::size_t wheels) {
  std::vector<std::string> h{"t",  "dt", "x",  "y",  "theta", "vx",
                             "vy", "omega", "ax", "ay", "alpha", "phase"};
  for (std::size_t i = 0; i < wheels; ++i) {
    h.push_back("steer_" + std::to_string(i));
    h.push_back("speed_" + std::to_string(i));
    h.push_back("dir_" + std::to_string(i));
  }
  return h;
}

}  // namespace io_detail

/// One row per knot; t is the knot time, dt the interval that follows it.
inline std::string write_trajectory(const std::vector<TrajectoryKnot>& knots,
                                    TableFormat format = TableFormat::kCsv) {
  const std::size_t nw = knots.empty() ? 0 : knots.front().direction_flags.size();
  std::vector<std::vector<std::string>> rows{io_detail::trajectory_header(nw)};
  double t = 0.0;
  using io_detail::num;
  for (const auto& k : knots) {
    const BodyState& s = k.state;
    const BodyControl& u = k.control;
    std::vector<std::string> row{num(t),       num(k.dt),   num(s.x),   num(s.y),
                                 num(s.theta), num(s.vx),   num(s.vy),  num(s.omega),
                                 num(u.ax),    num(u.ay),   num(u.alpha), std::to_string(k.phase)};
    for (std::size_t i = 0; i < nw; ++i) {
      row.push_back(num(i < k.wheel_steer.size() ? k.wheel_steer[i] : 0.0));
      row.push_back(num(i < k.wheel_speed.size() ? k.wheel_speed[i] : 0.0));
      row.push_back(std::to_string(k.direction_flags[i]));
    }
    rows.push_back(std::move(row));
    // Accumulate the printed dt so that reading and rewriting is a fixed point.
    t += std::stod(num(k.dt));
  }
  return io_detail::render(rows, format);
}

/// Parses either table format. `wheels`, when given, must match the file.
inline std::vector<TrajectoryKnot> read_trajectory(const std::string& text,
                                                   std::optional<std::size_t> wheels = {}) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = io_detail::split_fields(line);
    break;
  }
  if (header.empty()) throw Error(ErrorCode::kParseError, "trajectory file has no header row");
  const std::size_t fixed = 12;
  if (header.size() < fixed || (header.size() - fixed) % 3 != 0) {
    throw Error(ErrorCode::kParseError,
                "line " + std::to_string(line_no) + ": unexpected column count " +
                    std::to_string(header.size()));
  }
  const std::size_t nw = (header.size() - fixed) / 3;
  const auto expected = io_detail::trajectory_header(nw);
  for (std::size_t c = 0; c < expected.size(); ++c) {
    if (header[c] != expected[c]) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": column " +
                                              std::to_string(c + 1) + " must be '" + expected[c] +
                                              "', found '" + header[c] + "'");
    }
  }
  if (wheels && *wheels != nw) {
    throw Error(ErrorCode::kParseError, "trajectory has " + std::to_string(nw) +
                                            " wheels, robot has " + std::to_string(*wheels));
  }
  std::vector<TrajectoryKnot> knots;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = io_detail::split_fields(line);
    if (f.size() != header.size()) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": expected " +
                                              std::to_string(header.size()) + " fields, found " +
                                              std::to_string(f.size()));
    }
    std::vector<double> v(f.size());
    for (std::size_t c = 0; c < f.size(); ++c) v[c] = io_detail::parse_double(f[c], line_no, header[c]);
    TrajectoryKnot k;
    k.dt = v[1];
    k.state = {v[2], v[3], v[4], v[5], v[6], v[7]};
    k.control = {v[8], v[9], v[10]};
    k.phase = static_cast<int>(v[11]);
    for (std::size_t i = 0; i < nw; ++i) {
      const double dir = v[fixed + 3 * i + 2];
      if (dir != 1.0 && dir != -1.0) {
        throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": column " +
                                                header[fixed + 3 * i + 2] + " must be 1 or -1");
      }
      k.wheel_steer.push_back(v[fixed + 3 * i]);
      k.wheel_speed.push_back(v[fixed + 3 * i + 1]);
      k.direction_flags.push_back(static_cast<int>(dir));
    }
    knots.push_back(std::move(k));
  }
  if (knots.empty()) throw Error(ErrorCode::kParseError, "trajectory file has no knots");
  for (std::size_t k = 0; k < knots.size(); ++k) {
    knots[k].keyframe = k == 0 || k + 1 == knots.size() || is_phase_transition(knots, k);
  }
  return knots;
}

/// ICM location of one knot in spherical coordinates: epsilon = atan|r| and
/// psi = atan2(-r_y, -r_x). Translations and rest (no finite ICM) are marked
/// singular with epsilon = pi/2 and psi = 0.
struct IcmTracePoint {
  double epsilon = 0.0;
  double psi = 0.0;
  bool singular = false;
};

inline IcmTracePoint icm_trace_point(const BodyState& s) {
  if (std::abs(s.omega) < kOmegaSingular) return {kPi / 2.0, 0.0, true};
  const Eigen::Vector2d r = icm_radius(s).r;
  const double norm = r.norm();
  if (norm == 0.0) return {0.0, 0.0, false};
  return {std::atan(norm), std::atan2(-r.y(), -r.x()), false};
}

/// Total variation of the ICM trace on the unit sphere. The ICM of a twist is
/// the point (K(theta)^T v, omega) normalized, taken up to sign, so the
/// measure is continuous through pure translations. Knots at rest break the
/// trace.
inline double icm_trace_variation(const std::vector<TrajectoryKnot>& knots) {
  double total = 0.0;
  std::optional<Eigen::Vector3d> prev;
  for (const auto& k : knots) {
    const BodyState& s = k.state;
    const Eigen::Vector2d r = omega_matrix(s.theta, 1.0).transpose() * s.velocity();
    const Eigen::Vector3d p(r.x(), r.y(), s.omega);
    if (p.norm() < 1e-9) {
      prev.reset();
      continue;
    }
    const Eigen::Vector3d n = p.normalized();
    if (prev) total += std::acos(std::min(1.0, std::abs(n.dot(*prev))));
    prev = n;
  }
  return total;
}

inline std::string write_icm_trace(const std::vector<TrajectoryKnot>& knots,
                                   TableFormat format = TableFormat::kCsv) {
  std::vector<std::vector<std::string>> rows{{"knot", "t", "epsilon", "psi", "singular"}};
  double t = 0.0;
  for (std::size_t k = 0; k < knots.size(); ++k) {
    const IcmTracePoint p = icm_trace_point(knots[k].state);
    rows.push_back({std::to_string(k), io_detail::num(t), io_detail::num(p.epsilon),
                    io_detail::num(p.psi), p.singular ? "1" : "0"});
    t += knots[k].dt;
  }
  return io_detail::render(rows, format);
}

/// Per-tick follower samples with both slide-ratio variants.
inline std::string write_follow_record(const FollowRecord& rec,
                                       TableFormat format = TableFormat::kCsv) {
  const std::size_t nw = rec.samples.empty() ? 0 : rec.samples.front().steer.size();
  std::vector<std::string> header{"t",     "ref_x",  "ref_y",    "ref_theta", "x",
                                  "y",     "theta",  "vx",       "vy",        "omega",
                                  "slide_literal", "slide_lateral"};
  for (std::size_t i = 0; i < nw; ++i) {
    for (const char* f : {"cmd_steer_", "cmd_speed_", "steer_", "speed_"}) {
      header.push_back(f + std::to_string(i));
    }
  }
  std::vector<std::vector<std::string>> rows{header};
  const SlideRatio slide = slide_ratio(rec);
  using io_detail::num;
  for (std::size_t j = 0; j < rec.samples.size(); ++j) {
    const FollowSample& s = rec.samples[j];
    std::vector<std::string> row{num(s.t),          num(s.commanded.x), num(s.commanded.y),
                                 num(s.commanded.theta), num(s.achieved.x), num(s.achieved.y),
                                 num(s.achieved.theta),  num(s.achieved_twist.vx),
                                 num(s.achieved_twist.vy), num(s.achieved_twist.omega),
                                 num(slide.literal[j]), num(slide.lateral[j])};
    for (std::size_t i = 0; i < nw; ++i) {
      row.push_back(num(s.commanded_steer[i]));
      row.push_back(num(s.commanded_speed[i]));
      row.push_back(num(s.steer[i]));
      row.push_back(num(s.speed[i]));
    }
    rows.push_back(std::move(row));
  }
  return io_detail::render(rows, format);
}

/// Ordered key=value report of one CLI run.
class RunReport {
 public:
  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_) {
      if (k == key) {
        v = value;
        return;
      }
    }
    entries_.emplace_back(key, value);
  }
  void set(const std::string& key, double value) { set(key, io_detail::num(value)); }
  void set(const std::string& key, int value) { set(key, std::to_string(value)); }
  void set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

  void add_constraints(const ConstraintReport& r, const std::string& prefix = "residual.") {
    for (const auto& [name, value] : r.families()) set(prefix + name, value);
    set(prefix + "max", r.max_residual());
  }

  void add_metrics(const Metrics& m, const std::string& prefix = "metrics.") {
    set(prefix + "mean_position_error", m.mean_position_error);
    set(prefix + "mean_heading_error", m.mean_heading_error);
    set(prefix + "slide_literal_mean", m.slide_literal.mean);
    set(prefix + "slide_literal_std", m.slide_literal.std);
    set(prefix + "slide_lateral_mean", m.slide_lateral.mean);
    set(prefix + "slide_lateral_std", m.slide_lateral.std);
    set(prefix + "slide_lateral_max", m.max_slide_lateral);
    const char* axes[] = {"vx", "vy", "omega"};
    for (int a = 0; a < 3; ++a) {
      set(prefix + "mean_abs_velocity_" + axes[a], m.mean_abs_velocity[a]);
      set(prefix + "mean_abs_accel_" + axes[a], m.mean_abs_accel[a]);
      set(prefix + "mean_abs_jerk_" + axes[a], m.mean_abs_jerk[a]);
    }
    set(prefix + "jerk_total", m.jerk_total());
  }

  std::optional<std::string> get(const std::string& key) const {
    for (const auto& [k, v] : entries_) {
      if (k == key) return v;
    }
    return std::nullopt;
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string text() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace caws
