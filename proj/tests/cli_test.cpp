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
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "caws/io.hpp"
#include "caws/scenario.hpp"
#include "support.hpp"

namespace caws {
namespace {

namespace fs = std::filesystem;

std::map<std::string, std::string> parse_report(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

std::string write_scratch(const std::string& dir, const std::string& name, const std::string& text) {
  const fs::path path = test::scratch_dir(dir) / name;
  std::ofstream(path, std::ios::binary) << text;
  return path.string();
}

std::string quoted(const std::string& path) { return "\"" + path + "\""; }

TEST(Cli, PlanWritesInitialTables) {
  const std::string out = test::scratch_dir("cli_plan").string();
  const auto r = test::run_cli("plan --scenario " + quoted(test::scenario_path("straight.txt")) +
                                   " --out " + quoted(out),
                               "plan");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out + "/initial.csv"));
  EXPECT_TRUE(fs::exists(out + "/icm_initial.csv"));
  EXPECT_FALSE(fs::exists(out + "/trajectory.csv"));
  const auto rep = parse_report(r.out);
  EXPECT_EQ(rep.at("success"), "true");
  EXPECT_EQ(rep.at("command"), "plan");
}

TEST(Cli, SmoothStraightHasZeroSteering) {
  const std::string out = test::scratch_dir("cli_smooth").string();
  const auto r = test::run_cli("smooth --scenario " + quoted(test::scenario_path("straight.txt")) +
                                   " --out " + quoted(out),
                               "smooth");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto knots = read_trajectory(test::read_text(out + "/trajectory.csv"), 4);
  ASSERT_GE(knots.size(), 2u);
  for (const auto& k : knots) {
    for (double s : k.wheel_steer) EXPECT_LE(std::abs(s), 1e-6);
  }
  const auto rep = parse_report(r.out);
  EXPECT_LE(std::stod(rep.at("residual.max")), 1e-6);
}

TEST(Cli, TabularFormat) {
  const std::string out = test::scratch_dir("cli_tabular").string();
  const auto r = test::run_cli("plan --format tabular --scenario " +
                                   quoted(test::scenario_path("straight.txt")) + " --out " + quoted(out),
                               "tabular");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const std::string text = test::read_text(out + "/initial.txt");
  EXPECT_EQ(text.find(','), std::string::npos);
  EXPECT_NO_THROW(read_trajectory(text, 4));
}

TEST(Cli, RolloutReportsTimingsOnStdout) {
  const std::string out = test::scratch_dir("cli_rollout").string();
  const auto r = test::run_cli("rollout --scenario " + quoted(test::scenario_path("turn90.txt")) +
                                   " --out " + quoted(out),
                               "rollout");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto rep = parse_report(r.out);
  for (const char* key : {"time.search_s", "time.optimize_s", "time.rollout_s", "time.total_s"}) {
    ASSERT_TRUE(rep.count(key)) << key;
    EXPECT_GE(std::stod(rep.at(key)), 0.0) << key;
  }
  EXPECT_TRUE(rep.count("metrics.slide_lateral_max"));
  EXPECT_TRUE(rep.count("metrics_raw.jerk_total"));
  EXPECT_TRUE(fs::exists(out + "/rollout.csv"));
  EXPECT_TRUE(fs::exists(out + "/rollout_raw.csv"));
  // The saved report omits wall-clock timings.
  const std::string saved = test::read_text(out + "/report.txt");
  EXPECT_EQ(saved.find("time."), std::string::npos);
  EXPECT_NE(saved.find("metrics.jerk_total="), std::string::npos);
}

TEST(Cli, RolloutIsDeterministic) {
  const std::string a = test::scratch_dir("cli_det_a").string();
  const std::string b = test::scratch_dir("cli_det_b").string();
  const std::string scenario = quoted(test::scenario_path("bicycle.txt"));
  ASSERT_EQ(test::run_cli("rollout --scenario " + scenario + " --out " + quoted(a), "det_a").exit_code, 0);
  ASSERT_EQ(test::run_cli("rollout --scenario " + scenario + " --out " + quoted(b), "det_b").exit_code, 0);
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const fs::path other = fs::path(b) / entry.path().filename();
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(test::read_text(entry.path().string()), test::read_text(other.string()))
        << entry.path().filename();
    ++compared;
  }
  EXPECT_EQ(compared, 7u);
}

TEST(Cli, CheckReproducesResiduals) {
  const std::string out = test::scratch_dir("cli_check_src").string();
  const std::string scenario = quoted(test::scenario_path("front90_rear75.txt"));
  const auto smooth = test::run_cli("smooth --scenario " + scenario + " --out " + quoted(out), "check_src");
  ASSERT_EQ(smooth.exit_code, 0) << smooth.err;
  const auto check = test::run_cli(
      "check --scenario " + scenario + " --trajectory " + quoted(out + "/trajectory.csv"), "check");
  ASSERT_EQ(check.exit_code, 0) << check.err;
  const auto a = parse_report(smooth.out), b = parse_report(check.out);
  std::size_t families = 0;
  for (const auto& [key, value] : a) {
    if (key.rfind("residual.", 0) != 0) continue;
    ASSERT_TRUE(b.count(key)) << key;
    EXPECT_EQ(b.at(key), value) << key;
    ++families;
  }
  EXPECT_EQ(families, 10u);
  EXPECT_EQ(b.at("collision"), "false");
}

TEST(Cli, CheckFlagsCorruptedTrajectory) {
  const std::string out = test::scratch_dir("cli_corrupt_src").string();
  const std::string scenario = test::scenario_path("straight.txt");
  ASSERT_EQ(test::run_cli("smooth --scenario " + quoted(scenario) + " --out " + quoted(out), "corrupt_src")
                .exit_code,
            0);
  auto knots = read_trajectory(test::read_text(out + "/trajectory.csv"), 4);
  knots[knots.size() / 2].state.y += 0.05;
  const std::string path = write_scratch("cli_corrupt", "bad.csv", write_trajectory(knots));
  const auto r = test::run_cli("check --scenario " + quoted(scenario) + " --trajectory " + quoted(path),
                               "corrupt");
  EXPECT_EQ(r.exit_code, 5);
  EXPECT_NE(r.err.find("error=Infeasible"), std::string::npos);
  EXPECT_NE(r.err.find("family=continuity"), std::string::npos) << r.err;
  EXPECT_EQ(parse_report(r.out).at("success"), "false");
}

TEST(Cli, CheckFlagsCollision) {
  const std::string out = test::scratch_dir("cli_collide_src").string();
  ASSERT_EQ(test::run_cli("smooth --scenario " + quoted(test::scenario_path("straight.txt")) + " --out " +
                              quoted(out),
                          "collide_src")
                .exit_code,
            0);
  Scenario sc = test::load_named("straight.txt");
  std::vector<bool> cells(sc.grid.cells());
  const Eigen::Vector2d origin = sc.grid.origin();
  for (int iy = 0; iy < sc.grid.height(); ++iy) {
    for (int ix = 0; ix < sc.grid.width(); ++ix) {
      const Eigen::Vector2d c = sc.grid.cell_center(ix, iy);
      cells[iy * sc.grid.width() + ix] = cells[iy * sc.grid.width() + ix] || (c - Eigen::Vector2d(2.5, 0.0)).norm() < 0.3;
    }
  }
  sc.grid = OccupancyGrid(sc.grid.width(), sc.grid.height(), sc.grid.resolution(), origin, cells);
  const std::string path = write_scratch("cli_collide", "blocked.txt", serialize_scenario(sc));
  const auto r = test::run_cli("check --scenario " + quoted(path) + " --trajectory " +
                                   quoted(out + "/trajectory.csv"),
                               "collide");
  EXPECT_EQ(r.exit_code, 5);
  EXPECT_NE(r.err.find("family=collision"), std::string::npos) << r.err;
}

TEST(Cli, ExitCodes) {
  const std::string straight = test::read_text(test::scenario_path("straight.txt"));

  EXPECT_EQ(test::run_cli("", "usage_none").exit_code, 1);
  EXPECT_EQ(test::run_cli("plan --scenario /nonexistent/file.txt", "usage_missing").exit_code, 1);
  EXPECT_EQ(test::run_cli("frobnicate", "usage_unknown").exit_code, 1);

  std::string parse = straight;
  parse.replace(parse.find("x = 5"), 5, "x = five");
  const auto p = test::run_cli("plan --scenario " + quoted(write_scratch("cli_parse", "s.txt", parse)),
                               "parse");
  EXPECT_EQ(p.exit_code, 2);
  EXPECT_NE(p.err.find("error=ParseError"), std::string::npos) << p.err;

  std::string invalid = straight;
  invalid.replace(invalid.find("v_max = 1.0"), 11, "v_max = -1.0");
  const auto v = test::run_cli("plan --scenario " + quoted(write_scratch("cli_valid", "s.txt", invalid)),
                               "valid");
  EXPECT_EQ(v.exit_code, 3);
  EXPECT_NE(v.err.find("v_max"), std::string::npos) << v.err;

  Scenario budget = test::load_named("parking.txt");
  budget.search.max_expansions = 5;
  const auto n = test::run_cli(
      "plan --scenario " + quoted(write_scratch("cli_nopath", "s.txt", serialize_scenario(budget))), "nopath");
  EXPECT_EQ(n.exit_code, 4);
  EXPECT_NE(n.err.find("error=NoPath"), std::string::npos) << n.err;

  const auto m = test::run_cli("smooth --max-iter 1 --scenario " + quoted(test::scenario_path("parking.txt")) +
                                   " --out " + quoted(test::scratch_dir("cli_maxiter").string()),
                               "maxiter");
  EXPECT_EQ(m.exit_code, 6);
  EXPECT_NE(m.err.find("error=MaxIterations"), std::string::npos) << m.err;
}

}  // namespace
}  // namespace caws
