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

// Command-line front end: plan, smooth, rollout and check.
//
// Output files in --out are deterministic for fixed inputs. Wall-clock
// timings appear only in the report printed to stdout.

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "caws/evaluate.hpp"
#include "caws/io.hpp"
#include "caws/optimizer.hpp"
#include "caws/scenario.hpp"
#include "caws/search.hpp"

namespace {

enum ExitCode {
  kOk = 0,
  kUsage = 1,
  kParse = 2,
  kValidation = 3,
  kNoPath = 4,
  kInfeasible = 5,
  kMaxIterations = 6,
  kBadInitialGuess = 7,
  kOther = 8,
};

int exit_code(caws::ErrorCode code) {
  switch (code) {
    case caws::ErrorCode::kParseError:
      return kParse;
    case caws::ErrorCode::kValidationError:
      return kValidation;
    case caws::ErrorCode::kNoPath:
      return kNoPath;
    case caws::ErrorCode::kInfeasible:
      return kInfeasible;
    case caws::ErrorCode::kMaxIterations:
      return kMaxIterations;
    case caws::ErrorCode::kBadInitialGuess:
      return kBadInitialGuess;
    default:
      return kOther;
  }
}

struct Options {
  std::string command;
  std::string scenario;
  std::string out = "out";
  std::string trajectory;
  std::uint64_t seed = 0;
  int max_iter = 3000;
  double feas_tol = 1e-6;
  double opt_tol = 1e-6;
  std::string format = "csv";
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw caws::Error(caws::ErrorCode::kParseError, "cannot open file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

class Writer {
 public:
  Writer(const std::string& dir, caws::TableFormat format) : dir_(dir), format_(format) {
    std::filesystem::create_directories(dir_);
  }

  caws::TableFormat format() const { return format_; }

  /// Writes a table under `stem` with the extension of the table format.
  std::string table(const std::string& stem, const std::string& text) const {
    return write(stem + (format_ == caws::TableFormat::kCsv ? ".csv" : ".txt"), text);
  }

  std::string write(const std::string& name, const std::string& text) const {
    const std::filesystem::path path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return path.string();
  }

 private:
  std::filesystem::path dir_;
  caws::TableFormat format_;
};

void print_error(const std::string& code, const std::string& detail) {
  std::cerr << "error=" << code << " " << detail << "\n";
}

/// Everything except wall-clock timings, so the file is reproducible.
std::string deterministic_text(const caws::RunReport& report) {
  std::string out;
  for (const auto& [k, v] : report.entries()) {
    if (k.rfind("time.", 0) != 0) out += k + "=" + v + "\n";
  }
  return out;
}

int finish(const caws::RunReport& report, const Writer* writer) {
  if (writer) writer->write("report.txt", deterministic_text(report));
  std::cout << report.text();
  return kOk;
}

int run_check(const Options& o) {
  const caws::Scenario sc = caws::load_scenario_file(o.scenario);
  const auto knots = caws::read_trajectory(read_file(o.trajectory), sc.layout.size());
  const caws::ConstraintReport r =
      caws::constraint_report(knots, sc.start, sc.goal, sc.layout, sc.limits);
  const bool collides = caws::trajectory_collides(knots, sc);
  caws::RunReport report;
  report.set("command", std::string("check"));
  report.set("knots", knots.size());
  report.set("total_time", caws::total_time(knots));
  report.add_constraints(r);
  report.set("collision", collides);
  const bool ok = r.max_residual() <= o.feas_tol && !collides;
  report.set("success", ok);
  std::cout << report.text();
  if (ok) return kOk;
  if (collides) {
    print_error("Infeasible", "family=collision");
    return kInfeasible;
  }
  std::string worst;
  double worst_value = -1.0;
  for (const auto& [name, value] : r.families()) {
    if (value > worst_value) {
      worst = name;
      worst_value = value;
    }
  }
  std::ostringstream detail;
  detail << "family=" << worst << " residual=" << caws::io_detail::num(worst_value);
  print_error("Infeasible", detail.str());
  return kInfeasible;
}

int run_pipeline(const Options& o) {
  const Stopwatch total;
  const caws::Scenario sc = caws::load_scenario_file(o.scenario);
  const caws::TableFormat format =
      o.format == "tabular" ? caws::TableFormat::kTabular : caws::TableFormat::kCsv;
  const Writer writer(o.out, format);

  caws::RunReport report;
  report.set("command", o.command);
  report.set("scenario", std::filesystem::path(o.scenario).filename().string());
  report.set("seed", std::to_string(o.seed));

  const Stopwatch search_clock;
  const caws::InitialTrajectory initial = caws::plan(sc);
  report.set("time.search_s", search_clock.seconds());
  report.set("search.nodes_expanded", initial.nodes_expanded);
  report.set("search.knots", initial.knots.size());
  report.set("search.total_time", initial.total_time);
  writer.table("initial", caws::write_trajectory(initial.knots, format));
  writer.table("icm_initial", caws::write_icm_trace(initial.knots, format));
  if (o.command == "plan") {
    report.set("success", true);
    report.set("time.total_s", total.seconds());
    return finish(report, &writer);
  }

  caws::SolveOptions solve_options;
  solve_options.max_iterations = o.max_iter;
  solve_options.feas_tol = o.feas_tol;
  solve_options.opt_tol = o.opt_tol;
  const Stopwatch optimize_clock;
  const caws::OptimizedTrajectory opt = caws::solve(initial.knots, sc, solve_options);
  report.set("time.optimize_s", optimize_clock.seconds());

  // Residuals are reported for the trajectory as written, so that `check`
  // on the file reproduces them.
  const std::string text = caws::write_trajectory(opt.knots, format);
  writer.table("trajectory", text);
  writer.table("icm", caws::write_icm_trace(opt.knots, format));
  const auto written = caws::read_trajectory(text, sc.layout.size());
  const caws::OptProblem problem = caws::make_problem(initial.knots, sc);
  report.set("optimize.status", std::string(caws::to_string(opt.status)));
  report.set("optimize.iterations", opt.report.iterations);
  report.set("optimize.knots", written.size());
  report.set("optimize.total_time", caws::total_time(written));
  report.set("optimize.initial_objective", caws::objective(problem, caws::initial_guess(problem)));
  report.set("optimize.objective", caws::objective(problem, written));
  report.add_constraints(caws::constraint_report(written, sc.start, sc.goal, sc.layout, sc.limits));

  const bool converged = opt.status == caws::SolveStatus::kConverged;
  if (converged && o.command == "rollout") {
    const Stopwatch rollout_clock;
    const caws::ActuationLimits limits = caws::ActuationLimits::from(sc.layout);
    caws::FollowerOptions follow;
    follow.period = std::min(caws::follower_period(written), caws::follower_period(initial.knots));
    const caws::ReferencePath smooth = caws::smooth_reference(written);
    const caws::FollowRecord rec = caws::rollout(smooth, sc.layout, limits, follow);
    const caws::ReferencePath raw = caws::piecewise_twist_reference(initial.knots);
    const caws::FollowRecord raw_rec = caws::rollout(raw, sc.layout, limits, follow);
    report.set("time.rollout_s", rollout_clock.seconds());
    report.set("rollout.period", follow.period);
    report.set("rollout.ticks", rec.samples.size());
    report.add_metrics(caws::metrics(rec, smooth), "metrics.");
    report.add_metrics(caws::metrics(raw_rec, raw), "metrics_raw.");
    writer.table("rollout", caws::write_follow_record(rec, format));
    writer.table("rollout_raw", caws::write_follow_record(raw_rec, format));
  }
  report.set("success", converged);
  report.set("time.total_s", total.seconds());
  finish(report, &writer);
  if (converged) return kOk;
  const std::string code = opt.status == caws::SolveStatus::kInfeasible ? "Infeasible" : "MaxIterations";
  print_error(code, "message=\"" + opt.message + "\"");
  return opt.status == caws::SolveStatus::kInfeasible ? kInfeasible : kMaxIterations;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Omnidirectional all-wheel-steering trajectory planner"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", o.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Seed for randomized tie-breaking (recorded in the report)");
    sub->add_option("--feas-tol", o.feas_tol, "Constraint residual tolerance")->check(CLI::PositiveNumber);
  };
  auto add_pipeline = [&](CLI::App* sub) {
    add_common(sub);
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    sub->add_option("--max-iter", o.max_iter, "Optimizer iteration limit")->check(CLI::PositiveNumber);
    sub->add_option("--opt-tol", o.opt_tol, "Optimality tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--format", o.format, "Table format")
        ->check(CLI::IsMember({"csv", "tabular"}))
        ->capture_default_str();
  };
  add_pipeline(app.add_subcommand("plan", "Search only"));
  add_pipeline(app.add_subcommand("smooth", "Search, then optimize"));
  add_pipeline(app.add_subcommand("rollout", "Search, optimize, follow and measure"));
  CLI::App* check = app.add_subcommand("check", "Re-validate a trajectory file");
  add_common(check);
  check->add_option("--trajectory", o.trajectory, "Trajectory table")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  o.command = app.get_subcommands().front()->get_name();

  try {
    return o.command == "check" ? run_check(o) : run_pipeline(o);
  } catch (const caws::Error& e) {
    print_error(caws::to_string(e.code()), "message=\"" + std::string(e.what()) + "\"");
    return exit_code(e.code());
  } catch (const std::exception& e) {
    print_error("IoError", "message=\"" + std::string(e.what()) + "\"");
    return kOther;
  }
}
