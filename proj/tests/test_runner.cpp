#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "s2vi/runner.hpp"
#include "support.hpp"

using namespace s2vi;
using namespace s2vi::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "s2vi_test_runner" / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

std::vector<double> fields(const std::string& row) {
  std::vector<double> out;
  std::stringstream ss(row);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(std::strtod(cell.c_str(), nullptr));
  return out;
}

RunConfig preset_config(const std::string& name, const std::string& integrator = {}) {
  RunConfig c;
  c.preset = name;
  c.integrator = integrator;
  return c;
}

ErrorKind resolve_error(const RunConfig& c) {
  try {
    resolve(c);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "resolve accepted the config";
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST(Format, SeventeenSignificantDigits) {
  EXPECT_EQ(format_number(0.1), "1.0000000000000001e-01");
  EXPECT_EQ(format_number(-2.0), "-2.0000000000000000e+00");
  EXPECT_EQ(format_number(0.0), "0.0000000000000000e+00");
  Sampler rs(50);
  for (int k = 0; k < 1000; ++k) {
    const double x = rs.uniform(-1, 1) * std::pow(10.0, rs.uniform(-300, 300));
    EXPECT_EQ(std::strtod(format_number(x).c_str(), nullptr), x);
  }
}

TEST(Format, Headers) {
  EXPECT_EQ(trajectory_header(2), "t,q1x,q1y,q1z,w1x,w1y,w1z,q2x,q2y,q2z,w2x,w2y,w2z\n");
  EXPECT_EQ(diagnostics_header(), "t,total_energy,unit_error,tangency_error,momentum_e3\n");
  std::string row;
  append_diagnostics_row(row, DiagnosticSample{1.0, 2.0, 0.0, 0.0, std::nullopt});
  EXPECT_EQ(row.back(), '\n');
  EXPECT_EQ(row.substr(row.size() - 2), ",\n");
}

TEST(Integrators, NamesRoundTrip) {
  for (const char* name : {"vi-implicit", "vi-explicit", "rk2", "rk2-project", "rk4", "rk45"}) {
    EXPECT_STREQ(to_string(parse_integrator(name)), name);
  }
  EXPECT_THROW(parse_integrator("euler"), Error);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(config_from_json(json{{"presett", "dsp-100s"}}), Error);
  EXPECT_THROW(config_from_json(json{{"output_every", 0}}), Error);
  EXPECT_THROW(config_from_json(json{{"h", "fast"}}), Error);
  EXPECT_THROW(config_from_json(json{{"solver", {{"init", "warm"}}}}), Error);
  EXPECT_THROW(config_from_json(json::array()), Error);
  const auto c = config_from_json(json{{"preset", "dsp-100s"}, {"h", 0.02}, {"solver", {{"tol", 1e-12}, {"init", "zero"}}}});
  EXPECT_EQ(c.preset, "dsp-100s");
  EXPECT_EQ(*c.h, 0.02);
  EXPECT_EQ(c.solver.fp_tol, 1e-12);
  EXPECT_EQ(c.solver.init_strategy, InitStrategy::Zero);
}

TEST(Config, ResolveErrors) {
  EXPECT_EQ(resolve_error(preset_config("nope")), ErrorKind::ConfigError);
  EXPECT_EQ(resolve_error(preset_config("dsp-100s", "vi-explicit")), ErrorKind::ConfigError);
  EXPECT_EQ(resolve_error(preset_config("dsp-100s", "leapfrog")), ErrorKind::ConfigError);
  auto c = preset_config("dsp-100s");
  c.T = 1.005;
  c.h = 0.01;
  EXPECT_EQ(resolve_error(c), ErrorKind::ConfigError);
  c.T = 1.0;
  c.h = -0.01;
  EXPECT_EQ(resolve_error(c), ErrorKind::ConfigError);
  c = preset_config("dsp-100s");
  c.model_spec = json{{"type", "free_spheres"}, {"inertia", {1.0}}};
  EXPECT_EQ(resolve_error(c), ErrorKind::ConfigError);
  RunConfig inline_only;
  inline_only.model_spec = json{{"type", "free_spheres"}, {"inertia", {1.0}}};
  EXPECT_EQ(resolve_error(inline_only), ErrorKind::ConfigError);
}

TEST(Config, NonMultipleDurationIsFineForRk45) {
  auto c = preset_config("dsp-100s", "rk45");
  c.T = 1.005;
  EXPECT_NO_THROW(resolve(c));
}

TEST(Run, ZeroDurationWritesHeadersOnly) {
  auto c = preset_config("dsp-100s");
  c.T = 0.0;
  c.out_dir = scratch("t0");
  const auto r = run(c);
  ASSERT_EQ(r.exit_code, kExitOk);
  EXPECT_EQ(slurp(c.out_dir / "trajectory.csv"), trajectory_header(2));
  EXPECT_EQ(slurp(c.out_dir / "diagnostics.csv"), diagnostics_header());
  const auto summary = json::parse(slurp(c.out_dir / "summary.json"));
  EXPECT_EQ(summary["status"], "ok");
  EXPECT_TRUE(summary["drift"].is_null());
  EXPECT_EQ(summary["steps"], 0);
}

TEST(Run, TrajectoryRoundTripsBitExactly) {
  auto c = preset_config("dsp-100s");
  c.T = 0.5;
  c.out_dir = scratch("roundtrip");
  const auto r = run(c);
  ASSERT_EQ(r.exit_code, kExitOk);
  const auto rows = lines(slurp(c.out_dir / "trajectory.csv"));
  ASSERT_EQ(rows.size(), 52u);
  const auto last = fields(rows.back());
  ASSERT_EQ(last.size(), 13u);
  EXPECT_EQ(last[0], r.final_state.t);
  for (std::size_t i = 0; i < 2; ++i)
    for (int k = 0; k < 3; ++k) {
      EXPECT_EQ(last[1 + 6 * i + static_cast<std::size_t>(k)], r.final_state.q[i][k]);
      EXPECT_EQ(last[4 + 6 * i + static_cast<std::size_t>(k)], r.final_state.w[i][k]);
    }
  const auto first = fields(rows[1]);
  EXPECT_EQ(first[1], load_preset("dsp-100s").initial.q[0].x());
}

TEST(Run, ByteIdenticalReruns) {
  for (const char* integrator : {"vi-implicit", "rk45", "rk2-project"}) {
    auto c = preset_config("springs4", integrator);
    c.T = 1.0;
    c.out_dir = scratch(std::string("rerun_a_") + integrator);
    ASSERT_EQ(run(c).exit_code, kExitOk);
    auto d = c;
    d.out_dir = scratch(std::string("rerun_b_") + integrator);
    ASSERT_EQ(run(d).exit_code, kExitOk);
    EXPECT_EQ(slurp(c.out_dir / "trajectory.csv"), slurp(d.out_dir / "trajectory.csv")) << integrator;
    EXPECT_EQ(slurp(c.out_dir / "diagnostics.csv"), slurp(d.out_dir / "diagnostics.csv")) << integrator;
  }
}

TEST(Run, OutputDecimationKeepsLastSample) {
  auto c = preset_config("nbody3-10s");
  c.T = 1.0;
  c.output_every = 300;
  c.out_dir = scratch("decimate");
  const auto r = run(c);
  ASSERT_EQ(r.exit_code, kExitOk);
  const auto rows = lines(slurp(c.out_dir / "diagnostics.csv"));
  // header, k = 0, 300, 600, 900, 1000
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(fields(rows.back())[0], 1.0);
  EXPECT_EQ(r.summary["steps"], 1000);
  EXPECT_FALSE(fields(rows[1]).empty());
  EXPECT_NE(rows[1].back(), ',');  // momentum column filled for the n-body model
}

TEST(Run, SummaryContents) {
  auto c = preset_config("dsp-100s");
  c.T = 1.0;
  const auto r = run(c);
  ASSERT_EQ(r.exit_code, kExitOk);
  const auto& s = r.summary;
  EXPECT_EQ(s["integrator"], "vi-implicit");
  EXPECT_EQ(s["h"], 0.01);
  EXPECT_EQ(s["steps"], 100);
  EXPECT_EQ(s["scenario"]["name"], "dsp-100s");
  EXPECT_EQ(s["scenario"]["model"]["type"], "double_spherical_pendulum");
  EXPECT_LE(s["extrema"]["unit_error"]["max"].get<double>(), 1e-13);
  EXPECT_LE(s["solver_stats"]["max"].get<int>(), 20);
  EXPECT_LE(s["solver_stats"]["max_residual"].get<double>(), 1e-12);
  EXPECT_LE(s["momentum_e3"]["max_rel_drift"].get<double>(), 1e-10);
  EXPECT_GE(s["wall_time_s"].get<double>(), 0.0);
}

TEST(Run, InlineScenario) {
  RunConfig c;
  c.model_spec = json{{"type", "spherical_pendulum"}, {"m", 1.0}, {"l", 1.0}, {"g", 9.81}};
  c.initial = json{{"q", {{1.0, 0.0, 0.0}}}, {"w", {{0.0, 0.0, 1.0}}}};
  c.integrator = "vi-explicit";
  c.h = 1e-3;
  c.T = 1.0;
  const auto r = run(c);
  ASSERT_EQ(r.exit_code, kExitOk);
  EXPECT_EQ(r.summary["scenario"]["name"], "inline");
  EXPECT_LE(r.summary["drift"]["mean_abs_energy_dev"].get<double>(), 1e-4);
}

TEST(Run, StepTooLargeIsNumericalFailure) {
  auto c = preset_config("geodesic", "vi-explicit");
  c.h = 2.0;
  c.T = 4.0;
  c.out_dir = scratch("too_large");
  const auto r = run(c);
  EXPECT_EQ(r.exit_code, kExitNumericalFailure);
  const auto err = json::parse(slurp(c.out_dir / "error.json"));
  EXPECT_EQ(err["error"], "StepTooLarge");
  EXPECT_EQ(err["step"], 1);
  EXPECT_EQ(r.error, err);
}

TEST(Run, SolverBudgetExhaustedIsNumericalFailure) {
  auto c = preset_config("dsp-100s");
  c.T = 0.1;
  c.solver.max_iters = 1;
  const auto r = run(c);
  EXPECT_EQ(r.exit_code, kExitNumericalFailure);
  EXPECT_EQ(r.error["error"], "NoConvergence");
  EXPECT_TRUE(r.error.contains("step"));
}

TEST(Run, ConfigErrorsExitTwo) {
  auto c = preset_config("dsp-100s", "vi-explicit");
  c.out_dir = scratch("config_error");
  const auto r = run(c);
  EXPECT_EQ(r.exit_code, kExitConfigError);
  EXPECT_EQ(json::parse(slurp(c.out_dir / "error.json"))["error"], "ConfigError");
}

TEST(Run, Rk45EndsExactlyAtT) {
  auto c = preset_config("dsp-100s", "rk45");
  c.T = 2.5;
  const auto r = run(c);
  ASSERT_EQ(r.exit_code, kExitOk);
  EXPECT_EQ(r.final_state.t, 2.5);
  EXPECT_GT(r.summary["steps"].get<int>(), 10);
  EXPECT_TRUE(r.summary.contains("rk45_stats"));
}

TEST(Run, DoublePendulumEnergyVariation) {
  // reference mean energy variation: 2.1641e-5
  const auto r = run(preset_config("dsp-100s"));
  ASSERT_EQ(r.exit_code, kExitOk);
  const double dev = r.summary["drift"]["mean_abs_energy_dev"].get<double>();
  EXPECT_LE(dev, 1e-4);
  EXPECT_GE(dev, 2.1641e-6);
  EXPECT_LE(dev, 2.1641e-4);
}

TEST(Run, NBodyEnergyErrorRatio) {
  auto c = preset_config("nbody3-10s");
  const auto coarse = run(c);
  c.h = 1e-4;
  const auto fine = run(c);
  ASSERT_EQ(coarse.exit_code, kExitOk);
  ASSERT_EQ(fine.exit_code, kExitOk);
  const double ratio = coarse.summary["drift"]["mean_abs_energy_dev"].get<double>() /
                       fine.summary["drift"]["mean_abs_energy_dev"].get<double>();
  EXPECT_GE(ratio, 50.0);
  EXPECT_LE(ratio, 200.0);
  // reference 1.1717e-4 at h = 1e-3 is a max-deviation figure
  EXPECT_NEAR(std::log10(coarse.summary["drift"]["max_abs_energy_dev"].get<double>()), std::log10(1.1717e-4), 1.0);
}

TEST(Sweep, NeedsTwoDistinctStepSizes) {
  auto c = preset_config("geodesic");
  c.sweep = {0.01, 0.01};
  EXPECT_EQ(sweep(c).exit_code, kExitConfigError);
  c.sweep = {0.01};
  EXPECT_EQ(sweep(c).exit_code, kExitConfigError);
}

TEST(Sweep, GeodesicSecondOrder) {
  auto c = preset_config("geodesic");
  c.T = 5.0;
  c.sweep = {0.1, 0.05, 0.025, 0.0125};
  c.out_dir = scratch("sweep_geodesic");
  const auto r = sweep(c);
  ASSERT_EQ(r.exit_code, kExitOk);
  EXPECT_EQ(r.summary["reference"], "exact");
  EXPECT_NEAR(r.summary["final_error_slope"].get<double>(), 2.0, 0.2);
  EXPECT_TRUE(fs::exists(c.out_dir / "convergence.csv"));
  EXPECT_TRUE(fs::exists(c.out_dir / "sweep_summary.json"));
  EXPECT_TRUE(fs::exists(c.out_dir / "run_3" / "trajectory.csv"));
  EXPECT_EQ(lines(slurp(c.out_dir / "convergence.csv")).size(), 5u);
}

TEST(Sweep, RefinedReferenceForDoublePendulum) {
  auto c = preset_config("dsp-100s");
  c.T = 1.0;
  c.sweep = {0.02, 0.01, 0.005};
  const auto r = sweep(c);
  ASSERT_EQ(r.exit_code, kExitOk);
  EXPECT_EQ(r.summary["reference"], "refined");
  EXPECT_NEAR(r.summary["final_error_slope"].get<double>(), 2.0, 0.2);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.rows[0].h, 0.02);
}

TEST(Sweep, SlopeFit) {
  const std::vector<double> x{1, 2, 4, 8}, y{3, 12, 48, 192};
  EXPECT_NEAR(loglog_slope(x, y), 2.0, 1e-14);
  EXPECT_THROW(loglog_slope(std::vector<double>{1}, std::vector<double>{1}), Error);
  EXPECT_THROW(loglog_slope(std::vector<double>{1, 2}, std::vector<double>{0, 1}), Error);
}
