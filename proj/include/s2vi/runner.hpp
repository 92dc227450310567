#pragma once

// Batch runs: resolve a scenario, integrate it, stream CSV output and write a
// JSON summary. Used by the s2vi command-line tool and by the acceptance suite.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "s2vi/continuous.hpp"
#include "s2vi/diagnostics.hpp"
#include "s2vi/errors.hpp"
#include "s2vi/integrator.hpp"
#include "s2vi/io.hpp"
#include "s2vi/scenario.hpp"

namespace s2vi {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitNumericalFailure = 3;

enum class IntegratorKind { ViImplicit, ViExplicit, Rk2, Rk2Project, Rk4, Rk45 };

inline const char* to_string(IntegratorKind k) {
  switch (k) {
    case IntegratorKind::ViImplicit: return "vi-implicit";
    case IntegratorKind::ViExplicit: return "vi-explicit";
    case IntegratorKind::Rk2: return "rk2";
    case IntegratorKind::Rk2Project: return "rk2-project";
    case IntegratorKind::Rk4: return "rk4";
    case IntegratorKind::Rk45: return "rk45";
  }
  return "unknown";
}

inline IntegratorKind parse_integrator(const std::string& name) {
  for (auto k : {IntegratorKind::ViImplicit, IntegratorKind::ViExplicit, IntegratorKind::Rk2,
                 IntegratorKind::Rk2Project, IntegratorKind::Rk4, IntegratorKind::Rk45}) {
    if (name == to_string(k)) return k;
  }
  throw Error(ErrorKind::ConfigError, "unknown integrator '" + name + "'");
}

struct RunConfig {
  std::string preset;  // empty when the scenario is given inline
  json model_spec;
  json initial;
  std::string integrator;  // empty: scenario default
  std::optional<double> h;
  std::optional<double> T;
  std::size_t output_every = 1;
  SolverConfig solver;
  Rk45Options rk45;
  std::filesystem::path out_dir;  // empty: no files are written
  std::vector<double> sweep;
};

inline const char* to_string(InitStrategy s) { return s == InitStrategy::Zero ? "zero" : "previous"; }

/// Parses a JSON config document. Unknown keys are rejected.
inline RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::ConfigError, "config must be a JSON object");
  static const char* known[] = {"preset", "model", "initial", "integrator", "h", "T", "output_every",
                                "solver", "rk45", "out_dir", "sweep"};
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known)) {
      throw Error(ErrorKind::ConfigError, "unknown config key '" + key + "'");
    }
  }
  RunConfig c;
  try {
    if (j.contains("preset")) c.preset = j.at("preset").get<std::string>();
    if (j.contains("model")) c.model_spec = j.at("model");
    if (j.contains("initial")) c.initial = j.at("initial");
    if (j.contains("integrator")) c.integrator = j.at("integrator").get<std::string>();
    if (j.contains("h")) c.h = j.at("h").get<double>();
    if (j.contains("T")) c.T = j.at("T").get<double>();
    if (j.contains("output_every")) {
      const auto every = j.at("output_every").get<long long>();
      if (every < 1) throw Error(ErrorKind::ConfigError, "output_every must be at least 1");
      c.output_every = static_cast<std::size_t>(every);
    }
    if (j.contains("solver")) {
      const json& s = j.at("solver");
      if (s.contains("tol")) c.solver.fp_tol = s.at("tol").get<double>();
      if (s.contains("max_iters")) c.solver.max_iters = s.at("max_iters").get<int>();
      if (s.contains("init")) {
        const auto init = s.at("init").get<std::string>();
        if (init == "zero") c.solver.init_strategy = InitStrategy::Zero;
        else if (init == "previous") c.solver.init_strategy = InitStrategy::PreviousStep;
        else throw Error(ErrorKind::ConfigError, "solver.init must be 'zero' or 'previous'");
      }
    }
    if (j.contains("rk45")) {
      const json& r = j.at("rk45");
      if (r.contains("atol")) c.rk45.atol = r.at("atol").get<double>();
      if (r.contains("rtol")) c.rk45.rtol = r.at("rtol").get<double>();
    }
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("sweep")) c.sweep = j.at("sweep").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("malformed config: ") + e.what());
  }
  return c;
}

struct ResolvedRun {
  PresetScenario scenario;
  IntegratorKind integrator = IntegratorKind::ViImplicit;
  double h = 0.0;
  double T = 0.0;
  std::size_t steps = 0;
};

inline ResolvedRun resolve(const RunConfig& c) {
  ResolvedRun r;
  if (!c.preset.empty()) {
    if (!c.model_spec.is_null() || !c.initial.is_null()) {
      throw Error(ErrorKind::ConfigError, "give either a preset or an inline model, not both");
    }
    try {
      r.scenario = load_preset(c.preset);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ConfigError) throw;
      throw Error(ErrorKind::ConfigError, e.what());
    }
  } else {
    if (c.model_spec.is_null() || c.initial.is_null()) {
      throw Error(ErrorKind::ConfigError, "inline scenarios need both 'model' and 'initial'");
    }
    r.scenario.name = "inline";
    r.scenario.model = make_model(c.model_spec);
    r.scenario.model_spec = c.model_spec;
    r.scenario.initial = make_initial_state(c.initial);
    if (r.scenario.initial.size() != r.scenario.model->size()) {
      throw Error(ErrorKind::ConfigError, "initial state size does not match the model");
    }
    r.scenario.integrator = "vi-implicit";
  }
  r.integrator = parse_integrator(c.integrator.empty() ? r.scenario.integrator : c.integrator);
  if (!c.h && r.scenario.h <= 0.0) throw Error(ErrorKind::ConfigError, "step size h is required");
  if (!c.T && r.scenario.h <= 0.0) throw Error(ErrorKind::ConfigError, "duration T is required");
  r.h = c.h.value_or(r.scenario.h);
  r.T = c.T.value_or(r.scenario.T);
  if (!(r.h > 0.0) || !std::isfinite(r.h)) throw Error(ErrorKind::ConfigError, "h must be positive");
  if (!(r.T >= 0.0) || !std::isfinite(r.T)) throw Error(ErrorKind::ConfigError, "T must be non-negative");
  if (c.output_every < 1) throw Error(ErrorKind::ConfigError, "output_every must be at least 1");
  try {
    c.solver.check();
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, e.what());
  }
  if (!(c.rk45.atol > 0.0) || !(c.rk45.rtol > 0.0)) throw Error(ErrorKind::ConfigError, "rk45 tolerances must be positive");
  // rk45 treats h as its first trial step and ends exactly at T
  const double steps = std::round(r.T / r.h);
  if (r.integrator != IntegratorKind::Rk45 && std::abs(steps * r.h - r.T) > 1e-9 * std::max(r.T, r.h)) {
    throw Error(ErrorKind::ConfigError, "T must be an integer multiple of h");
  }
  r.steps = static_cast<std::size_t>(steps);
  if (r.integrator == IntegratorKind::ViExplicit && !r.scenario.model->inertia().is_diagonal()) {
    throw Error(ErrorKind::ConfigError, "vi-explicit requires diagonal inertia");
  }
  return r;
}

struct RunResult {
  int exit_code = kExitOk;
  json summary;  // null on failure
  json error;    // null on success
  SystemState final_state;
};

namespace detail {

class BufferedFile {
 public:
  explicit BufferedFile(const std::filesystem::path& path) {
    if (!path.empty()) {
      out_.open(path, std::ios::binary | std::ios::trunc);
      if (!out_) throw Error(ErrorKind::ConfigError, "cannot open " + path.string() + " for writing");
    }
  }
  ~BufferedFile() { flush(); }

  std::string& buffer() noexcept { return buf_; }

  void maybe_flush() {
    if (buf_.size() > (1u << 20)) flush();
  }
  void flush() {
    if (out_.is_open()) out_.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    buf_.clear();
    if (out_.is_open()) out_.flush();
  }

 private:
  std::ofstream out_;
  std::string buf_;
};

struct Range {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
  void add(double x) {
    min = std::min(min, x);
    max = std::max(max, x);
  }
  json to_json() const {
    if (min > max) return nullptr;
    return {{"min", min}, {"max", max}};
  }
};

struct StepStats {
  std::size_t steps = 0;
  long long total_iterations = 0;
  int max_iterations = 0;
  double max_residual = 0.0;
  long long rk45_rejections = 0;
};

using StepFn = std::function<SystemState(const SystemState&, StepStats&)>;

inline StepFn make_stepper(const Model& model, IntegratorKind kind, double h, double t_end,
                           const SolverConfig& solver, const Rk45Options& rk45) {
  switch (kind) {
    case IntegratorKind::ViImplicit:
    case IntegratorKind::ViExplicit: {
      auto vs = std::make_shared<VariationalStepper>(
          model, h, kind == IntegratorKind::ViImplicit ? VariationalForm::Implicit : VariationalForm::Explicit, solver);
      return [vs](const SystemState& s, StepStats& st) {
        auto next = vs->step(s);
        const auto& rep = vs->last_report();
        st.total_iterations += rep.iterations_used;
        st.max_iterations = std::max(st.max_iterations, rep.iterations_used);
        st.max_residual = std::max(st.max_residual, rep.residual);
        return next;
      };
    }
    case IntegratorKind::Rk2:
      return [&model, h](const SystemState& s, StepStats&) { return rk2_step(model, s, h); };
    case IntegratorKind::Rk2Project:
      return [&model, h](const SystemState& s, StepStats&) { return rk2_reprojection_step(model, s, h); };
    case IntegratorKind::Rk4:
      return [&model, h](const SystemState& s, StepStats&) { return rk4_step(model, s, h); };
    case IntegratorKind::Rk45: {
      // one accepted adaptive step per call, clipped so the run ends exactly at t_end
      auto h_next = std::make_shared<double>(h);
      return [&model, rk45, h_next, t_end](const SystemState& s, StepStats& st) {
        const double remaining = t_end - s.t;
        auto r = rk45_step(model, s, std::min(*h_next, remaining), rk45);
        const bool reached = r.h_taken == remaining;
        if (reached) r.state.t = t_end;
        // a step clipped to the end time should not shrink the next trial
        if (!reached || r.h_next > *h_next) *h_next = r.h_next;
        st.rk45_rejections += r.rejections;
        return std::move(r.state);
      };
    }
  }
  throw Error(ErrorKind::InvalidArgument, "unknown integrator");
}

inline json vec_list_json(const std::vector<Vec3>& v) {
  json a = json::array();
  for (const auto& x : v) a.push_back(from_vec3(x));
  return a;
}

inline bool is_numerical(ErrorKind k) {
  switch (k) {
    case ErrorKind::ConfigError:
    case ErrorKind::UnknownPreset:
      return false;
    default:
      return true;
  }
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::ConfigError, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

}  // namespace detail

inline json error_json(const Error& e, std::optional<std::size_t> step, std::optional<double> t) {
  json j = {{"status", "error"}, {"error", to_string(e.kind())}, {"message", e.what()}};
  j["step"] = step ? json(*step) : json(nullptr);
  j["t"] = t ? json(*t) : json(nullptr);
  if (const auto* nc = dynamic_cast<const NoConvergenceError*>(&e)) {
    j["iterations"] = nc->iterations();
    j["residual"] = nc->residual();
  }
  return j;
}

/// Integrates an already resolved run. Files go to `out_dir` unless it is empty.
inline RunResult run_resolved(const ResolvedRun& rr, const RunConfig& cfg) {
  const auto wall_start = std::chrono::steady_clock::now();
  const Model& model = *rr.scenario.model;
  const auto& dir = cfg.out_dir;
  if (!dir.empty()) std::filesystem::create_directories(dir);

  RunResult result;
  detail::BufferedFile traj(dir.empty() ? dir : dir / "trajectory.csv");
  detail::BufferedFile diag(dir.empty() ? dir : dir / "diagnostics.csv");
  traj.buffer() = trajectory_header(model.size());
  diag.buffer() = diagnostics_header();

  DriftAccumulator drift;
  detail::Range energy, unit, tangency, momentum;
  double e0 = 0.0, j0 = 0.0, max_momentum_drift = 0.0;
  detail::StepStats stats;

  SystemState s = rr.scenario.initial;
  const double t0 = s.t;
  std::size_t k = 0;
  bool last = rr.steps == 0;
  const bool adaptive = rr.integrator == IntegratorKind::Rk45;

  auto record = [&](const SystemState& st) {
    const auto d = sample_diagnostics(model, st);
    if (k == 0) {
      e0 = d.total_energy;
      j0 = d.momentum_e3.value_or(0.0);
    }
    drift.add(d);
    energy.add(d.total_energy);
    unit.add(d.unit_error);
    tangency.add(d.tangency_error);
    if (d.momentum_e3) {
      momentum.add(*d.momentum_e3);
      max_momentum_drift = std::max(max_momentum_drift, std::abs(*d.momentum_e3 - j0));
    }
    if (k % cfg.output_every == 0 || last) {
      append_trajectory_row(traj.buffer(), st);
      append_diagnostics_row(diag.buffer(), d);
      traj.maybe_flush();
      diag.maybe_flush();
    }
  };

  try {
    if (rr.steps > 0) {
      const double t_end = t0 + rr.T;
      const double slack = 1e-14 * std::max(1.0, std::abs(t_end));
      auto step = detail::make_stepper(model, rr.integrator, rr.h, t_end, cfg.solver, cfg.rk45);
      record(s);
      for (k = 1;; ++k) {
        if (adaptive ? t_end - s.t <= slack : k > rr.steps) break;
        s = step(s, stats);
        if (!adaptive) s.t = t0 + static_cast<double>(k) * rr.h;
        last = !adaptive ? k == rr.steps : t_end - s.t <= slack;
        record(s);
      }
      --k;
    }
  } catch (const Error& e) {
    traj.flush();
    diag.flush();
    result.exit_code = detail::is_numerical(e.kind()) ? kExitNumericalFailure : kExitConfigError;
    result.error = error_json(e, k, s.t);
    result.final_state = s;
    if (!dir.empty()) detail::write_json(dir / "error.json", result.error);
    return result;
  }
  traj.flush();
  diag.flush();
  stats.steps = k;

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  json summary;
  summary["status"] = "ok";
  summary["scenario"] = {{"name", rr.scenario.name},
                         {"model", rr.scenario.model_spec},
                         {"n", model.size()},
                         {"initial", {{"t", t0}, {"q", detail::vec_list_json(rr.scenario.initial.q)},
                                      {"w", detail::vec_list_json(rr.scenario.initial.w)}}}};
  if (!rr.scenario.notes.empty()) summary["scenario"]["notes"] = rr.scenario.notes;
  summary["integrator"] = to_string(rr.integrator);
  summary["h"] = rr.h;
  summary["T"] = rr.T;
  summary["steps"] = stats.steps;
  summary["output_every"] = cfg.output_every;
  summary["solver"] = {{"tol", cfg.solver.fp_tol}, {"max_iters", cfg.solver.max_iters},
                       {"init", to_string(cfg.solver.init_strategy)}};
  if (rr.integrator == IntegratorKind::Rk45) summary["rk45"] = {{"atol", cfg.rk45.atol}, {"rtol", cfg.rk45.rtol}};

  if (drift.count() >= 2) {
    const auto ds = drift.result();
    summary["drift"] = {{"mean_abs_energy_dev", ds.mean_abs_energy_dev},
                        {"max_abs_energy_dev", std::max(energy.max - e0, e0 - energy.min)},
                        {"linear_slope", ds.linear_slope},
                        {"mean_unit_error", ds.mean_unit_error}};
  } else {
    summary["drift"] = nullptr;
  }
  summary["extrema"] = {{"total_energy", energy.to_json()},
                        {"unit_error", unit.to_json()},
                        {"tangency_error", tangency.to_json()},
                        {"momentum_e3", momentum.to_json()}};
  if (drift.count() > 0) {
    summary["initial_energy"] = e0;
    summary["final_energy"] = total_energy(model, s);
  } else {
    summary["initial_energy"] = nullptr;
    summary["final_energy"] = nullptr;
  }
  if (momentum.min <= momentum.max) {
    summary["momentum_e3"] = {{"initial", j0},
                              {"max_abs_drift", max_momentum_drift},
                              {"max_rel_drift", max_momentum_drift / std::max(std::abs(j0), 1e-300)}};
  } else {
    summary["momentum_e3"] = nullptr;
  }
  json iters = nullptr;
  if (rr.integrator == IntegratorKind::ViImplicit && stats.steps > 0) {
    iters = {{"total", stats.total_iterations},
             {"mean", static_cast<double>(stats.total_iterations) / static_cast<double>(stats.steps)},
             {"max", stats.max_iterations},
             {"max_residual", stats.max_residual}};
  }
  summary["solver_stats"] = iters;
  if (rr.integrator == IntegratorKind::Rk45) {
    summary["rk45_stats"] = {{"rejections", stats.rk45_rejections}};
  }
  summary["wall_time_s"] = wall;

  if (!dir.empty()) detail::write_json(dir / "summary.json", summary);
  result.summary = std::move(summary);
  result.final_state = std::move(s);
  return result;
}

/// Resolves and runs a config; configuration problems become exit code 2.
inline RunResult run(const RunConfig& cfg) {
  ResolvedRun rr;
  try {
    rr = resolve(cfg);
  } catch (const Error& e) {
    RunResult r;
    r.exit_code = kExitConfigError;
    r.error = error_json(e, std::nullopt, std::nullopt);
    if (!cfg.out_dir.empty()) {
      std::filesystem::create_directories(cfg.out_dir);
      detail::write_json(cfg.out_dir / "error.json", r.error);
    }
    return r;
  }
  return run_resolved(rr, cfg);
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorKind::InvalidArgument, "slope fit needs two points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw Error(ErrorKind::InvalidArgument, "slope fit needs positive data");
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[i]) - my);
  }
  if (sxx == 0.0) throw Error(ErrorKind::InvalidArgument, "slope fit needs distinct x values");
  return sxy / sxx;
}

struct SweepRow {
  double h = 0.0;
  double final_error = 0.0;
  double mean_abs_energy_dev = 0.0;
  double mean_unit_error = 0.0;
};

struct SweepResult {
  int exit_code = kExitOk;
  std::vector<SweepRow> rows;
  json summary;
  json error;
};

/// Runs the config once per step size in cfg.sweep. The final-time error is
/// measured against the model's exact solution when it has one, otherwise
/// against a run of the same integrator at a sixteenth of the smallest h.
inline SweepResult sweep(const RunConfig& cfg) {
  SweepResult out;
  const auto& dir = cfg.out_dir;
  auto fail = [&](const json& err, int code) {
    out.exit_code = code;
    out.error = err;
    if (!dir.empty()) {
      std::filesystem::create_directories(dir);
      detail::write_json(dir / "error.json", err);
    }
    return out;
  };

  std::vector<double> hs = cfg.sweep;
  std::sort(hs.begin(), hs.end(), std::greater<>());
  hs.erase(std::unique(hs.begin(), hs.end()), hs.end());
  if (hs.size() < 2) {
    return fail(error_json(Error(ErrorKind::ConfigError, "a sweep needs at least two distinct step sizes"),
                           std::nullopt, std::nullopt),
                kExitConfigError);
  }

  std::vector<ResolvedRun> runs;
  try {
    for (double h : hs) {
      RunConfig c = cfg;
      c.h = h;
      runs.push_back(resolve(c));
    }
  } catch (const Error& e) {
    return fail(error_json(e, std::nullopt, std::nullopt), kExitConfigError);
  }

  const auto wall_start = std::chrono::steady_clock::now();
  const auto& base = runs.front();
  const double t_final = base.scenario.initial.t + base.T;
  std::string reference_kind = "exact";
  auto reference = base.scenario.model->exact_solution(base.scenario.initial, t_final);
  if (!reference) {
    reference_kind = "refined";
    RunConfig c = cfg;
    c.out_dir.clear();
    c.h = hs.back() / 16.0;
    ResolvedRun rr;
    try {
      rr = resolve(c);
    } catch (const Error& e) {
      return fail(error_json(e, std::nullopt, std::nullopt), kExitConfigError);
    }
    auto ref = run_resolved(rr, c);
    if (ref.exit_code != kExitOk) return fail(ref.error, ref.exit_code);
    reference = std::move(ref.final_state);
  }

  for (std::size_t i = 0; i < runs.size(); ++i) {
    RunConfig c = cfg;
    c.h = runs[i].h;
    if (!dir.empty()) c.out_dir = dir / ("run_" + std::to_string(i));
    auto r = run_resolved(runs[i], c);
    if (r.exit_code != kExitOk) return fail(r.error, r.exit_code);
    SweepRow row;
    row.h = runs[i].h;
    row.final_error = state_distance(r.final_state, *reference);
    if (!r.summary["drift"].is_null()) {
      row.mean_abs_energy_dev = r.summary["drift"]["mean_abs_energy_dev"].get<double>();
      row.mean_unit_error = r.summary["drift"]["mean_unit_error"].get<double>();
    }
    out.rows.push_back(row);
  }

  auto fit = [&](auto member) -> json {
    std::vector<double> x, y;
    for (const auto& r : out.rows) {
      if (r.*member > 0.0) {
        x.push_back(r.h);
        y.push_back(r.*member);
      }
    }
    if (x.size() < 2) return nullptr;
    return loglog_slope(x, y);
  };

  json rows = json::array();
  for (const auto& r : out.rows) {
    rows.push_back({{"h", r.h}, {"final_error", r.final_error}, {"mean_abs_energy_dev", r.mean_abs_energy_dev},
                    {"mean_unit_error", r.mean_unit_error}});
  }
  out.summary = {
      {"status", "ok"},
      {"scenario", {{"name", base.scenario.name}, {"model", base.scenario.model_spec}, {"n", base.scenario.model->size()}}},
      {"integrator", to_string(base.integrator)},
      {"T", base.T},
      {"reference", reference_kind},
      {"rows", rows},
      {"final_error_slope", fit(&SweepRow::final_error)},
      {"energy_dev_slope", fit(&SweepRow::mean_abs_energy_dev)},
      {"wall_time_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count()},
  };

  if (!dir.empty()) {
    std::string csv = "h,final_error,mean_abs_energy_dev,mean_unit_error\n";
    for (const auto& r : out.rows) {
      append_number(csv, r.h);
      csv += ',';
      append_number(csv, r.final_error);
      csv += ',';
      append_number(csv, r.mean_abs_energy_dev);
      csv += ',';
      append_number(csv, r.mean_unit_error);
      csv += '\n';
    }
    std::ofstream(dir / "convergence.csv", std::ios::binary | std::ios::trunc) << csv;
    detail::write_json(dir / "sweep_summary.json", out.summary);
  }
  return out;
}

}  // namespace s2vi
