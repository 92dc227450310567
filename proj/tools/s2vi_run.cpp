// Command-line runner: s2vi-run --preset dsp-100s --out-dir out/dsp

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "s2vi/runner.hpp"
#include "s2vi/scenario.hpp"

namespace {

std::vector<double> parse_h_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw s2vi::Error(s2vi::ErrorKind::ConfigError, "bad step size '" + item + "' in --sweep");
    out.push_back(v);
  }
  return out;
}

int report(const nlohmann::json& error, int code) {
  std::cerr << error.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational integrators on (S^2)^n: batch simulation runner"};
  app.set_help_flag("--help", "print this help and exit");  // -h would clash with --h
  app.set_version_flag("--version", "s2vi-run 1.0");

  std::string config_path, preset, integrator, out_dir = "s2vi-out", sweep_list, init;
  std::optional<double> h, T, solver_tol;
  std::optional<int> max_iters;
  std::optional<long long> output_every;
  bool list = false;

  app.add_option("--config", config_path, "JSON config file; flags override its fields");
  app.add_option("--preset", preset, "named preset scenario");
  app.add_option("--integrator", integrator, "vi-implicit, vi-explicit, rk2, rk2-project, rk4 or rk45");
  app.add_option("--h", h, "step size");
  app.add_option("--T", T, "simulated duration");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--solver-tol", solver_tol, "fixed-point tolerance of the implicit solver");
  app.add_option("--max-iters", max_iters, "iteration cap of the implicit solver");
  app.add_option("--solver-init", init, "initial guess of the implicit solver: zero or previous");
  app.add_option("--output-every", output_every, "write every k-th sample to the CSV files");
  app.add_option("--sweep", sweep_list, "comma-separated step sizes for a convergence sweep");
  app.add_flag("--list-presets", list, "print preset names and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : s2vi::kExitConfigError;
  }

  if (list) {
    for (const auto& name : s2vi::preset_names()) std::cout << name << '\n';
    return 0;
  }

  s2vi::RunConfig cfg;
  bool out_dir_given = app.count("--out-dir") > 0;
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw s2vi::Error(s2vi::ErrorKind::ConfigError, "cannot read config file " + config_path);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw s2vi::Error(s2vi::ErrorKind::ConfigError, std::string("config is not valid JSON: ") + e.what());
      }
      cfg = s2vi::config_from_json(j);
      if (!preset.empty()) {
        cfg.model_spec = nullptr;
        cfg.initial = nullptr;
      }
    }
    if (!preset.empty()) cfg.preset = preset;
    if (!integrator.empty()) cfg.integrator = integrator;
    if (h) cfg.h = h;
    if (T) cfg.T = T;
    if (solver_tol) cfg.solver.fp_tol = *solver_tol;
    if (max_iters) cfg.solver.max_iters = *max_iters;
    if (!init.empty()) {
      if (init == "zero") cfg.solver.init_strategy = s2vi::InitStrategy::Zero;
      else if (init == "previous") cfg.solver.init_strategy = s2vi::InitStrategy::PreviousStep;
      else throw s2vi::Error(s2vi::ErrorKind::ConfigError, "--solver-init must be zero or previous");
    }
    if (output_every) {
      if (*output_every < 1) throw s2vi::Error(s2vi::ErrorKind::ConfigError, "--output-every must be at least 1");
      cfg.output_every = static_cast<std::size_t>(*output_every);
    }
    if (!sweep_list.empty()) cfg.sweep = parse_h_list(sweep_list);
    if (out_dir_given || cfg.out_dir.empty()) cfg.out_dir = out_dir;
    if (cfg.preset.empty() && cfg.model_spec.is_null()) {
      throw s2vi::Error(s2vi::ErrorKind::ConfigError, "give --preset or --config");
    }
  } catch (const s2vi::Error& e) {
    return report(s2vi::error_json(e, std::nullopt, std::nullopt), s2vi::kExitConfigError);
  }

  if (!cfg.sweep.empty()) {
    const auto r = s2vi::sweep(cfg);
    if (r.exit_code != s2vi::kExitOk) return report(r.error, r.exit_code);
    std::cout << "sweep written to " << cfg.out_dir.string() << '\n';
    for (const auto& row : r.rows) {
      std::cout << "  h=" << row.h << "  final_error=" << row.final_error
                << "  mean_abs_energy_dev=" << row.mean_abs_energy_dev << '\n';
    }
    if (!r.summary["final_error_slope"].is_null())
      std::cout << "  final-error slope " << r.summary["final_error_slope"].get<double>() << '\n';
    if (!r.summary["energy_dev_slope"].is_null())
      std::cout << "  energy-deviation slope " << r.summary["energy_dev_slope"].get<double>() << '\n';
    return 0;
  }

  const auto r = s2vi::run(cfg);
  if (r.exit_code != s2vi::kExitOk) return report(r.error, r.exit_code);
  const auto& s = r.summary;
  std::cout << s["scenario"]["name"].get<std::string>() << " / " << s["integrator"].get<std::string>() << ": "
            << s["steps"].get<std::size_t>() << " steps in " << s["wall_time_s"].get<double>() << " s -> "
            << cfg.out_dir.string() << '\n';
  if (!s["drift"].is_null()) {
    std::cout << "  mean |E-E0| " << s["drift"]["mean_abs_energy_dev"].get<double>() << ", max unit error "
              << s["extrema"]["unit_error"]["max"].get<double>() << '\n';
  }
  return 0;
}
