// coopfusion_cli: simulate, replay, fit, calib-samples, report.
// Exit codes: 0 success, 2 configuration error, 3 runtime fusion error.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "coopfusion/coopfusion.hpp"

namespace fs = std::filesystem;
using namespace coopfusion;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

FitTarget target_from_string(const std::string& s) {
  if (s == "absolute") return FitTarget::absolute;
  if (s == "sigma") return FitTarget::gaussian_sigma;
  throw ConfigError("unknown fit target '" + s + "' (expected absolute|sigma)");
}

struct SimulateArgs {
  std::string config;
  std::string scenario;
  std::string mode = "parameterized";
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  bool no_log = false;
};

int run_simulate(const SimulateArgs& a) {
  ScenarioConfig cfg = a.config.empty() ? builtin_scenario(a.scenario) : load_scenario(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.duration) cfg.duration = *a.duration;
  cfg.validate();
  const ErrorModelMode mode = mode_from_string(a.mode);
  fs::create_directories(a.out);
  const std::string stem = scenario_file_stem(cfg.name) + "_seed" + std::to_string(cfg.seed) + "_" +
                           std::string(to_string(mode));
  ScenarioLog log;
  PacketTrace trace;
  const RunReport report = run_scenario(cfg, mode, &log, &trace);
  if (!a.no_log) write_log_file((fs::path(a.out) / (stem + ".log.ndjson")).string(), log, &trace);
  write_text((fs::path(a.out) / (stem + ".report.json")).string(), serialize_report(report));
  std::cout.precision(6);
  std::cout << cfg.name << " " << to_string(mode) << " seed " << cfg.seed << ": rmse_global " << report.rmse_global
            << " m, localization alone " << report.rmse_localization_alone << " m\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cooperative perception fusion: simulation, replay, calibration and reports"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Simulate a scenario and fuse it; writes log and report");
  auto* cfg_opt = simulate_cmd->add_option("--config", sim.config, "Scenario config JSON");
  auto* scen_opt = simulate_cmd->add_option("--scenario", sim.scenario, "Built-in scenario name (e.g. sm/sp/CIS)");
  cfg_opt->excludes(scen_opt);
  simulate_cmd->add_option("--mode", sim.mode, "parameterized|fixed")->capture_default_str();
  simulate_cmd->add_option("--out", sim.out, "Output directory")->capture_default_str();
  simulate_cmd->add_option("--seed", sim.seed, "Override the config seed");
  simulate_cmd->add_option("--duration", sim.duration, "Override the duration (s)");
  simulate_cmd->add_flag("--no-log", sim.no_log, "Write only the report");

  std::string replay_log, replay_mode = "parameterized", replay_out;
  auto* replay_cmd = app.add_subcommand("replay", "Recompute fusion over a recorded log");
  replay_cmd->add_option("--log", replay_log, "NDJSON scenario log")->required();
  replay_cmd->add_option("--mode", replay_mode, "parameterized|fixed")->capture_default_str();
  replay_cmd->add_option("--out", replay_out, "Write the report here instead of stdout");

  std::string fit_samples, fit_out, fit_target = "absolute";
  std::size_t fit_degree = 1;
  auto* fit_cmd = app.add_subcommand("fit", "Fit error models from a sample CSV");
  fit_cmd->add_option("--samples", fit_samples, "CSV: predictor,error,component,source")->required();
  fit_cmd->add_option("--degree", fit_degree, "Polynomial degree")->capture_default_str();
  fit_cmd->add_option("--out", fit_out, "Model JSON output")->required();
  fit_cmd->add_option("--target", fit_target, "absolute: fit |e|; sigma: fit |e|*sqrt(pi/2)")->capture_default_str();

  std::string cs_out, cs_models;
  CalibrationSweep sweep;
  auto* cs_cmd = app.add_subcommand("calib-samples", "Generate a synthetic calibration sample CSV");
  cs_cmd->add_option("--out", cs_out, "CSV output")->required();
  cs_cmd->add_option("--models", cs_models, "Generating models (default: built-in parameterized set)");
  cs_cmd->add_option("--n", sweep.samples_per_model, "Samples per model")->capture_default_str();
  cs_cmd->add_option("--seed", sweep.seed, "Seed")->capture_default_str();

  std::string report_runs, report_out;
  auto* report_cmd = app.add_subcommand("report", "Summarize *.report.json files into CSV tables");
  report_cmd->add_option("--runs", report_runs, "Directory containing run reports")->required();
  report_cmd->add_option("--out", report_out, "Summary CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*simulate_cmd) {
      if (sim.config.empty() && sim.scenario.empty()) throw ConfigError("simulate needs --config or --scenario");
      return run_simulate(sim);
    }
    if (*replay_cmd) {
      const RunReport r = replay(replay_log, mode_from_string(replay_mode));
      if (replay_out.empty()) std::cout << serialize_report(r);
      else write_text(replay_out, serialize_report(r));
      return 0;
    }
    if (*fit_cmd) {
      std::ifstream in(fit_samples);
      if (!in) throw ConfigError("cannot open " + fit_samples);
      const auto samples = read_samples_csv(in);
      const FitTarget target = target_from_string(fit_target);
      const auto models = fit_model_groups(samples, fit_degree, target);
      nlohmann::json out;
      if (models.size() == 1) {
        out = to_json(models.begin()->second);
      } else {
        for (const auto& [name, m] : models) out[name] = to_json(m);
      }
      write_text(fit_out, out.dump(2) + "\n");
      std::map<std::string, std::vector<ErrorSample>> groups;
      for (const auto& s : samples) groups[model_name_for(s.source, s.component)].push_back({s.predictor, s.error});
      for (const auto& [name, m] : models) {
        std::cerr << name << ": coefficients";
        for (double c : m.coefficients) std::cerr << ' ' << c;
        try {
          std::cerr << "  R^2 " << fit_quality(groups[name], m, target);
        } catch (const UndefinedRSquaredError&) {
          std::cerr << "  R^2 undefined";
        }
        std::cerr << '\n';
      }
      return 0;
    }
    if (*cs_cmd) {
      const ModelSet truth = cs_models.empty() ? default_parameterized_models() : load_model_set(cs_models);
      std::ofstream out(cs_out, std::ios::binary);
      if (!out) throw ConfigError("cannot write " + cs_out);
      write_samples_csv(out, generate_calibration_samples(truth, sweep));
      return 0;
    }
    if (*report_cmd) {
      if (report_out.empty()) {
        report_directory(report_runs, std::cout);
      } else {
        std::ostringstream csv;
        report_directory(report_runs, csv);
        write_text(report_out, csv.str());
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ReplayError& e) {
    std::cerr << "log error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "fusion error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
