#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "mavctl/harness.hpp"

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitNumericalAbort = 3;

struct WindowPair {
  double begin;
  double end;
};

WindowPair evaluation_window(const mavctl::ScenarioConfig& cfg,
                             const mavctl::RunLog& log) {
  WindowPair w{0.0, log.records.empty() ? cfg.duration : log.records.back().t};
  if (cfg.eval_window_begin >= 0.0) w.begin = cfg.eval_window_begin;
  if (cfg.eval_window_end >= 0.0) w.end = cfg.eval_window_end;
  return w;
}

int run_one(mavctl::Config cfg, const std::string& seed_override,
            const std::string& out_override, bool print_report) {
  using namespace mavctl;
  if (!seed_override.empty()) cfg.set("seed", seed_override);
  if (!out_override.empty()) cfg.set("out", out_override);

  const ScenarioConfig scenario = ScenarioConfig::from_config(cfg);
  const RunLog log = run_scenario(scenario);
  const WindowPair w = evaluation_window(scenario, log);

  const RmsReport control = rms_metrics(log, MetricKind::Control, w.begin, w.end);
  const RmsReport estimation =
      rms_metrics(log, MetricKind::Estimation, w.begin, w.end);
  const double drift = log.path_length() > 1.0 ? drift_metric(log) : 0.0;

  if (print_report)
    std::cout << report_text(control, estimation, drift, log.summary);

  if (!scenario.out_dir.empty()) {
    export_run(log, control, estimation, drift, scenario.out_dir);
    if (scenario.scenario == ScenarioKind::SysidSweep) {
      const FlightLog flight = run_sysid_scenario_log(scenario);
      flight.save_csv(scenario.out_dir + "/flightlog.csv");
    }
  }
  return 0;
}

std::vector<double> parse_range(const std::string& text) {
  // start:step:stop or a comma-separated list
  std::vector<double> values;
  if (text.find(':') != std::string::npos) {
    double start, step, stop;
    if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &start, &step, &stop) != 3 ||
        step <= 0.0)
      throw mavctl::ConfigError("range must be start:step:stop with step > 0");
    for (double v = start; v <= stop + 1e-12; v += step) values.push_back(v);
  } else {
    std::size_t pos = 0;
    while (pos < text.size()) {
      const auto comma = text.find(',', pos);
      const std::string token = text.substr(
          pos, comma == std::string::npos ? std::string::npos : comma - pos);
      values.push_back(std::stod(token));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  if (values.empty()) throw mavctl::ConfigError("empty parameter range");
  return values;
}

int run_sweep(const mavctl::Config& base, const std::string& param_spec,
              const std::string& out_override) {
  using namespace mavctl;
  const auto eq = param_spec.find('=');
  if (eq == std::string::npos)
    throw ConfigError("--param must look like key=start:step:stop");
  const std::string key = param_spec.substr(0, eq);
  const std::vector<double> values = parse_range(param_spec.substr(eq + 1));

  std::cout << "param,control_pose,estimation_pose,drift\n";
  std::string rows;
  for (double value : values) {
    Config cfg = base;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    cfg.set(key, buf);
    cfg.set("out", "");  // per-value exports are not written during sweeps

    const ScenarioConfig scenario = ScenarioConfig::from_config(cfg);
    const RunLog log = run_scenario(scenario);
    const WindowPair w = evaluation_window(scenario, log);
    const RmsReport control =
        rms_metrics(log, MetricKind::Control, w.begin, w.end);
    const RmsReport estimation =
        rms_metrics(log, MetricKind::Estimation, w.begin, w.end);
    const double drift = log.path_length() > 1.0 ? drift_metric(log) : 0.0;

    char row[160];
    std::snprintf(row, sizeof(row), "%s,%.6g,%.6g,%.6g\n", buf, control.pose,
                  estimation.pose, drift);
    std::cout << row;
    rows += row;
  }

  if (!out_override.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_override, ec);
    std::ofstream out(out_override + "/sweep.csv");
    if (!out) throw std::runtime_error("cannot write sweep.csv");
    out << "param,control_pose,estimation_pose,drift\n" << rows;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop MAV simulation scenarios"};
  app.require_subcommand(1);

  std::string config_path, seed_override, out_override, param_spec;

  auto* run = app.add_subcommand("run", "Run one scenario");
  run->add_option("--config", config_path, "Scenario config file")->required();
  run->add_option("--seed", seed_override, "Override the config seed");
  run->add_option("--out", out_override, "Output directory");

  auto* sweep = app.add_subcommand("sweep", "Run a scenario over a parameter range");
  sweep->add_option("--config", config_path, "Scenario config file")->required();
  sweep->add_option("--param", param_spec, "key=start:step:stop or key=v1,v2,...")
      ->required();
  sweep->add_option("--out", out_override, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    const mavctl::Config cfg = mavctl::Config::from_file(config_path);
    if (app.got_subcommand("run"))
      return run_one(cfg, seed_override, out_override, true);
    return run_sweep(cfg, param_spec, out_override);
  } catch (const mavctl::NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << "\n" << e.dump;
    return kExitNumericalAbort;
  } catch (const mavctl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}
