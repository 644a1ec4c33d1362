// gridcalib: run scenarios, report on their artifacts, re-check the
// regression, and serve a store over HTTP.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 runtime error.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "gridcalib/gridcalib.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted.store(true); }

int cmd_run(const std::string& config_path, const std::string& out_dir, bool wall_clock) {
  auto cfg = gridcalib::config::load_config(config_path);
  std::filesystem::path out = out_dir.empty() ? cfg.outputs : out_dir;
  gridcalib::scenario::RunOptions options;
  options.wall_clock = wall_clock;
  auto result = gridcalib::scenario::run(cfg, options);
  gridcalib::scenario::write_artifacts(result, out);
  std::cout << "steps: " << result.ticks.size() << "\n";
  std::cout << "m_idle_w: " << gridcalib::format_double(result.m_idle) << "\n";
  std::cout << "regression: " << result.regression_status << "\n";
  std::cout << "artifacts: " << out.string() << "\n";
  return kExitOk;
}

int cmd_report(const std::string& dir, double floor_wh) {
  std::cout << gridcalib::report::render(dir, floor_wh);
  return kExitOk;
}

int cmd_validate(const std::string& dir, std::optional<gridcalib::DurationMs> tolerance) {
  auto v = gridcalib::report::revalidate(dir, tolerance);
  auto cmp = gridcalib::validation::compare_to_ideal(v.refit);
  std::cout << "pairs: " << v.refit.n << " (align tolerance " << v.align_tolerance << " ms)\n";
  std::cout << "slope: " << gridcalib::format_double(v.refit.slope) << "\n";
  std::cout << "intercept_w: " << gridcalib::format_double(v.refit.intercept) << "\n";
  std::cout << "r2: " << gridcalib::format_double(v.refit.r2) << "\n";
  std::cout << "residual_median_w: " << gridcalib::format_double(v.refit.residual_median) << "\n";
  std::cout << "residual_max_w: " << gridcalib::format_double(v.refit.residual_max) << "\n";
  std::cout << "ideal: slope " << (cmp.slope_ok ? "ok" : "off") << ", intercept "
            << (cmp.intercept_ok ? "ok" : "off") << ", r2 " << (cmp.r2_ok ? "ok" : "off") << "\n";
  if (!v.stored) {
    std::cout << "stored report: missing\n";
    return kExitRuntime;
  }
  std::cout << "stored report: " << (v.consistent ? "reproduced" : "MISMATCH") << "\n";
  return v.consistent ? kExitOk : kExitRuntime;
}

int cmd_serve(const std::string& bind, const std::string& config_path, bool wall_clock,
              double duration_s) {
  auto [host, port] = gridcalib::serve::parse_bind(bind);
  auto store = std::make_shared<gridcalib::timeseries::MetricStore>();
  std::optional<gridcalib::config::ScenarioConfig> cfg;
  if (!config_path.empty()) cfg = gridcalib::config::load_config(config_path);

  gridcalib::serve::MetricsServer server(store, host, port);
  std::cout << "serving on " << host << ":" << server.port() << "\n" << std::flush;

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::jthread runner;
  if (cfg) {
    gridcalib::scenario::RunOptions options;
    options.wall_clock = wall_clock;
    options.store = store;
    if (wall_clock) {
      runner = std::jthread([cfg = *cfg, options] {
        try {
          gridcalib::scenario::run(cfg, options);
        } catch (const std::exception& e) {
          std::cerr << "run failed: " << e.what() << "\n";
        }
      });
    } else {
      gridcalib::scenario::run(*cfg, options);
      std::cout << "scenario loaded: " << store->series_count() << " series\n" << std::flush;
    }
  }

  auto start = std::chrono::steady_clock::now();
  while (!g_interrupted.load()) {
    if (duration_s > 0 &&
        std::chrono::steady_clock::now() - start >= std::chrono::duration<double>(duration_s)) {
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  server.stop();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Microgrid co-simulation with online per-process power calibration"};
  app.require_subcommand(1);

  std::string run_config, run_out;
  bool run_wall = false;
  auto* run = app.add_subcommand("run", "Execute a scenario and write its artifacts");
  run->add_option("config", run_config, "Scenario JSON")->required();
  run->add_option("--out", run_out, "Artifact directory (default: the config's outputs)");
  run->add_flag("--wall-clock", run_wall, "Live mode: real time, background tasks, TCP meter");

  std::string report_dir;
  double floor_wh = 1.0;
  auto* report = app.add_subcommand("report", "Summarize a run's artifacts");
  report->add_option("dir", report_dir, "Artifact directory")->required();
  report->add_option("--other-floor-wh", floor_wh, "Group processes below this energy")
      ->capture_default_str();

  std::string validate_dir;
  std::optional<std::int64_t> tolerance;
  auto* validate = app.add_subcommand("validate", "Re-fit the regression from stored series");
  validate->add_option("dir", validate_dir, "Artifact directory")->required();
  validate->add_option("--align-tolerance-ms", tolerance, "Pairing tolerance (default: manifest)");

  std::string bind, serve_config;
  bool serve_wall = false;
  double serve_duration = 0.0;
  auto* serve = app.add_subcommand("serve", "Serve /metrics and /query over HTTP");
  serve->add_option("--bind", bind, "ADDR as host:port (port 0 picks one)")->required();
  serve->add_option("--config", serve_config, "Scenario to run into the served store");
  serve->add_flag("--wall-clock", serve_wall, "Run the scenario live while serving");
  serve->add_option("--duration-s", serve_duration, "Stop after this many seconds (0: until signal)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_config, run_out, run_wall);
    if (*report) return cmd_report(report_dir, floor_wh);
    if (*validate) return cmd_validate(validate_dir, tolerance);
    if (*serve) return cmd_serve(bind, serve_config, serve_wall, serve_duration);
  } catch (const gridcalib::ConfigFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
