#pragma once

// End-to-end scenario run: emulated workloads and meter feed the metric store,
// query signals feed the calibration actors, the microgrid engine steps them
// together with the benchmark controllers, and the regression harness checks
// the approximation against the meter. Everything lands in a set of
// byte-deterministic artifacts.

#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridcalib/benchmark.hpp"
#include "gridcalib/calibration.hpp"
#include "gridcalib/clock.hpp"
#include "gridcalib/config.hpp"
#include "gridcalib/csv.hpp"
#include "gridcalib/emulation.hpp"
#include "gridcalib/meter_link.hpp"
#include "gridcalib/microgrid.hpp"
#include "gridcalib/signals.hpp"
#include "gridcalib/timeseries.hpp"
#include "gridcalib/validation.hpp"

namespace gridcalib::scenario {

/// Gauge recorded once per step: sum of all approximated scopes, the x side
/// of the regression.
inline const std::string kApproxNodeMetric = "approx_node_power_w";

namespace files {
inline const std::string monitor = "monitor.csv";
inline const std::string calibrated = "calibrated.csv";
inline const std::string calibrated_processes = "calibrated_processes.csv";
inline const std::string regression = "regression.json";
inline const std::string regression_plot = "regression_plot.csv";
inline const std::string energy_summary = "energy_summary.csv";
inline const std::string events = "events.csv";
inline const std::string manifest = "manifest.json";
inline const std::string approx_series = "series/approx_node_w.csv";
inline const std::string meter_series = "series/meter_w.csv";
}  // namespace files

struct ScopeRecord {
  Watts dynamic = 0.0;
  Watts raw_dynamic = 0.0;
  Watts idle = 0.0;
  Watts true_dynamic = 0.0;
};

struct WorkloadEvent {
  std::string workload;
  benchmark::Event event;
};

struct EnergyRow {
  std::string process;
  std::string ns;
  double dynamic_wh = 0.0;
  double raw_dynamic_wh = 0.0;
  double idle_wh = 0.0;
  double true_dynamic_wh = 0.0;
  double share_pct = 0.0;
};

struct RunResult {
  config::ScenarioConfig config;
  TimestampMs run_start = 0;
  Watts m_idle = 0.0;
  std::vector<microgrid::MicrogridTick> ticks;
  std::vector<TimestampMs> times;
  std::vector<std::string> namespaces;
  /// Per step, keyed by namespace / process id.
  std::vector<std::map<std::string, ScopeRecord>> namespace_records;
  std::vector<std::map<std::string, ScopeRecord>> process_records;
  std::vector<WorkloadEvent> events;
  std::vector<validation::PairedObservation> pairs;
  std::optional<validation::RegressionReport> regression;
  std::string regression_status = "ok";
  std::vector<EnergyRow> energy;
  std::shared_ptr<timeseries::MetricStore> store;
  std::string meter_metric;
};

struct RunOptions {
  /// Live mode: wall clock, background periodic tasks, meter over TCP.
  bool wall_clock = false;
  /// Shared store to fill (e.g. one being served); a fresh one when null.
  std::shared_ptr<timeseries::MetricStore> store;
};

/// Trapezoidal integral of a power trace, in watt-hours.
inline double integrate_wh(const std::vector<TimestampMs>& times, const std::vector<Watts>& power) {
  double joules = 0.0;
  for (std::size_t i = 1; i < times.size() && i < power.size(); ++i) {
    joules += 0.5 * (power[i - 1] + power[i]) * seconds(times[i] - times[i - 1]);
  }
  return joules / kJoulesPerWh;
}

/// Per-process energy table; shares are of total calibrated dynamic energy.
inline std::vector<EnergyRow> energy_table(
    const std::vector<TimestampMs>& times,
    const std::vector<std::map<std::string, ScopeRecord>>& records,
    const std::vector<std::pair<std::string, std::string>>& processes) {
  std::vector<EnergyRow> rows;
  double total = 0.0;
  for (const auto& [pid, ns] : processes) {
    std::vector<Watts> dyn, raw, idle, truth;
    for (const auto& r : records) {
      const auto& s = r.at(pid);
      dyn.push_back(s.dynamic);
      raw.push_back(s.raw_dynamic);
      idle.push_back(s.idle);
      truth.push_back(s.true_dynamic);
    }
    EnergyRow row{pid, ns, integrate_wh(times, dyn), integrate_wh(times, raw),
                  integrate_wh(times, idle), integrate_wh(times, truth), 0.0};
    total += row.dynamic_wh;
    rows.push_back(std::move(row));
  }
  for (auto& row : rows) row.share_pct = total > 0.0 ? 100.0 * row.dynamic_wh / total : 0.0;
  return rows;
}

namespace detail {

class CalibratedActor : public microgrid::Actor {
 public:
  CalibratedActor(std::string id, std::shared_ptr<calibration::NamespaceActor> ns)
      : id_(std::move(id)), ns_(std::move(ns)) {}
  const std::string& id() const override { return id_; }
  microgrid::ActorSample step(TimestampMs) override {
    Watts p = ns_->power();
    return {-p,
            {{"calibrated_dynamic_w", p},
             {"raw_dynamic_w", ns_->raw_power()},
             {"calibrated_idle_w", ns_->calibrator().idle_power()}}};
  }

 private:
  std::string id_;
  std::shared_ptr<calibration::NamespaceActor> ns_;
};

class MeterActor : public microgrid::Actor {
 public:
  MeterActor(std::string id, std::shared_ptr<signals::Signal> meter)
      : id_(std::move(id)), meter_(std::move(meter)) {}
  const std::string& id() const override { return id_; }
  microgrid::ActorSample step(TimestampMs) override {
    Watts m = meter_->now();
    return {-m, {{"meter_w", m}}};
  }

 private:
  std::string id_;
  std::shared_ptr<signals::Signal> meter_;
};

inline std::string ns_of(const config::ScenarioConfig& c, const std::string& pid) {
  for (const auto& w : c.workloads) {
    if (w.spec.process_id == pid) return w.spec.ns;
  }
  return {};
}

}  // namespace detail

inline RunResult run(const config::ScenarioConfig& cfg, RunOptions options = {}) {
  RunResult result;
  result.config = cfg;
  auto store = options.store ? options.store : std::make_shared<timeseries::MetricStore>();
  result.store = store;
  auto clock = options.wall_clock ? Clock::make_wall() : Clock::make_virtual(0);
  const TimestampMs t0 = clock->now();

  emulation::EmulatorConfig ec;
  ec.node = cfg.node;
  ec.approximation = cfg.approximation;
  ec.meter = cfg.meter;
  ec.seed = cfg.seed;
  for (const auto& w : cfg.workloads) ec.workloads.push_back(w.spec);
  result.meter_metric = ec.meter_metric;
  auto emulator = std::make_shared<emulation::Emulator>(store, ec);

  std::unique_ptr<meter_link::MeterListener> listener;
  std::shared_ptr<meter_link::MeterPublisher> publisher;
  if (options.wall_clock) {
    listener = std::make_unique<meter_link::MeterListener>(store, ec.meter_metric);
    publisher = std::make_shared<meter_link::MeterPublisher>("127.0.0.1", listener->port());
    emulator->set_meter_sink(
        [publisher](Watts w, TimestampMs t) { publisher->publish({w, t}); });
  }

  // The emitter registers first so that, at any instant, signals read the
  // counters it has just written.
  emulator->start(t0);
  PeriodicTask emit_task(clock, cfg.emit_interval_ms,
                         [emulator](TimestampMs t) { emulator->emit(t); });

  calibration::ActorOptions opts;
  opts.metric = ec.metric;
  opts.meter_metric = ec.meter_metric;
  opts.window = cfg.signal_window_ms;
  opts.interval = cfg.signal_interval_ms;
  opts.idle_capture = cfg.idle_capture;
  auto node = calibration::NodeSignals::create(store, clock, opts);
  auto approx_node = signals::make_query_signal(
      store, timeseries::QueryExpr{true, ec.metric, {}, cfg.signal_window_ms},
      cfg.signal_interval_ms, clock);

  // Idle phase: nothing runs yet, the meter sees the idle node.
  clock->wait_until(t0 + cfg.idle_capture.window);

  std::set<std::string> ns_set;
  for (const auto& w : cfg.workloads) ns_set.insert(w.spec.ns);
  for (const auto& a : cfg.actors) {
    if (a.type == config::ActorType::namespace_consumer) ns_set.insert(a.ns);
  }
  result.namespaces.assign(ns_set.begin(), ns_set.end());
  std::map<std::string, std::shared_ptr<calibration::NamespaceActor>> ns_actors;
  for (const auto& ns : result.namespaces) {
    ns_actors[ns] = std::make_shared<calibration::NamespaceActor>(store, clock, node, ns, opts);
  }
  result.m_idle = calibration::capture_idle(*store, opts, *node.meter, clock->now());

  std::vector<std::pair<std::string, std::string>> processes;
  for (const auto& w : cfg.workloads) processes.emplace_back(w.spec.process_id, w.spec.ns);
  std::sort(processes.begin(), processes.end());
  std::map<std::string, std::unique_ptr<calibration::ScopeCalibrator>> proc_cals;
  for (const auto& [pid, ns] : processes) {
    proc_cals[pid] = std::make_unique<calibration::ScopeCalibrator>(
        store, clock, node,
        timeseries::Labels{{opts.namespace_label, ns}, {"container_name", pid}}, result.m_idle,
        opts);
  }

  // One signal interval so the scope signals created above have collected.
  result.run_start = clock->now() + cfg.signal_interval_ms;
  clock->wait_until(result.run_start);

  microgrid::Engine engine(clock, cfg.dt_ms);
  if (cfg.storage) engine.set_storage(*cfg.storage);
  for (const auto& a : cfg.actors) {
    switch (a.type) {
      case config::ActorType::namespace_consumer:
        engine.add_actor(std::make_shared<detail::CalibratedActor>(a.id, ns_actors.at(a.ns)));
        break;
      case config::ActorType::static_power:
        engine.add_actor(std::make_shared<microgrid::StaticActor>(a.id, a.power));
        break;
      case config::ActorType::trace: {
        auto points = a.points;
        for (auto& p : points) p.first += result.run_start;
        engine.add_actor(std::make_shared<microgrid::TraceActor>(a.id, std::move(points)));
        break;
      }
      case config::ActorType::meter:
        engine.add_actor(std::make_shared<detail::MeterActor>(a.id, node.meter));
        break;
    }
  }

  std::vector<std::shared_ptr<benchmark::BenchmarkController>> controllers;
  for (const auto& w : cfg.workloads) {
    std::string pid = w.spec.process_id;
    benchmark::BenchmarkController::Hooks hooks{
        [emulator, pid](double value) { emulator->set_load(pid, value); },
        [emulator, pid] { emulator->set_load(pid, 0.0); }};
    auto ctrl = std::make_shared<benchmark::BenchmarkController>(pid, w.schedule.runtime,
                                                                 w.schedule.values, hooks);
    controllers.push_back(ctrl);
    engine.add_controller(ctrl);
  }

  const std::int64_t steps = cfg.duration_ms / cfg.dt_ms;
  for (std::int64_t k = 0; k < steps; ++k) {
    const TimestampMs t = result.run_start + k * cfg.dt_ms;
    engine.step(t);
    result.times.push_back(t);

    std::map<std::string, ScopeRecord> ns_rec;
    for (const auto& [ns, actor] : ns_actors) {
      ns_rec[ns] = {actor->power(), actor->raw_power(), actor->calibrator().idle_power(), 0.0};
    }
    auto truth = emulator->interval_truth();
    std::map<std::string, ScopeRecord> proc_rec;
    for (const auto& [pid, cal] : proc_cals) {
      ScopeRecord r{cal->dynamic_power(), cal->raw_dynamic(), cal->idle_power(), 0.0};
      for (const auto& p : truth.processes) {
        if (p.process_id == pid) r.true_dynamic = p.dynamic;
      }
      ns_rec[detail::ns_of(cfg, pid)].true_dynamic += r.true_dynamic;
      proc_rec[pid] = r;
    }
    result.namespace_records.push_back(std::move(ns_rec));
    result.process_records.push_back(std::move(proc_rec));
    store->append(kApproxNodeMetric, {}, timeseries::MetricKind::gauge, {t, approx_node.now()});

    clock->wait_until(t + cfg.dt_ms);
  }
  engine.finalize(result.run_start + steps * cfg.dt_ms);
  emit_task.stop();
  result.ticks = engine.monitor();

  for (const auto& ctrl : controllers) {
    for (const auto& e : ctrl->events()) result.events.push_back({ctrl->name(), e});
  }
  std::stable_sort(result.events.begin(), result.events.end(),
                   [](const WorkloadEvent& a, const WorkloadEvent& b) {
                     return a.event.time < b.event.time;
                   });

  result.energy = energy_table(result.times, result.process_records, processes);

  try {
    auto approx = store->find(kApproxNodeMetric, {});
    auto meter = store->find(ec.meter_metric, {});
    if (!approx || !meter) throw Error(ErrorKind::NoOverlap, "missing approximated or meter series");
    result.pairs = validation::pair(*approx, *meter, cfg.align_tolerance());
    result.regression = validation::fit_ols(result.pairs);
  } catch (const Error& e) {
    result.regression.reset();
    result.regression_status = e.what();
  }
  return result;
}

/// Artifact contents keyed by path relative to the output directory.
inline std::map<std::string, std::string> render_artifacts(const RunResult& r) {
  std::map<std::string, std::string> out;
  out[files::monitor] = microgrid::Engine::to_csv(r.ticks);

  {
    std::vector<std::string> header{"time_ms"};
    for (const auto& ns : r.namespaces) {
      for (const char* col : {".dynamic_w", ".raw_dynamic_w", ".idle_w", ".true_dynamic_w"}) {
        header.push_back(ns + col);
      }
    }
    std::string csv = csv_row(header);
    for (std::size_t i = 0; i < r.times.size(); ++i) {
      std::vector<std::string> row{std::to_string(r.times[i])};
      for (const auto& ns : r.namespaces) {
        const auto& s = r.namespace_records[i].at(ns);
        for (double v : {s.dynamic, s.raw_dynamic, s.idle, s.true_dynamic}) {
          row.push_back(format_double(v));
        }
      }
      csv += csv_row(row);
    }
    out[files::calibrated] = std::move(csv);
  }

  {
    std::vector<std::string> header{"time_ms"};
    for (const auto& row : r.energy) {
      for (const char* col : {".dynamic_w", ".raw_dynamic_w", ".idle_w", ".true_dynamic_w"}) {
        header.push_back(row.process + col);
      }
    }
    std::string csv = csv_row(header);
    for (std::size_t i = 0; i < r.times.size(); ++i) {
      std::vector<std::string> row{std::to_string(r.times[i])};
      for (const auto& e : r.energy) {
        const auto& s = r.process_records[i].at(e.process);
        for (double v : {s.dynamic, s.raw_dynamic, s.idle, s.true_dynamic}) {
          row.push_back(format_double(v));
        }
      }
      csv += csv_row(row);
    }
    out[files::calibrated_processes] = std::move(csv);
  }

  {
    std::string csv = csv_row({"process", "namespace", "dynamic_wh", "raw_dynamic_wh", "idle_wh",
                               "true_dynamic_wh", "share_pct"});
    for (const auto& e : r.energy) {
      csv += csv_row({e.process, e.ns, format_double(e.dynamic_wh), format_double(e.raw_dynamic_wh),
                      format_double(e.idle_wh), format_double(e.true_dynamic_wh),
                      format_double(e.share_pct)});
    }
    out[files::energy_summary] = std::move(csv);
  }

  {
    std::string csv = csv_row({"time_ms", "workload", "event", "iteration", "value"});
    for (const auto& e : r.events) {
      csv += csv_row({std::to_string(e.event.time), e.workload,
                      std::string(benchmark::to_string(e.event.kind)),
                      std::to_string(e.event.iteration), format_double(e.event.value)});
    }
    out[files::events] = std::move(csv);
  }

  if (r.regression) {
    out[files::regression] = validation::to_json(*r.regression).dump(2) + "\n";
    out[files::regression_plot] = validation::plot_csv(r.pairs, *r.regression);
  }

  if (auto s = r.store->find(kApproxNodeMetric, {})) {
    out[files::approx_series] = timeseries::series_to_csv(*s);
  }
  if (auto s = r.store->find(r.meter_metric, {})) {
    out[files::meter_series] = timeseries::series_to_csv(*s);
  }

  nlohmann::ordered_json m;
  m["seed"] = r.config.seed;
  m["duration_ms"] = r.config.duration_ms;
  m["dt_ms"] = r.config.dt_ms;
  m["run_start_ms"] = r.run_start;
  m["m_idle_w"] = r.m_idle;
  m["align_tolerance_ms"] = r.config.align_tolerance();
  m["regression"] = r.regression_status;
  std::vector<std::string> names;
  for (const auto& [name, body] : out) names.push_back(name);
  m["artifacts"] = names;
  out[files::manifest] = m.dump(2) + "\n";
  return out;
}

inline void write_artifacts(const std::map<std::string, std::string>& artifacts,
                            const std::filesystem::path& dir) {
  for (const auto& [name, body] : artifacts) {
    auto path = dir / name;
    std::filesystem::create_directories(path.parent_path());
    write_file_atomic(path, body);
  }
}

inline void write_artifacts(const RunResult& r, const std::filesystem::path& dir) {
  write_artifacts(render_artifacts(r), dir);
}

}  // namespace gridcalib::scenario
