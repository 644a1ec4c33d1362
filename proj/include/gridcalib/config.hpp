#pragma once

// Scenario configuration. JSON, strict: unknown fields are rejected and every
// error names the offending field path, e.g. `workloads[1].leakage_lambda`.

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gridcalib/calibration.hpp"
#include "gridcalib/csv.hpp"
#include "gridcalib/emulation.hpp"
#include "gridcalib/error.hpp"
#include "gridcalib/microgrid.hpp"

namespace gridcalib::config {

struct WorkloadConfig {
  emulation::WorkloadSpec spec;
  /// Name of a built-in sweep, or "custom" when values were listed inline.
  std::string schedule_name = "rps";
  emulation::Schedule schedule;
};

enum class ActorType { namespace_consumer, static_power, trace, meter };

struct ActorConfig {
  std::string id;
  ActorType type = ActorType::static_power;
  std::string ns;
  Watts power = 0.0;
  /// Trace points, times relative to the start of the run.
  std::vector<std::pair<TimestampMs, Watts>> points;
};

struct ScenarioConfig {
  DurationMs duration_ms = 0;
  DurationMs dt_ms = 1000;
  std::uint64_t seed = 0;
  DurationMs emit_interval_ms = 1000;
  calibration::IdleCapture idle_capture{};
  emulation::NodeSpec node{};
  emulation::ApproximationModel approximation{};
  emulation::MeterSpec meter{};
  std::vector<WorkloadConfig> workloads;
  std::vector<ActorConfig> actors;
  std::optional<microgrid::StorageState> storage;
  DurationMs signal_interval_ms = signals::kDefaultIntervalMs;
  DurationMs signal_window_ms = timeseries::kDefaultRateWindowMs;
  /// Defaults to half the meter sample interval.
  std::optional<DurationMs> align_tolerance_ms;
  std::string outputs = "out";

  DurationMs align_tolerance() const {
    return align_tolerance_ms.value_or(meter.sample_interval / 2);
  }
};

namespace detail {

using nlohmann::json;

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline std::string index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

inline void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigFailure(path.empty() ? "<root>" : path, "expected an object");
}

inline void allow_only(const json& j, const std::string& path,
                       std::initializer_list<const char*> keys) {
  require_object(j, path);
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigFailure(join(path, key), "unknown field");
  }
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigFailure(path, "expected a number");
  return j.get<double>();
}

inline std::int64_t integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigFailure(path, "expected an integer");
  return j.get<std::int64_t>();
}

inline std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigFailure(path, "expected a string");
  return j.get<std::string>();
}

template <typename T, typename Read>
void optional_field(const json& j, const std::string& path, const char* key, T& out, Read read) {
  if (j.contains(key)) out = read(j.at(key), join(path, key));
}

/// Runs a domain validator and re-raises its error against `path`.
template <typename F>
void check(const std::string& path, F&& f) {
  try {
    f();
  } catch (const ConfigFailure&) {
    throw;
  } catch (const Error& e) {
    throw ConfigFailure(path, e.what());
  }
}

inline emulation::WorkloadKind workload_kind(const json& j, const std::string& path) {
  auto s = text(j, path);
  if (s == "service") return emulation::WorkloadKind::service;
  if (s == "batch") return emulation::WorkloadKind::batch;
  if (s == "stress") return emulation::WorkloadKind::stress;
  throw ConfigFailure(path, "expected service, batch or stress");
}

inline emulation::LoadKnob load_knob(const json& j, const std::string& path) {
  auto s = text(j, path);
  if (s == "rps") return emulation::LoadKnob::rps;
  if (s == "batch_size") return emulation::LoadKnob::batch_size;
  if (s == "threads") return emulation::LoadKnob::threads;
  throw ConfigFailure(path, "expected rps, batch_size or threads");
}

inline WorkloadConfig parse_workload(const json& j, const std::string& path) {
  allow_only(j, path,
             {"process_id", "namespace", "kind", "idle_share_w", "dyn_coeff_w", "load_knob",
              "noise_sigma_w", "leakage_lambda", "requested", "schedule", "runtime_ms"});
  WorkloadConfig w;
  if (!j.contains("process_id")) throw ConfigFailure(join(path, "process_id"), "required");
  w.spec.process_id = text(j.at("process_id"), join(path, "process_id"));
  optional_field(j, path, "namespace", w.spec.ns, text);
  optional_field(j, path, "kind", w.spec.kind, workload_kind);
  optional_field(j, path, "idle_share_w", w.spec.idle_share, number);
  optional_field(j, path, "dyn_coeff_w", w.spec.dyn_coeff, number);
  optional_field(j, path, "load_knob", w.spec.load_knob, load_knob);
  optional_field(j, path, "noise_sigma_w", w.spec.noise_sigma, number);
  optional_field(j, path, "leakage_lambda", w.spec.leakage_lambda, number);
  optional_field(j, path, "requested", w.spec.requested, number);
  if (w.spec.ns.empty()) throw ConfigFailure(join(path, "namespace"), "must not be empty");
  if (w.spec.ns == emulation::kSystemNamespace) {
    throw ConfigFailure(join(path, "namespace"), "'system' is reserved");
  }
  check(path, [&] { w.spec.validate(); });

  std::string spath = join(path, "schedule");
  if (!j.contains("schedule") || j.at("schedule").is_string()) {
    w.schedule_name = j.contains("schedule") ? j.at("schedule").get<std::string>() : "rps";
    check(spath, [&] { w.schedule = emulation::named_schedule(w.schedule_name); });
  } else if (j.at("schedule").is_array()) {
    w.schedule_name = "custom";
    const auto& values = j.at("schedule");
    if (values.empty()) throw ConfigFailure(spath, "must not be empty");
    for (std::size_t i = 0; i < values.size(); ++i) {
      double v = number(values[i], index(spath, i));
      if (!(v >= 0.0)) throw ConfigFailure(index(spath, i), "load must be >= 0");
      w.schedule.values.push_back(v);
    }
  } else {
    throw ConfigFailure(spath, "expected a schedule name or a list of loads");
  }
  optional_field(j, path, "runtime_ms", w.schedule.runtime, integer);
  if (w.schedule.runtime <= 0) throw ConfigFailure(join(path, "runtime_ms"), "must be > 0");
  return w;
}

inline ActorConfig parse_actor(const json& j, const std::string& path) {
  require_object(j, path);
  if (!j.contains("type")) throw ConfigFailure(join(path, "type"), "required");
  if (!j.contains("id")) throw ConfigFailure(join(path, "id"), "required");
  ActorConfig a;
  a.id = text(j.at("id"), join(path, "id"));
  if (a.id.empty()) throw ConfigFailure(join(path, "id"), "must not be empty");
  auto type = text(j.at("type"), join(path, "type"));
  if (type == "namespace") {
    allow_only(j, path, {"id", "type", "namespace"});
    a.type = ActorType::namespace_consumer;
    if (!j.contains("namespace")) throw ConfigFailure(join(path, "namespace"), "required");
    a.ns = text(j.at("namespace"), join(path, "namespace"));
  } else if (type == "static") {
    allow_only(j, path, {"id", "type", "power_w"});
    a.type = ActorType::static_power;
    if (!j.contains("power_w")) throw ConfigFailure(join(path, "power_w"), "required");
    a.power = number(j.at("power_w"), join(path, "power_w"));
  } else if (type == "trace") {
    allow_only(j, path, {"id", "type", "points"});
    a.type = ActorType::trace;
    std::string ppath = join(path, "points");
    if (!j.contains("points") || !j.at("points").is_array()) {
      throw ConfigFailure(ppath, "expected a list of [time_ms, power_w] pairs");
    }
    const auto& pts = j.at("points");
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto& p = pts[i];
      if (!p.is_array() || p.size() != 2) {
        throw ConfigFailure(index(ppath, i), "expected [time_ms, power_w]");
      }
      TimestampMs t = integer(p[0], index(ppath, i) + "[0]");
      if (!a.points.empty() && t <= a.points.back().first) {
        throw ConfigFailure(index(ppath, i), "trace times must increase");
      }
      a.points.emplace_back(t, number(p[1], index(ppath, i) + "[1]"));
    }
  } else if (type == "meter") {
    allow_only(j, path, {"id", "type"});
    a.type = ActorType::meter;
  } else {
    throw ConfigFailure(join(path, "type"), "expected namespace, static, trace or meter");
  }
  return a;
}

inline microgrid::StorageState parse_storage(const json& j, const std::string& path) {
  allow_only(j, path,
             {"charge_j", "capacity_j", "max_charge_w", "max_discharge_w", "policy",
              "charge_efficiency", "discharge_efficiency"});
  microgrid::StorageState s;
  optional_field(j, path, "charge_j", s.charge, number);
  optional_field(j, path, "capacity_j", s.capacity, number);
  optional_field(j, path, "max_charge_w", s.max_charge_rate, number);
  optional_field(j, path, "max_discharge_w", s.max_discharge_rate, number);
  optional_field(j, path, "charge_efficiency", s.policy.charge_efficiency, number);
  optional_field(j, path, "discharge_efficiency", s.policy.discharge_efficiency, number);
  if (j.contains("policy")) {
    auto p = text(j.at("policy"), join(path, "policy"));
    if (p == "battery_first") {
      s.policy.kind = microgrid::PolicyKind::battery_first;
    } else if (p == "grid_only") {
      s.policy.kind = microgrid::PolicyKind::grid_only;
    } else {
      throw ConfigFailure(join(path, "policy"), "expected battery_first or grid_only");
    }
  }
  check(path, [&] { s.validate(); });
  return s;
}

}  // namespace detail

inline ScenarioConfig parse_config(const nlohmann::json& j) {
  using namespace detail;
  allow_only(j, "",
             {"duration_ms", "dt_ms", "seed", "emit_interval_ms", "idle_capture", "node",
              "approximation", "meter", "workloads", "actors", "storage", "signals", "regression",
              "outputs"});
  ScenarioConfig c;
  if (!j.contains("duration_ms")) throw ConfigFailure("duration_ms", "required");
  if (!j.contains("seed")) throw ConfigFailure("seed", "required");
  c.duration_ms = integer(j.at("duration_ms"), "duration_ms");
  if (!j.at("seed").is_number_unsigned()) throw ConfigFailure("seed", "expected an unsigned integer");
  c.seed = j.at("seed").get<std::uint64_t>();
  optional_field(j, "", "dt_ms", c.dt_ms, integer);
  optional_field(j, "", "emit_interval_ms", c.emit_interval_ms, integer);
  if (c.dt_ms <= 0) throw ConfigFailure("dt_ms", "must be > 0");
  if (c.duration_ms <= 0 || c.duration_ms % c.dt_ms != 0) {
    throw ConfigFailure("duration_ms", "must be a positive multiple of dt_ms");
  }
  if (c.emit_interval_ms <= 0) throw ConfigFailure("emit_interval_ms", "must be > 0");

  if (j.contains("idle_capture")) {
    const auto& ic = j.at("idle_capture");
    allow_only(ic, "idle_capture", {"mode", "window_ms"});
    if (ic.contains("mode")) {
      auto m = text(ic.at("mode"), "idle_capture.mode");
      if (m == "averaged") {
        c.idle_capture.mode = calibration::IdleCaptureMode::averaged;
      } else if (m == "single") {
        c.idle_capture.mode = calibration::IdleCaptureMode::single;
      } else {
        throw ConfigFailure("idle_capture.mode", "expected averaged or single");
      }
    }
    optional_field(ic, "idle_capture", "window_ms", c.idle_capture.window, integer);
  }
  if (c.idle_capture.window <= 0) throw ConfigFailure("idle_capture.window_ms", "must be > 0");

  if (j.contains("node")) {
    const auto& n = j.at("node");
    allow_only(n, "node", {"idle_w", "system_dyn_w"});
    optional_field(n, "node", "idle_w", c.node.base_idle, number);
    optional_field(n, "node", "system_dyn_w", c.node.system_dynamic, number);
    if (!(c.node.base_idle >= 0.0)) throw ConfigFailure("node.idle_w", "must be >= 0");
    if (!(c.node.system_dynamic >= 0.0)) throw ConfigFailure("node.system_dyn_w", "must be >= 0");
  }

  if (j.contains("approximation")) {
    const auto& a = j.at("approximation");
    allow_only(a, "approximation", {"gain", "bias_w", "sigma_w", "idle_split", "system_requested"});
    optional_field(a, "approximation", "gain", c.approximation.gain, number);
    optional_field(a, "approximation", "bias_w", c.approximation.bias, number);
    optional_field(a, "approximation", "sigma_w", c.approximation.sigma, number);
    optional_field(a, "approximation", "system_requested", c.approximation.system_requested,
                   number);
    if (a.contains("idle_split")) {
      auto s = text(a.at("idle_split"), "approximation.idle_split");
      if (s == "even") {
        c.approximation.idle_split = emulation::IdleSplit::even;
      } else if (s == "requested") {
        c.approximation.idle_split = emulation::IdleSplit::requested;
      } else {
        throw ConfigFailure("approximation.idle_split", "expected even or requested");
      }
    }
    check("approximation", [&] { c.approximation.validate(); });
  }

  if (j.contains("meter")) {
    const auto& m = j.at("meter");
    allow_only(m, "meter",
               {"voltage", "relative_error_v", "relative_error_i", "relative_error_phi",
                "sample_interval_ms", "seed"});
    optional_field(m, "meter", "voltage", c.meter.voltage, number);
    optional_field(m, "meter", "relative_error_v", c.meter.relative_error_v, number);
    optional_field(m, "meter", "relative_error_i", c.meter.relative_error_i, number);
    optional_field(m, "meter", "relative_error_phi", c.meter.relative_error_phi, number);
    optional_field(m, "meter", "sample_interval_ms", c.meter.sample_interval, integer);
    if (m.contains("seed")) {
      if (!m.at("seed").is_number_unsigned()) {
        throw ConfigFailure("meter.seed", "expected an unsigned integer");
      }
      c.meter.seed = m.at("seed").get<std::uint64_t>();
    }
    check("meter", [&] { c.meter.validate(); });
  }

  if (j.contains("workloads")) {
    const auto& ws = j.at("workloads");
    if (!ws.is_array()) throw ConfigFailure("workloads", "expected a list");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < ws.size(); ++i) {
      auto w = parse_workload(ws[i], index("workloads", i));
      if (!ids.insert(w.spec.process_id).second ||
          w.spec.process_id == emulation::kSystemProcess) {
        throw ConfigFailure(index("workloads", i) + ".process_id", "duplicate or reserved id");
      }
      c.workloads.push_back(std::move(w));
    }
  }

  if (j.contains("actors")) {
    const auto& as = j.at("actors");
    if (!as.is_array()) throw ConfigFailure("actors", "expected a list");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < as.size(); ++i) {
      auto a = parse_actor(as[i], index("actors", i));
      if (!ids.insert(a.id).second) throw ConfigFailure(index("actors", i) + ".id", "duplicate id");
      c.actors.push_back(std::move(a));
    }
  }

  if (j.contains("storage") && !j.at("storage").is_null()) {
    c.storage = parse_storage(j.at("storage"), "storage");
  }

  if (j.contains("signals")) {
    const auto& s = j.at("signals");
    allow_only(s, "signals", {"interval_ms", "window_ms"});
    optional_field(s, "signals", "interval_ms", c.signal_interval_ms, integer);
    optional_field(s, "signals", "window_ms", c.signal_window_ms, integer);
    if (c.signal_interval_ms <= 0) throw ConfigFailure("signals.interval_ms", "must be > 0");
    if (c.signal_window_ms <= 0 || c.signal_window_ms % 1000 != 0) {
      throw ConfigFailure("signals.window_ms", "must be a positive whole number of seconds");
    }
  }

  if (j.contains("regression")) {
    const auto& r = j.at("regression");
    allow_only(r, "regression", {"align_tolerance_ms"});
    if (r.contains("align_tolerance_ms")) {
      c.align_tolerance_ms = integer(r.at("align_tolerance_ms"), "regression.align_tolerance_ms");
      if (*c.align_tolerance_ms < 0) {
        throw ConfigFailure("regression.align_tolerance_ms", "must be >= 0");
      }
    }
  }

  optional_field(j, "", "outputs", c.outputs, text);
  return c;
}

inline ScenarioConfig parse_config_text(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigFailure("<root>", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ConfigFailure("<file>", e.what());
  }
  return parse_config_text(text);
}

}  // namespace gridcalib::config
