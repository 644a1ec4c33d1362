#pragma once

// Synthetic stand-ins for real workloads, the per-process power approximation
// exporter and the socket power meter.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "gridcalib/attribution.hpp"
#include "gridcalib/error.hpp"
#include "gridcalib/timeseries.hpp"
#include "gridcalib/units.hpp"

namespace gridcalib::emulation {

using Rng = std::mt19937_64;

/// Independent, reproducible stream `stream` derived from a scenario seed.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

enum class WorkloadKind { service, batch, stress };
enum class LoadKnob { rps, batch_size, threads };

struct WorkloadSpec {
  std::string process_id;
  std::string ns = "bench";
  WorkloadKind kind = WorkloadKind::service;
  Watts idle_share = 0.0;
  /// Watts per load unit (per RPS, per batch element, per thread).
  double dyn_coeff = 0.0;
  LoadKnob load_knob = LoadKnob::rps;
  Watts noise_sigma = 0.0;
  /// Fraction of this process's dynamic power the approximation layer books
  /// under system processes.
  double leakage_lambda = 0.0;
  double requested = 1.0;

  void validate() const {
    if (process_id.empty()) throw Error(ErrorKind::InvalidInput, "workload needs a process id");
    if (!(idle_share >= 0.0) || !(dyn_coeff >= 0.0) || !(noise_sigma >= 0.0) ||
        !(requested >= 0.0)) {
      throw Error(ErrorKind::InvalidInput, process_id + ": workload parameters must be >= 0");
    }
    if (!(leakage_lambda >= 0.0 && leakage_lambda < 1.0)) {
      throw Error(ErrorKind::InvalidInput, process_id + ": leakage_lambda must be in [0, 1)");
    }
  }
};

/// Idle share plus load-proportional dynamic power plus gaussian noise,
/// clamped at zero.
inline Watts true_power(const WorkloadSpec& spec, double load, Rng& rng) {
  if (!(load >= 0.0)) throw Error(ErrorKind::InvalidInput, "load must be >= 0");
  double noise = 0.0;
  if (spec.noise_sigma > 0.0) noise = std::normal_distribution<double>(0.0, spec.noise_sigma)(rng);
  return std::max(0.0, spec.idle_share + spec.dyn_coeff * load + noise);
}

/// Active power P = V * I * cos(phi).
inline Watts active_power(double volts, double amps, double cos_phi) { return volts * amps * cos_phi; }

struct MeterSpec {
  double voltage = 230.0;
  double relative_error_v = 0.01;
  double relative_error_i = 0.015;
  double relative_error_phi = 0.01;
  DurationMs sample_interval = 1000;
  std::uint64_t seed = 0;

  /// Accuracy class of the device: the component bounds add up.
  double combined_bound() const { return relative_error_v + relative_error_i + relative_error_phi; }

  void validate() const {
    if (!(voltage > 0.0)) throw Error(ErrorKind::InvalidInput, "meter voltage must be > 0");
    if (!(relative_error_v >= 0.0 && relative_error_v <= 0.01) ||
        !(relative_error_i >= 0.0 && relative_error_i <= 0.015) ||
        !(relative_error_phi >= 0.0 && relative_error_phi <= 0.01)) {
      throw Error(ErrorKind::InvalidInput,
                  "meter errors must be within 1% (V), 1.5% (I), 1% (phi)");
    }
    if (combined_bound() > 0.035 + 1e-12) {
      throw Error(ErrorKind::InvalidInput, "combined meter error exceeds 3.5%");
    }
    if (sample_interval <= 0) throw Error(ErrorKind::BadInterval, "meter interval must be > 0");
  }
};

/// One meter reading of a load drawing `true_total` watts. Voltage, current
/// and cos(phi) (baseline 1) get independent uniform relative errors; the
/// reading is held within the meter's combined accuracy bound.
inline Watts meter_sample(Watts true_total, const MeterSpec& spec, Rng& rng) {
  if (!(true_total >= 0.0)) throw Error(ErrorKind::InvalidInput, "true power must be >= 0");
  auto perturb = [&rng](double bound) {
    return bound > 0.0 ? std::uniform_real_distribution<double>(-bound, bound)(rng) : 0.0;
  };
  const double cos_phi = 1.0;
  const double amps = true_total / (spec.voltage * cos_phi);
  double v = spec.voltage * (1.0 + perturb(spec.relative_error_v));
  double i = amps * (1.0 + perturb(spec.relative_error_i));
  double c = cos_phi * (1.0 + perturb(spec.relative_error_phi));
  double bound = spec.combined_bound();
  return std::clamp(active_power(v, i, c), true_total * (1.0 - bound), true_total * (1.0 + bound));
}

struct Schedule {
  std::vector<double> values;
  DurationMs runtime = 600'000;
};

/// Load sweeps used by the evaluation workloads: request rates, batch sizes
/// and stress thread counts, ten minutes per value.
inline Schedule named_schedule(std::string_view kind) {
  Schedule s;
  if (kind == "rps") {
    for (int r = 250; r <= 2000; r += 250) s.values.push_back(r);
  } else if (kind == "batch") {
    s.values = {1, 4, 8, 16, 32};
  } else if (kind == "threads") {
    for (int t = 1; t <= 16; ++t) s.values.push_back(t);
  } else {
    throw Error(ErrorKind::UnknownKind, "no schedule named '" + std::string(kind) + "'");
  }
  return s;
}

struct ProcessTruth {
  std::string process_id;
  std::string ns;
  Watts idle = 0.0;
  Watts dynamic = 0.0;
  double leakage_lambda = 0.0;
  double requested = 1.0;
};

/// What the node really draws: platform idle, non-workload system activity and
/// every process's idle and dynamic power.
struct GroundTruth {
  Watts base_idle = 0.0;
  Watts system_dynamic = 0.0;
  std::vector<ProcessTruth> processes;

  Watts idle_total() const {
    Watts sum = base_idle;
    for (const auto& p : processes) sum += p.idle;
    return sum;
  }
  Watts dynamic_total() const {
    Watts sum = system_dynamic;
    for (const auto& p : processes) sum += p.dynamic;
    return sum;
  }
  Watts total() const { return idle_total() + dynamic_total(); }
};

enum class IdleSplit { even, requested };

/// Error model of the approximation layer, expressed as the regression line of
/// measured against approximated node power:
///   true = gain * approx + bias + noise.
struct ApproximationModel {
  double gain = 1.0;
  Watts bias = 0.0;
  Watts sigma = 0.0;
  IdleSplit idle_split = IdleSplit::even;
  double system_requested = 1.0;

  void validate() const {
    if (!(gain > 0.0)) throw Error(ErrorKind::InvalidInput, "approximation gain must be > 0");
    if (!std::isfinite(bias) || !(sigma >= 0.0)) {
      throw Error(ErrorKind::InvalidInput, "approximation bias must be finite and sigma >= 0");
    }
  }

  /// Node-level approximation of a true node total (noise given).
  Watts approximate_node(Watts true_total, Watts noise = 0.0) const {
    return (true_total - bias - noise) / gain;
  }
};

struct ScopeApprox {
  std::string process_id;
  std::string ns;
  Watts dynamic = 0.0;
  Watts idle = 0.0;
};

struct Approximation {
  std::vector<ScopeApprox> processes;
  ScopeApprox system;
  Watts node_dynamic = 0.0;
  Watts node_idle = 0.0;

  Watts node_total() const { return node_dynamic + node_idle; }
};

inline const std::string kSystemNamespace = "system";
inline const std::string kSystemProcess = "system_processes";

/// Per-process approximation of a ground truth. Node dynamic power is scaled
/// by 1/gain and split with the ratio model, the system process receiving the
/// leaked share lambda of every workload. Bias and noise act on the idle
/// component, which is split evenly or by requested resources.
inline Approximation approximate(const GroundTruth& truth, const ApproximationModel& model,
                                 Rng& rng) {
  model.validate();
  Approximation out;
  out.system = ScopeApprox{kSystemProcess, kSystemNamespace, 0.0, 0.0};

  std::vector<attribution::ProcessUtilization> utils;
  utils.push_back({kSystemProcess, truth.system_dynamic, model.system_requested});
  double leaked = 0.0;
  for (const auto& p : truth.processes) {
    leaked += p.leakage_lambda * p.dynamic;
    utils.push_back({p.process_id, (1.0 - p.leakage_lambda) * p.dynamic, p.requested});
  }
  utils.front().util += leaked;

  double noise = 0.0;
  if (model.sigma > 0.0) noise = std::normal_distribution<double>(0.0, model.sigma)(rng);

  attribution::NodePower node;
  node.dynamic = truth.dynamic_total() / model.gain;
  node.idle = std::max(0.0, (truth.idle_total() - model.bias - noise) / model.gain);
  for (const auto& u : utils) node.total_requested += u.requested;

  auto dyn = attribution::split_dynamic(node, utils);
  attribution::Shares idle;
  if (model.idle_split == IdleSplit::requested) {
    idle = attribution::split_idle_requested(node, utils);
  } else {
    Watts share = attribution::split_idle_even(node, utils.size());
    for (const auto& u : utils) idle[u.process_id] = share;
  }

  out.system.dynamic = dyn.at(kSystemProcess);
  out.system.idle = idle.at(kSystemProcess);
  out.node_dynamic = out.system.dynamic;
  out.node_idle = out.system.idle;
  for (const auto& p : truth.processes) {
    ScopeApprox s{p.process_id, p.ns, dyn.at(p.process_id), idle.at(p.process_id)};
    out.node_dynamic += s.dynamic;
    out.node_idle += s.idle;
    out.processes.push_back(std::move(s));
  }
  return out;
}

struct NodeSpec {
  Watts base_idle = 250.0;
  /// Non-workload system dynamic power, so s_dyn is never pure leakage.
  Watts system_dynamic = 5.0;
};

struct EmulatorConfig {
  NodeSpec node;
  ApproximationModel approximation;
  MeterSpec meter;
  std::vector<WorkloadSpec> workloads;
  std::string metric = "kepler_container_platform_joules_total";
  std::string meter_metric = "socket_meter_power_w";
  std::uint64_t seed = 0;
};

/// Periodic emitter writing the approximation as joules counters and the
/// meter as a gauge. Each emission closes the interval since the previous
/// one: it draws that interval's truth from the loads in force now,
/// integrates the approximation into the counters and samples the meter.
class Emulator {
 public:
  using MeterSink = std::function<void(Watts, TimestampMs)>;

  Emulator(std::shared_ptr<timeseries::MetricStore> store, EmulatorConfig config)
      : store_(std::move(store)),
        config_(std::move(config)),
        truth_rng_(make_rng(config_.seed, 1)),
        approx_rng_(make_rng(config_.seed, 2)),
        meter_rng_(make_rng(config_.meter.seed != 0 ? config_.meter.seed : config_.seed, 3)) {
    config_.approximation.validate();
    config_.meter.validate();
    std::map<std::string, int> seen;
    for (const auto& w : config_.workloads) {
      w.validate();
      if (w.process_id == kSystemProcess || seen[w.process_id]++ > 0) {
        throw Error(ErrorKind::InvalidInput, "duplicate or reserved process id " + w.process_id);
      }
      loads_[w.process_id] = 0.0;
    }
  }

  /// Route meter readings elsewhere (e.g. over the TCP line protocol) instead
  /// of writing them to the store.
  void set_meter_sink(MeterSink sink) { meter_sink_ = std::move(sink); }

  void set_load(const std::string& process_id, double load) {
    std::lock_guard lock(mutex_);
    auto it = loads_.find(process_id);
    if (it == loads_.end()) throw Error(ErrorKind::InvalidInput, "unknown process " + process_id);
    if (!(load >= 0.0)) throw Error(ErrorKind::InvalidInput, "load must be >= 0");
    it->second = load;
  }

  double load(const std::string& process_id) const {
    std::lock_guard lock(mutex_);
    return loads_.at(process_id);
  }

  void start(TimestampMs t0) {
    std::lock_guard lock(mutex_);
    last_emit_ = t0;
    last_meter_ = t0;
    for (const auto& scope : scopes()) {
      for (const char* mode : {"dynamic", "idle"}) write_counter(scope, mode, t0);
    }
    started_ = true;
  }

  void emit(TimestampMs t) {
    std::lock_guard lock(mutex_);
    if (!started_) throw Error(ErrorKind::InvalidInput, "emulator not started");
    if (t <= last_emit_) return;
    const double dt_s = seconds(t - last_emit_);
    draw();
    energy_[key(current_approx_.system, "dynamic")] += current_approx_.system.dynamic * dt_s;
    energy_[key(current_approx_.system, "idle")] += current_approx_.system.idle * dt_s;
    for (const auto& p : current_approx_.processes) {
      energy_[key(p, "dynamic")] += p.dynamic * dt_s;
      energy_[key(p, "idle")] += p.idle * dt_s;
    }
    for (const auto& scope : scopes()) {
      for (const char* mode : {"dynamic", "idle"}) write_counter(scope, mode, t);
    }
    interval_truth_ = current_truth_;
    interval_approx_ = current_approx_;
    if (t - last_meter_ >= config_.meter.sample_interval) {
      last_meter_ = t;
      last_meter_value_ = meter_sample(interval_truth_.total(), config_.meter, meter_rng_);
      if (meter_sink_) {
        meter_sink_(last_meter_value_, t);
      } else {
        store_->append(config_.meter_metric, {}, timeseries::MetricKind::gauge,
                       {t, last_meter_value_});
      }
    }
    last_emit_ = t;
  }

  /// Truth and approximation of the interval closed by the last emission.
  GroundTruth interval_truth() const {
    std::lock_guard lock(mutex_);
    return interval_truth_;
  }
  Approximation interval_approx() const {
    std::lock_guard lock(mutex_);
    return interval_approx_;
  }
  Watts last_meter() const {
    std::lock_guard lock(mutex_);
    return last_meter_value_;
  }
  const EmulatorConfig& config() const { return config_; }

  /// Label set of a process's counter series.
  static timeseries::Labels labels_for(const std::string& ns, const std::string& process_id,
                                       const std::string& mode) {
    return {{"container_namespace", ns}, {"container_name", process_id}, {"mode", mode}};
  }

 private:
  struct Scope {
    std::string ns;
    std::string process_id;
  };

  std::vector<Scope> scopes() const {
    std::vector<Scope> out{{kSystemNamespace, kSystemProcess}};
    for (const auto& w : config_.workloads) out.push_back({w.ns, w.process_id});
    return out;
  }

  static std::string key(const ScopeApprox& s, const std::string& mode) {
    return s.process_id + "\x1f" + mode;
  }

  void write_counter(const Scope& scope, const std::string& mode, TimestampMs t) {
    double value = energy_[scope.process_id + "\x1f" + mode];
    store_->append(config_.metric, labels_for(scope.ns, scope.process_id, mode),
                   timeseries::MetricKind::counter, {t, value});
  }

  void draw() {
    GroundTruth truth;
    truth.base_idle = config_.node.base_idle;
    truth.system_dynamic = config_.node.system_dynamic;
    for (const auto& w : config_.workloads) {
      Watts total = true_power(w, loads_.at(w.process_id), truth_rng_);
      Watts idle = std::min(w.idle_share, total);
      truth.processes.push_back({w.process_id, w.ns, idle, total - idle, w.leakage_lambda,
                                 w.requested});
    }
    current_truth_ = std::move(truth);
    current_approx_ = approximate(current_truth_, config_.approximation, approx_rng_);
  }

  mutable std::mutex mutex_;
  std::shared_ptr<timeseries::MetricStore> store_;
  EmulatorConfig config_;
  Rng truth_rng_;
  Rng approx_rng_;
  Rng meter_rng_;
  std::map<std::string, double> loads_;
  std::map<std::string, Joules> energy_;
  GroundTruth current_truth_;
  Approximation current_approx_;
  GroundTruth interval_truth_;
  Approximation interval_approx_;
  MeterSink meter_sink_;
  TimestampMs last_emit_ = 0;
  TimestampMs last_meter_ = 0;
  Watts last_meter_value_ = 0.0;
  bool started_ = false;
};

}  // namespace gridcalib::emulation
