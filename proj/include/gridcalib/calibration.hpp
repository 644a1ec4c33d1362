#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "gridcalib/error.hpp"
#include "gridcalib/query.hpp"
#include "gridcalib/signals.hpp"
#include "gridcalib/timeseries.hpp"

namespace gridcalib::calibration {

/// Guard on n_dyn - s_dyn.
constexpr Watts kDenominatorEpsilon = 1e-6;
/// Relative slack allowed on p_dyn <= n_dyn and s_dyn <= n_dyn.
constexpr double kConsistencyTolerance = 1e-6;

/// Share of a measured power component attributable to one process or group.
struct CalibrationFactor {
  double a = 0.0;
};

/// Approximated quantities (p_*, n_*, s_dyn) plus meter readings (m, m_idle).
struct CalibrationInputs {
  Watts p_dyn = 0.0;
  Watts n_dyn = 0.0;
  Watts s_dyn = 0.0;
  Watts m = 0.0;
  Watts m_idle = 0.0;
  Watts p_idle = 0.0;
  Watts n_idle = 0.0;

  void validate() const {
    for (double v : {p_dyn, n_dyn, s_dyn, m, m_idle, p_idle, n_idle}) {
      if (!std::isfinite(v) || v < 0.0) {
        throw Error(ErrorKind::InvalidInput, "calibration inputs must be finite and >= 0");
      }
    }
    double slack = kConsistencyTolerance * n_dyn;
    if (p_dyn > n_dyn + slack) throw Error(ErrorKind::InvalidInput, "p_dyn exceeds n_dyn");
    if (s_dyn > n_dyn + slack) throw Error(ErrorKind::InvalidInput, "s_dyn exceeds n_dyn");
  }
};

inline Watts calibrate_idle(Watts p_idle, Watts n_idle, Watts m_idle) {
  if (!(n_idle > 0.0)) throw Error(ErrorKind::ZeroNodeIdle, "approximated node idle power is 0");
  return p_idle / n_idle * m_idle;
}

/// A = p_dyn / (n_dyn - s_dyn): the process's share of workload dynamic power
/// once system-process power is redistributed proportionally.
inline CalibrationFactor dynamic_factor(Watts p_dyn, Watts n_dyn, Watts s_dyn) {
  Watts workload = n_dyn - s_dyn;
  if (!(workload > kDenominatorEpsilon)) {
    throw Error(ErrorKind::DegenerateDenominator,
                "n_dyn - s_dyn = " + format_double(workload) + " W leaves nothing to attribute");
  }
  return CalibrationFactor{p_dyn / workload};
}

/// Measured dynamic power m - m_idle, clamped at zero, scaled by A.
inline Watts calibrate_dynamic(CalibrationFactor factor, Watts m, Watts m_idle) {
  return factor.a * std::max(0.0, m - m_idle);
}

/// Calibrated idle and dynamic are kept apart; total() is for presentation.
struct CalibratedPower {
  Watts dynamic = 0.0;
  Watts idle = 0.0;

  Watts total() const { return dynamic + idle; }
};

inline CalibratedPower calibrate(const CalibrationInputs& in) {
  in.validate();
  CalibratedPower out;
  out.dynamic = calibrate_dynamic(dynamic_factor(in.p_dyn, in.n_dyn, in.s_dyn), in.m, in.m_idle);
  out.idle = calibrate_idle(in.p_idle, in.n_idle, in.m_idle);
  return out;
}

/// Dynamic calibration for a live actor. When the node carries no workload
/// dynamic power at all (denominator and p_dyn both below the guard) the
/// answer is 0 W; otherwise a degenerate denominator is an error.
inline Watts namespace_power(Watts p_dyn, Watts n_dyn, Watts s_dyn, Watts m, Watts m_idle) {
  if (n_dyn - s_dyn <= kDenominatorEpsilon && p_dyn <= kDenominatorEpsilon) return 0.0;
  return calibrate_dynamic(dynamic_factor(p_dyn, n_dyn, s_dyn), m, m_idle);
}

enum class IdleCaptureMode { averaged, single };

struct IdleCapture {
  IdleCaptureMode mode = IdleCaptureMode::averaged;
  DurationMs window = 30'000;
};

struct ActorOptions {
  std::string metric = "kepler_container_platform_joules_total";
  std::string meter_metric = "socket_meter_power_w";
  std::string namespace_label = "container_namespace";
  std::string system_namespace = "system";
  DurationMs window = timeseries::kDefaultRateWindowMs;
  DurationMs interval = signals::kDefaultIntervalMs;
  IdleCapture idle_capture{};
  /// Raise StaleSignal if a feeding signal has not collected yet.
  bool strict = false;
};

inline timeseries::QueryExpr rate_expr(const ActorOptions& options, timeseries::Labels filters) {
  return timeseries::QueryExpr{true, options.metric, std::move(filters), options.window};
}

/// The node-wide signals every calibrated scope on a node shares: meter total
/// m, node dynamic n_dyn, system dynamic s_dyn and node idle n_idle.
struct NodeSignals {
  std::shared_ptr<signals::Signal> meter;
  std::shared_ptr<signals::Signal> node_dynamic;
  std::shared_ptr<signals::Signal> system_dynamic;
  std::shared_ptr<signals::Signal> node_idle;

  static NodeSignals create(const std::shared_ptr<const timeseries::MetricStore>& store,
                            const std::shared_ptr<Clock>& clock, const ActorOptions& options) {
    NodeSignals s;
    s.meter = std::make_shared<signals::Signal>(
        signals::make_gauge_signal(store, options.meter_metric, {}, options.interval, clock));
    s.node_dynamic = std::make_shared<signals::Signal>(signals::make_query_signal(
        store, rate_expr(options, {{"mode", "dynamic"}}), options.interval, clock));
    s.system_dynamic = std::make_shared<signals::Signal>(signals::make_query_signal(
        store,
        rate_expr(options, {{options.namespace_label, options.system_namespace}, {"mode", "dynamic"}}),
        options.interval, clock));
    s.node_idle = std::make_shared<signals::Signal>(signals::make_query_signal(
        store, rate_expr(options, {{"mode", "idle"}}), options.interval, clock));
    return s;
  }
};

/// m_idle from the meter gauge: mean of the samples in the trailing capture
/// window, or the meter signal's current value in single-read mode (and as a
/// fallback when the window holds no samples).
inline Watts capture_idle(const timeseries::MetricStore& store, const ActorOptions& options,
                          const signals::Signal& meter, TimestampMs now) {
  if (options.idle_capture.mode == IdleCaptureMode::single) return meter.now();
  double sum = 0.0;
  std::size_t n = 0;
  auto series = store.find(options.meter_metric, {});
  if (series) {
    for (const auto& s : series->samples()) {
      if (s.timestamp > now - options.idle_capture.window && s.timestamp <= now) {
        sum += s.value;
        ++n;
      }
    }
  }
  return n > 0 ? sum / static_cast<double>(n) : meter.now();
}

/// Calibrates one label scope (a namespace, or a single process) against the
/// node meter. All signal reads of an evaluation happen before any arithmetic.
class ScopeCalibrator {
 public:
  ScopeCalibrator(std::shared_ptr<const timeseries::MetricStore> store,
                  std::shared_ptr<Clock> clock, NodeSignals node, timeseries::Labels scope,
                  Watts m_idle, ActorOptions options = {})
      : node_(std::move(node)), m_idle_(m_idle), options_(std::move(options)) {
    auto dyn = scope;
    dyn["mode"] = "dynamic";
    auto idle = std::move(scope);
    idle["mode"] = "idle";
    p_dyn_ = std::make_shared<signals::Signal>(
        signals::make_query_signal(store, rate_expr(options_, dyn), options_.interval, clock));
    p_idle_ = std::make_shared<signals::Signal>(
        signals::make_query_signal(store, rate_expr(options_, idle), options_.interval, clock));
  }

  Watts m_idle() const { return m_idle_; }

  /// Calibrated dynamic power p_cal_dyn = A * (m - m_idle).
  Watts dynamic_power() const {
    double m = node_.meter->now();
    double n_dyn = node_.node_dynamic->now();
    double p_dyn = p_dyn_->now();
    double s_dyn = node_.system_dynamic->now();
    if (options_.strict) require_fresh({node_.meter.get(), node_.node_dynamic.get(), p_dyn_.get(),
                                        node_.system_dynamic.get()});
    return namespace_power(p_dyn, n_dyn, s_dyn, m, m_idle_);
  }

  /// Calibrated idle power (p_idle / n_idle) * m_idle; 0 before the node idle
  /// approximation is available.
  Watts idle_power() const {
    double p_idle = p_idle_->now();
    double n_idle = node_.node_idle->now();
    if (options_.strict) require_fresh({p_idle_.get(), node_.node_idle.get()});
    if (!(n_idle > 0.0)) return 0.0;
    return calibrate_idle(p_idle, n_idle, m_idle_);
  }

  /// Uncalibrated approximated dynamic power of the scope.
  Watts raw_dynamic() const { return p_dyn_->now(); }
  Watts raw_idle() const { return p_idle_->now(); }

 private:
  static void require_fresh(std::initializer_list<const signals::Signal*> feeds) {
    for (const auto* s : feeds) {
      if (!s->has_collected()) throw Error(ErrorKind::StaleSignal, "signal has never collected");
    }
  }

  NodeSignals node_;
  Watts m_idle_;
  ActorOptions options_;
  std::shared_ptr<signals::Signal> p_dyn_;
  std::shared_ptr<signals::Signal> p_idle_;
};

/// Calibrated consumer for every process of one namespace. m_idle is captured
/// from the meter when the actor is constructed, so build it before the
/// workloads start.
class NamespaceActor {
 public:
  NamespaceActor(std::shared_ptr<const timeseries::MetricStore> store, std::shared_ptr<Clock> clock,
                 NodeSignals node, std::string ns, ActorOptions options = {})
      : namespace_(std::move(ns)),
        calibrator_(store, clock, node,
                    timeseries::Labels{{options.namespace_label, namespace_}},
                    capture_idle(*store, options, *node.meter, clock->now()), options) {}

  const std::string& name() const { return namespace_; }
  Watts power() const { return calibrator_.dynamic_power(); }
  Watts raw_power() const { return calibrator_.raw_dynamic(); }
  Watts m_idle() const { return calibrator_.m_idle(); }
  const ScopeCalibrator& calibrator() const { return calibrator_; }

 private:
  std::string namespace_;
  ScopeCalibrator calibrator_;
};

}  // namespace gridcalib::calibration
