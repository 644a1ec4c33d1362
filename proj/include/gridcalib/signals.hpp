#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string_view>

#include "gridcalib/clock.hpp"
#include "gridcalib/query.hpp"
#include "gridcalib/timeseries.hpp"

namespace gridcalib::signals {

constexpr DurationMs kDefaultIntervalMs = 1000;

using Collector = std::function<double()>;

/// A value refreshed in the background every `interval` of clock time.
/// now() only reads the last collected value and never waits on the
/// collector. Before the first collection the value is 0.0. A collector that
/// throws leaves the previous value in place and bumps errors().
class Signal {
 public:
  Signal(Collector collector, std::optional<DurationMs> interval, std::shared_ptr<Clock> clock)
      : state_(std::make_shared<State>()) {
    DurationMs effective = interval.value_or(kDefaultIntervalMs);
    if (effective <= 0) throw Error(ErrorKind::BadInterval, "signal interval must be positive");
    state_->collector = std::move(collector);
    task_ = PeriodicTask(std::move(clock), effective,
                         [state = state_](TimestampMs at) { collect(*state, at); });
  }

  double now() const noexcept { return state_->value.load(std::memory_order_acquire); }

  DurationMs interval() const { return task_.interval(); }

  /// Clock time of the last successful collection, 0 if none yet.
  TimestampMs last_collection() const noexcept { return state_->last_collection.load(); }
  bool has_collected() const noexcept { return state_->successes.load() > 0; }

  std::uint64_t invocations() const noexcept { return state_->invocations.load(); }
  std::uint64_t errors() const noexcept { return state_->errors.load(); }

 private:
  struct State {
    std::atomic<double> value{0.0};
    std::atomic<TimestampMs> last_collection{0};
    std::atomic<std::uint64_t> invocations{0};
    std::atomic<std::uint64_t> successes{0};
    std::atomic<std::uint64_t> errors{0};
    Collector collector;
  };

  static void collect(State& state, TimestampMs at) {
    state.invocations.fetch_add(1);
    try {
      double v = state.collector();
      state.value.store(v, std::memory_order_release);
      state.last_collection.store(at);
      state.successes.fetch_add(1);
    } catch (...) {
      state.errors.fetch_add(1);
    }
  }

  std::shared_ptr<State> state_;
  PeriodicTask task_;
};

inline Signal make_collector_signal(Collector collector, std::optional<DurationMs> interval,
                                    std::shared_ptr<Clock> clock) {
  return Signal(std::move(collector), interval, std::move(clock));
}

/// Signal whose collector evaluates a rate query against the store at the
/// firing instant. The expression is parsed here so malformed input fails
/// before any signal exists.
inline Signal make_query_signal(std::shared_ptr<const timeseries::MetricStore> store,
                                const timeseries::QueryExpr& expr,
                                std::optional<DurationMs> interval, std::shared_ptr<Clock> clock,
                                timeseries::QueryOptions options = {}) {
  auto collector = [store = std::move(store), expr, clock, options] {
    return timeseries::evaluate(*store, expr, clock->now(), options);
  };
  return Signal(std::move(collector), interval, std::move(clock));
}

inline Signal make_query_signal(std::shared_ptr<const timeseries::MetricStore> store,
                                std::string_view expr, std::optional<DurationMs> interval,
                                std::shared_ptr<Clock> clock,
                                timeseries::QueryOptions options = {}) {
  return make_query_signal(std::move(store), timeseries::parse_query(expr), interval,
                           std::move(clock), options);
}

/// Latest value of a gauge series, e.g. the socket meter.
inline Signal make_gauge_signal(std::shared_ptr<const timeseries::MetricStore> store,
                                std::string metric, timeseries::Labels labels,
                                std::optional<DurationMs> interval, std::shared_ptr<Clock> clock) {
  auto collector = [store = std::move(store), metric = std::move(metric),
                    labels = std::move(labels)]() -> double {
    auto sample = store->latest(metric, labels);
    if (!sample) throw Error(ErrorKind::UnknownMetric, metric);
    return sample->value;
  };
  return Signal(std::move(collector), interval, std::move(clock));
}

}  // namespace gridcalib::signals
