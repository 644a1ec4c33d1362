#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gridcalib/microgrid.hpp"

namespace gridcalib::benchmark {

enum class LifecycleAction { none, start, stop_and_start, complete };

enum class EventKind { start, stop, complete };

constexpr std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::start: return "start";
    case EventKind::stop: return "stop";
    case EventKind::complete: return "complete";
  }
  return "unknown";
}

struct Event {
  EventKind kind = EventKind::start;
  TimestampMs time = 0;
  std::size_t iteration = 0;  // 1-based
  double value = 0.0;
};

/// Drives a benchmark through an ordered parameter schedule, one iteration of
/// `runtime` per value. Iteration 1 starts on the first step; an iteration
/// ends on the first step with time - start >= runtime. Ending the last
/// iteration completes the scenario.
class BenchmarkController : public microgrid::Controller {
 public:
  struct Hooks {
    std::function<void(double value)> start;
    std::function<void()> stop;
  };

  BenchmarkController(std::string name, DurationMs runtime, std::vector<double> schedule,
                      Hooks hooks = {})
      : name_(std::move(name)), runtime_(runtime), schedule_(std::move(schedule)),
        hooks_(std::move(hooks)) {
    if (runtime_ <= 0) throw Error(ErrorKind::BadInterval, "benchmark runtime must be positive");
    if (schedule_.empty()) throw Error(ErrorKind::InvalidInput, "benchmark schedule is empty");
  }

  LifecycleAction step_at(TimestampMs time) {
    if (completed_) return LifecycleAction::none;
    if (!running_) {
      start(time);
      return LifecycleAction::start;
    }
    if (time - start_time_ < runtime_) return LifecycleAction::none;
    if (index_ + 1 >= schedule_.size()) {
      stop(time, EventKind::complete);
      return LifecycleAction::complete;
    }
    stop(time, EventKind::stop);
    update_values();
    start(time);
    return LifecycleAction::stop_and_start;
  }

  void step(const microgrid::ControllerView& view) override { step_at(view.tick.time); }

  /// End of run: a still-running final iteration completes, an earlier one is
  /// stopped.
  void finalize(TimestampMs time) override {
    if (!running_) return;
    stop(time, index_ + 1 >= schedule_.size() ? EventKind::complete : EventKind::stop);
  }

  const std::string& name() const { return name_; }
  const std::vector<Event>& events() const { return events_; }
  bool running() const { return running_; }
  bool completed() const { return completed_; }
  double current_value() const { return schedule_[index_]; }
  DurationMs runtime() const { return runtime_; }

 protected:
  /// Moves to the next schedule entry; subclasses may override to adjust
  /// other benchmark parameters between iterations.
  virtual void update_values() { ++index_; }

 private:
  void start(TimestampMs time) {
    running_ = true;
    start_time_ = time;
    events_.push_back({EventKind::start, time, index_ + 1, schedule_[index_]});
    if (hooks_.start) hooks_.start(schedule_[index_]);
  }

  void stop(TimestampMs time, EventKind kind) {
    running_ = false;
    if (kind == EventKind::complete) completed_ = true;
    events_.push_back({kind, time, index_ + 1, schedule_[index_]});
    if (hooks_.stop) hooks_.stop();
  }

  std::string name_;
  DurationMs runtime_;
  std::vector<double> schedule_;
  Hooks hooks_;
  std::size_t index_ = 0;
  TimestampMs start_time_ = 0;
  bool running_ = false;
  bool completed_ = false;
  std::vector<Event> events_;
};

}  // namespace gridcalib::benchmark
