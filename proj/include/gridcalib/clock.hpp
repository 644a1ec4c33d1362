#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <stop_token>
#include <thread>
#include <vector>

#include "gridcalib/error.hpp"
#include "gridcalib/units.hpp"

namespace gridcalib {

enum class ClockMode { virtual_time, wall };

namespace detail {

struct TaskState {
  DurationMs interval = 1000;
  TimestampMs origin = 0;
  TimestampMs next_due = 0;
  std::function<void(TimestampMs)> fire;
  std::atomic<bool> cancelled{false};
};

}  // namespace detail

/// Time source for the simulation. A virtual clock moves only when advanced
/// and runs due periodic tasks synchronously, in chronological order and, for
/// equal instants, in registration order. A wall clock follows the steady
/// clock anchored at the system time of construction.
class Clock {
 public:
  static std::shared_ptr<Clock> make_virtual(TimestampMs start = 0) {
    return std::shared_ptr<Clock>(new Clock(ClockMode::virtual_time, start));
  }

  static std::shared_ptr<Clock> make_wall() {
    auto epoch_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::system_clock::now().time_since_epoch())
                        .count();
    return std::shared_ptr<Clock>(new Clock(ClockMode::wall, epoch_ms));
  }

  ClockMode mode() const noexcept { return mode_; }
  bool is_virtual() const noexcept { return mode_ == ClockMode::virtual_time; }

  TimestampMs now() const {
    if (is_virtual()) return now_.load();
    auto elapsed = std::chrono::steady_clock::now() - steady_anchor_;
    return anchor_ + std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
  }

  void advance(DurationMs delta) {
    if (delta < 0) throw Error(ErrorKind::BadInterval, "cannot advance a clock backwards");
    advance_to(now() + delta);
  }

  void advance_to(TimestampMs target) {
    if (!is_virtual()) throw Error(ErrorKind::InvalidInput, "wall clock cannot be advanced");
    if (target < now_.load()) throw Error(ErrorKind::BadInterval, "cannot move a clock backwards");
    for (;;) {
      auto tasks = live_tasks();
      TimestampMs earliest = std::numeric_limits<TimestampMs>::max();
      for (const auto& task : tasks) earliest = std::min(earliest, task->next_due);
      if (earliest > target) break;
      now_.store(earliest);
      for (const auto& task : tasks) {
        if (task->cancelled.load() || task->next_due != earliest) continue;
        task->next_due += task->interval;
        task->fire(earliest);
      }
    }
    now_.store(target);
  }

  /// Virtual: advance to `t`. Wall: block the calling thread until `t`.
  void wait_until(TimestampMs t) {
    if (is_virtual()) {
      if (t > now_.load()) advance_to(t);
      return;
    }
    auto remaining = t - now();
    if (remaining > 0) std::this_thread::sleep_for(std::chrono::milliseconds(remaining));
  }

 private:
  friend class PeriodicTask;

  Clock(ClockMode mode, TimestampMs start)
      : mode_(mode), anchor_(start), steady_anchor_(std::chrono::steady_clock::now()), now_(start) {}

  void add(const std::shared_ptr<detail::TaskState>& task) {
    std::lock_guard lock(mutex_);
    tasks_.push_back(task);
  }

  std::vector<std::shared_ptr<detail::TaskState>> live_tasks() {
    std::lock_guard lock(mutex_);
    std::vector<std::shared_ptr<detail::TaskState>> out;
    std::erase_if(tasks_, [](const auto& weak) { return weak.expired(); });
    for (const auto& weak : tasks_) {
      if (auto task = weak.lock(); task && !task->cancelled.load()) out.push_back(std::move(task));
    }
    return out;
  }

  ClockMode mode_;
  TimestampMs anchor_;
  std::chrono::steady_clock::time_point steady_anchor_;
  std::atomic<TimestampMs> now_;
  std::mutex mutex_;
  std::vector<std::weak_ptr<detail::TaskState>> tasks_;
};

/// Runs a callback every `interval` ms of clock time, first firing one
/// interval after creation. Firings stay on the grid origin + k*interval; a
/// late wall-clock firing skips missed slots instead of bursting. Destroying
/// the task stops it.
class PeriodicTask {
 public:
  PeriodicTask() = default;

  PeriodicTask(std::shared_ptr<Clock> clock, DurationMs interval,
               std::function<void(TimestampMs)> fire)
      : clock_(std::move(clock)), state_(std::make_shared<detail::TaskState>()) {
    if (interval <= 0) throw Error(ErrorKind::BadInterval, "task interval must be positive");
    state_->interval = interval;
    state_->origin = clock_->now();
    state_->next_due = state_->origin + interval;
    state_->fire = std::move(fire);
    if (clock_->is_virtual()) {
      clock_->add(state_);
    } else {
      thread_ = std::jthread([clock = clock_, state = state_](std::stop_token stop) {
        wall_loop(*clock, *state, stop);
      });
    }
  }

  PeriodicTask(PeriodicTask&&) noexcept = default;
  PeriodicTask& operator=(PeriodicTask&& other) noexcept {
    if (this != &other) {
      stop();
      clock_ = std::move(other.clock_);
      state_ = std::move(other.state_);
      thread_ = std::move(other.thread_);
    }
    return *this;
  }
  PeriodicTask(const PeriodicTask&) = delete;
  PeriodicTask& operator=(const PeriodicTask&) = delete;

  ~PeriodicTask() { stop(); }

  void stop() {
    if (state_) state_->cancelled.store(true);
    if (thread_.joinable()) {
      thread_.request_stop();
      thread_.join();
    }
  }

  DurationMs interval() const { return state_ ? state_->interval : 0; }

 private:
  static void wall_loop(Clock& clock, detail::TaskState& state, std::stop_token stop) {
    std::mutex m;
    std::condition_variable_any cv;
    std::int64_t slot = 1;
    while (!stop.stop_requested()) {
      TimestampMs due = state.origin + slot * state.interval;
      {
        std::unique_lock lock(m);
        auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::milliseconds(std::max<TimestampMs>(0, due - clock.now()));
        cv.wait_until(lock, stop, deadline, [] { return false; });
      }
      if (stop.stop_requested() || state.cancelled.load()) break;
      TimestampMs now = clock.now();
      state.fire(now);
      std::int64_t elapsed_slots = (clock.now() - state.origin) / state.interval;
      slot = std::max(slot + 1, elapsed_slots + 1);
    }
  }

  std::shared_ptr<Clock> clock_;
  std::shared_ptr<detail::TaskState> state_;
  std::jthread thread_;
};

}  // namespace gridcalib
