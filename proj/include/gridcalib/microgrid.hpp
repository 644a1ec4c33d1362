#pragma once

// Co-simulation engine. Each step samples actors, aggregates their net power
// on the grid, shows the result to controllers and settles the energy with
// storage or the public grid, always in that order.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gridcalib/clock.hpp"
#include "gridcalib/csv.hpp"
#include "gridcalib/error.hpp"
#include "gridcalib/units.hpp"

namespace gridcalib::microgrid {

/// Opaque per-actor state forwarded to controllers.
using ActorInfo = std::map<std::string, double>;

struct ActorSample {
  /// Producers report > 0, consumers < 0.
  Watts power = 0.0;
  ActorInfo info;
};

class Actor {
 public:
  virtual ~Actor() = default;
  virtual const std::string& id() const = 0;
  virtual ActorSample step(TimestampMs now) = 0;
};

enum class PolicyKind { battery_first, grid_only };

struct StoragePolicy {
  PolicyKind kind = PolicyKind::battery_first;
  double charge_efficiency = 1.0;
  double discharge_efficiency = 1.0;
};

struct StorageState {
  Joules charge = 0.0;
  Joules capacity = 0.0;
  Watts max_charge_rate = 0.0;
  Watts max_discharge_rate = 0.0;
  StoragePolicy policy{};

  void validate() const {
    if (!(capacity >= 0.0) || !(charge >= 0.0) || charge > capacity) {
      throw Error(ErrorKind::InvalidInput, "storage needs 0 <= charge <= capacity");
    }
    if (!(max_charge_rate >= 0.0) || !(max_discharge_rate >= 0.0)) {
      throw Error(ErrorKind::InvalidInput, "storage rates must be >= 0");
    }
    for (double eff : {policy.charge_efficiency, policy.discharge_efficiency}) {
      if (!(eff > 0.0 && eff <= 1.0)) {
        throw Error(ErrorKind::InvalidInput, "storage efficiency must be in (0, 1]");
      }
    }
  }
};

struct MicrogridTick {
  std::size_t t = 0;
  TimestampMs time = 0;
  std::map<std::string, Watts> actor_powers;
  Watts delta_p = 0.0;
  /// Settled energy of the previous step (delta_p * dt), 0 on the first step.
  Joules e_last = 0.0;
  Joules storage_delta = 0.0;
  /// Positive means exported to the public grid.
  Joules grid_exchange = 0.0;
  Joules storage_charge = 0.0;
};

/// Read-only snapshot handed to controllers: this step's actor samples and
/// delta_p, storage as left by the previous step.
struct ControllerView {
  const MicrogridTick& tick;
  const std::map<std::string, ActorInfo>& actor_infos;
  const std::optional<StorageState>& storage;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual void step(const ControllerView& view) = 0;
  /// Called once after the last step of a run.
  virtual void finalize(TimestampMs /*time*/) {}
};

inline Watts aggregate(const std::map<std::string, Watts>& actor_powers) {
  Watts sum = 0.0;
  for (const auto& [id, p] : actor_powers) sum += p;
  return sum;
}

struct Settlement {
  StorageState storage;
  Joules storage_delta = 0.0;
  Joules grid_exchange = 0.0;
};

/// Energy settlement for one step. storage_delta is measured on the bus side;
/// the stored charge moves by eff * delta when charging and delta / eff when
/// discharging. storage_delta + grid_exchange always equals delta_p * dt.
inline Settlement settle(const StorageState& storage, Watts delta_p, DurationMs dt) {
  if (dt <= 0) throw Error(ErrorKind::BadInterval, "dt must be positive");
  Settlement out{storage, 0.0, 0.0};
  const Joules energy = delta_p * seconds(dt);
  if (storage.policy.kind == PolicyKind::grid_only || energy == 0.0) {
    out.grid_exchange = energy;
    return out;
  }
  const double dt_s = seconds(dt);
  if (energy > 0.0) {
    double eff = storage.policy.charge_efficiency;
    Joules headroom = (storage.capacity - storage.charge) / eff;
    Joules accepted = std::clamp(std::min(energy, storage.max_charge_rate * dt_s), 0.0, headroom);
    out.storage.charge = std::min(storage.capacity, storage.charge + accepted * eff);
    out.storage_delta = accepted;
    out.grid_exchange = energy - accepted;
  } else {
    double eff = storage.policy.discharge_efficiency;
    Joules available = storage.charge * eff;
    Joules supplied = std::clamp(std::min(-energy, storage.max_discharge_rate * dt_s), 0.0, available);
    out.storage.charge = std::max(0.0, storage.charge - supplied / eff);
    out.storage_delta = -supplied;
    out.grid_exchange = energy + supplied;
  }
  return out;
}

/// Settlement when the microgrid has no storage: everything goes to the grid.
inline Settlement settle(const std::optional<StorageState>& storage, Watts delta_p, DurationMs dt) {
  if (storage) return settle(*storage, delta_p, dt);
  if (dt <= 0) throw Error(ErrorKind::BadInterval, "dt must be positive");
  return Settlement{StorageState{}, 0.0, delta_p * seconds(dt)};
}

class Engine {
 public:
  explicit Engine(std::shared_ptr<Clock> clock, DurationMs dt = 1000)
      : clock_(std::move(clock)), dt_(dt) {
    if (dt_ <= 0) throw Error(ErrorKind::BadInterval, "dt must be positive");
  }

  void add_actor(std::shared_ptr<Actor> actor) {
    for (const auto& a : actors_) {
      if (a->id() == actor->id()) throw Error(ErrorKind::InvalidInput, "duplicate actor " + a->id());
    }
    actors_.push_back(std::move(actor));
  }

  void add_controller(std::shared_ptr<Controller> controller) {
    controllers_.push_back(std::move(controller));
  }

  void set_storage(StorageState storage) {
    storage.validate();
    storage_ = storage;
  }

  DurationMs dt() const { return dt_; }
  const std::optional<StorageState>& storage() const { return storage_; }
  const std::vector<MicrogridTick>& monitor() const { return monitor_; }
  const std::vector<std::shared_ptr<Actor>>& actors() const { return actors_; }

  /// One step at `time` (defaults to the clock's current time).
  MicrogridTick step(std::optional<TimestampMs> time = std::nullopt) {
    const std::size_t index = monitor_.size();
    MicrogridTick tick;
    tick.t = index;
    tick.time = time.value_or(clock_->now());
    tick.e_last = last_energy_;

    std::map<std::string, ActorInfo> infos;
    for (const auto& actor : actors_) {
      ActorSample sample;
      try {
        sample = actor->step(tick.time);
      } catch (const std::exception& e) {
        throw StepFailure(index, "actor " + actor->id() + ": " + e.what());
      }
      if (!std::isfinite(sample.power)) {
        throw StepFailure(index, "actor " + actor->id() + " reported a non-finite power");
      }
      tick.actor_powers[actor->id()] = sample.power;
      infos[actor->id()] = std::move(sample.info);
    }
    tick.delta_p = aggregate(tick.actor_powers);
    tick.storage_charge = storage_ ? storage_->charge : 0.0;

    ControllerView view{tick, infos, storage_};
    for (const auto& controller : controllers_) {
      try {
        controller->step(view);
      } catch (const std::exception& e) {
        throw StepFailure(index, std::string("controller: ") + e.what());
      }
    }

    Settlement s = settle(storage_, tick.delta_p, dt_);
    if (storage_) storage_ = s.storage;
    tick.storage_delta = s.storage_delta;
    tick.grid_exchange = s.grid_exchange;
    tick.storage_charge = storage_ ? storage_->charge : 0.0;
    last_energy_ = s.storage_delta + s.grid_exchange;

    monitor_.push_back(tick);
    return tick;
  }

  /// duration / dt steps, advancing the clock by dt after each, then the
  /// controllers' finalize hooks.
  const std::vector<MicrogridTick>& run(DurationMs duration) {
    if (duration <= 0 || duration % dt_ != 0) {
      throw Error(ErrorKind::BadInterval, "duration must be a positive multiple of dt");
    }
    const TimestampMs start = clock_->now();
    const std::int64_t steps = duration / dt_;
    for (std::int64_t k = 0; k < steps; ++k) {
      step(start + k * dt_);
      clock_->wait_until(start + (k + 1) * dt_);
    }
    finalize(start + steps * dt_);
    return monitor_;
  }

  void finalize(TimestampMs time) {
    for (const auto& controller : controllers_) controller->finalize(time);
  }

  std::string monitor_csv() const { return to_csv(monitor_); }

  static std::string to_csv(const std::vector<MicrogridTick>& ticks) {
    std::vector<std::string> header{"t",         "time_ms",          "delta_p_w",
                                    "e_last_j",  "storage_charge_j", "storage_delta_j",
                                    "grid_exchange_j"};
    std::vector<std::string> ids;
    if (!ticks.empty()) {
      for (const auto& [id, p] : ticks.front().actor_powers) ids.push_back(id);
    }
    for (const auto& id : ids) header.push_back("actor." + id + "_w");
    std::string out = csv_row(header);
    for (const auto& tick : ticks) {
      std::vector<std::string> row{std::to_string(tick.t),
                                   std::to_string(tick.time),
                                   format_double(tick.delta_p),
                                   format_double(tick.e_last),
                                   format_double(tick.storage_charge),
                                   format_double(tick.storage_delta),
                                   format_double(tick.grid_exchange)};
      for (const auto& id : ids) row.push_back(format_double(tick.actor_powers.at(id)));
      out += csv_row(row);
    }
    return out;
  }

 private:
  std::shared_ptr<Clock> clock_;
  DurationMs dt_;
  std::vector<std::shared_ptr<Actor>> actors_;
  std::vector<std::shared_ptr<Controller>> controllers_;
  std::optional<StorageState> storage_;
  std::vector<MicrogridTick> monitor_;
  Joules last_energy_ = 0.0;
};

/// Actor with a fixed power.
class StaticActor : public Actor {
 public:
  StaticActor(std::string id, Watts power) : id_(std::move(id)), power_(power) {}
  const std::string& id() const override { return id_; }
  ActorSample step(TimestampMs) override { return {power_, {}}; }

 private:
  std::string id_;
  Watts power_;
};

/// Piecewise-constant power trace: each point holds until the next one.
/// Before the first point the actor reports 0 W.
class TraceActor : public Actor {
 public:
  TraceActor(std::string id, std::vector<std::pair<TimestampMs, Watts>> points)
      : id_(std::move(id)), points_(std::move(points)) {
    if (!std::is_sorted(points_.begin(), points_.end(),
                        [](const auto& a, const auto& b) { return a.first < b.first; })) {
      throw Error(ErrorKind::InvalidInput, "trace points must be time-ordered");
    }
  }
  const std::string& id() const override { return id_; }
  ActorSample step(TimestampMs now) override {
    auto it = std::upper_bound(points_.begin(), points_.end(), now,
                               [](TimestampMs t, const auto& p) { return t < p.first; });
    if (it == points_.begin()) return {0.0, {}};
    return {std::prev(it)->second, {}};
  }

 private:
  std::string id_;
  std::vector<std::pair<TimestampMs, Watts>> points_;
};

}  // namespace gridcalib::microgrid
