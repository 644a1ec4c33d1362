#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "gridcalib/csv.hpp"
#include "gridcalib/error.hpp"
#include "gridcalib/units.hpp"

namespace gridcalib::timeseries {

enum class MetricKind { counter, gauge };

constexpr std::string_view to_string(MetricKind kind) {
  return kind == MetricKind::counter ? "counter" : "gauge";
}

/// Sorted, unique keys. Two series with the same name and label set are the
/// same series.
using Labels = std::map<std::string, std::string>;

struct Sample {
  TimestampMs timestamp = 0;
  double value = 0.0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Time-ordered samples of one metric. Counters are cumulative joules and
/// never decrease; gauges are instantaneous watts.
class Series {
 public:
  Series(std::string name, Labels labels, MetricKind kind, std::size_t max_samples = 0)
      : name_(std::move(name)), labels_(std::move(labels)), kind_(kind), max_samples_(max_samples) {}

  const std::string& name() const noexcept { return name_; }
  const Labels& labels() const noexcept { return labels_; }
  MetricKind kind() const noexcept { return kind_; }
  const std::deque<Sample>& samples() const noexcept { return samples_; }
  bool empty() const noexcept { return samples_.empty(); }
  std::size_t size() const noexcept { return samples_.size(); }
  const Sample& front() const { return samples_.front(); }
  const Sample& back() const { return samples_.back(); }

  void append(Sample sample) {
    if (sample.timestamp < 0 || !std::isfinite(sample.value)) {
      throw Error(ErrorKind::InvalidSample,
                  name_ + ": timestamp must be >= 0 and value finite");
    }
    if (!samples_.empty()) {
      const Sample& last = samples_.back();
      if (sample.timestamp <= last.timestamp) {
        throw Error(ErrorKind::NonMonotonicTimestamp,
                    name_ + ": " + std::to_string(sample.timestamp) +
                        " <= last " + std::to_string(last.timestamp));
      }
      if (kind_ == MetricKind::counter && sample.value < last.value) {
        throw Error(ErrorKind::CounterRegression,
                    name_ + ": " + format_double(sample.value) + " < last " +
                        format_double(last.value));
      }
    }
    samples_.push_back(sample);
    if (max_samples_ > 0 && samples_.size() > max_samples_) samples_.pop_front();
  }

  /// Linear interpolation between the two neighbouring samples; nullopt
  /// outside [front, back].
  std::optional<double> value_at(TimestampMs t) const {
    if (samples_.empty() || t < samples_.front().timestamp || t > samples_.back().timestamp) {
      return std::nullopt;
    }
    auto hi = std::lower_bound(samples_.begin(), samples_.end(), t,
                               [](const Sample& s, TimestampMs ts) { return s.timestamp < ts; });
    if (hi->timestamp == t) return hi->value;
    auto lo = std::prev(hi);
    double span = static_cast<double>(hi->timestamp - lo->timestamp);
    double frac = static_cast<double>(t - lo->timestamp) / span;
    return lo->value + (hi->value - lo->value) * frac;
  }

 private:
  std::string name_;
  Labels labels_;
  MetricKind kind_;
  std::size_t max_samples_;
  std::deque<Sample> samples_;
};

/// Average power of a joules counter over [t1, t2].
inline Watts rate(const Series& series, TimestampMs t1, TimestampMs t2) {
  if (t2 <= t1) {
    throw Error(ErrorKind::BadInterval,
                "t2 (" + std::to_string(t2) + ") must exceed t1 (" + std::to_string(t1) + ")");
  }
  if (series.kind() != MetricKind::counter) {
    throw Error(ErrorKind::KindMismatch, series.name() + " is not a counter");
  }
  auto f1 = series.value_at(t1);
  auto f2 = series.value_at(t2);
  if (!f1 || !f2) {
    throw Error(ErrorKind::EmptyWindow, series.name() + ": no samples cover [" +
                                            std::to_string(t1) + ", " + std::to_string(t2) + "]");
  }
  return (*f2 - *f1) / seconds(t2 - t1);
}

/// Canonical window used by calibration actors.
constexpr DurationMs kDefaultRateWindowMs = 2000;

inline Watts moving_average_rate(const Series& series, DurationMs window, TimestampMs now) {
  if (window <= 0) throw Error(ErrorKind::BadInterval, "window must be positive");
  return rate(series, now - window, now);
}

struct SeriesKey {
  std::string name;
  Labels labels;

  friend auto operator<=>(const SeriesKey&, const SeriesKey&) = default;
};

struct StoreOptions {
  /// 0 keeps every sample; otherwise each series is a ring buffer of this size.
  std::size_t max_samples_per_series = 0;
};

/// In-memory set of series keyed by (name, labels). Writers take an exclusive
/// lock per append, readers a shared lock, so a reader always sees a
/// consistent prefix of every series.
class MetricStore {
 public:
  MetricStore() = default;
  explicit MetricStore(StoreOptions options) : options_(options) {}

  void append(const std::string& name, const Labels& labels, MetricKind kind, Sample sample) {
    std::unique_lock lock(mutex_);
    SeriesKey key{name, labels};
    auto it = series_.find(key);
    if (it == series_.end()) {
      Series fresh(name, labels, kind, options_.max_samples_per_series);
      fresh.append(sample);
      series_.emplace(std::move(key), std::move(fresh));
    } else {
      if (it->second.kind() != kind) {
        throw Error(ErrorKind::KindMismatch,
                    name + " already stored as " + std::string(to_string(it->second.kind())));
      }
      it->second.append(sample);
    }
    latest_ = std::max(latest_, sample.timestamp);
  }

  std::optional<Series> find(const std::string& name, const Labels& labels) const {
    std::shared_lock lock(mutex_);
    auto it = series_.find(SeriesKey{name, labels});
    if (it == series_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<Sample> latest(const std::string& name, const Labels& labels) const {
    std::shared_lock lock(mutex_);
    auto it = series_.find(SeriesKey{name, labels});
    if (it == series_.end() || it->second.empty()) return std::nullopt;
    return it->second.back();
  }

  bool has_metric(const std::string& name) const {
    std::shared_lock lock(mutex_);
    auto it = series_.lower_bound(SeriesKey{name, {}});
    return it != series_.end() && it->first.name == name;
  }

  /// Visits every series named `name` whose labels contain all `filters`,
  /// under one shared lock.
  template <typename Visitor>
  void for_each_matching(const std::string& name, const Labels& filters, Visitor&& visit) const {
    std::shared_lock lock(mutex_);
    for (auto it = series_.lower_bound(SeriesKey{name, {}});
         it != series_.end() && it->first.name == name; ++it) {
      bool match = std::all_of(filters.begin(), filters.end(), [&](const auto& kv) {
        auto found = it->second.labels().find(kv.first);
        return found != it->second.labels().end() && found->second == kv.second;
      });
      if (match) visit(it->second);
    }
  }

  std::vector<Series> snapshot() const {
    std::shared_lock lock(mutex_);
    std::vector<Series> out;
    out.reserve(series_.size());
    for (const auto& [key, series] : series_) out.push_back(series);
    return out;
  }

  std::size_t series_count() const {
    std::shared_lock lock(mutex_);
    return series_.size();
  }

  /// Latest timestamp appended to any series (0 when empty).
  TimestampMs latest_timestamp() const {
    std::shared_lock lock(mutex_);
    return latest_;
  }

 private:
  StoreOptions options_{};
  mutable std::shared_mutex mutex_;
  std::map<SeriesKey, Series> series_;
  TimestampMs latest_ = 0;
};

inline std::string series_to_csv(const Series& series) {
  std::string out = csv_row({"timestamp_ms", "value"});
  for (const auto& s : series.samples()) {
    out += csv_row({std::to_string(s.timestamp), format_double(s.value)});
  }
  return out;
}

/// Inverse of series_to_csv; samples are re-validated on load.
inline Series series_from_csv(std::string_view text, std::string name, Labels labels,
                              MetricKind kind) {
  auto rows = parse_csv(text);
  if (rows.empty() || rows[0] != std::vector<std::string>{"timestamp_ms", "value"}) {
    throw Error(ErrorKind::ParseError, "expected header timestamp_ms,value");
  }
  Series series(std::move(name), std::move(labels), kind);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 2) {
      throw Error(ErrorKind::ParseError, "row " + std::to_string(i) + " must have 2 fields");
    }
    series.append(Sample{parse_int(rows[i][0]), parse_double(rows[i][1])});
  }
  return series;
}

}  // namespace gridcalib::timeseries
