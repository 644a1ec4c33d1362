#pragma once

// Approximated-vs-measured regression: pair the two streams, fit ordinary
// least squares, and compare the line against the ideal y = x.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridcalib/csv.hpp"
#include "gridcalib/error.hpp"
#include "gridcalib/timeseries.hpp"

namespace gridcalib::validation {

struct PairedObservation {
  Watts x = 0.0;  // approximated
  Watts y = 0.0;  // measured
  TimestampMs time = 0;
};

struct RegressionReport {
  double slope = 0.0;
  Watts intercept = 0.0;
  double r2 = 0.0;
  Watts residual_median = 0.0;
  Watts residual_max = 0.0;
  std::size_t n = 0;
};

/// Pairs every approximated sample with the nearest measured sample (earlier
/// one on ties) within `align_tolerance`; unmatched samples are dropped.
inline std::vector<PairedObservation> pair(const timeseries::Series& approx,
                                           const timeseries::Series& measured,
                                           DurationMs align_tolerance) {
  if (approx.empty() || measured.empty()) {
    throw Error(ErrorKind::NoOverlap, "cannot pair an empty series");
  }
  const auto& m = measured.samples();
  std::vector<PairedObservation> out;
  for (const auto& a : approx.samples()) {
    auto hi = std::lower_bound(m.begin(), m.end(), a.timestamp,
                               [](const timeseries::Sample& s, TimestampMs t) { return s.timestamp < t; });
    const timeseries::Sample* best = nullptr;
    DurationMs best_gap = 0;
    auto consider = [&](const timeseries::Sample& s) {
      DurationMs gap = std::abs(s.timestamp - a.timestamp);
      if (!best || gap < best_gap) {
        best = &s;
        best_gap = gap;
      }
    };
    if (hi != m.begin()) consider(*std::prev(hi));
    if (hi != m.end()) consider(*hi);
    if (best && best_gap <= align_tolerance) out.push_back({a.value, best->value, a.timestamp});
  }
  if (out.empty()) throw Error(ErrorKind::NoOverlap, "no samples within alignment tolerance");
  return out;
}

inline double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

inline double fitted(const RegressionReport& r, double x) { return r.slope * x + r.intercept; }

/// Ordinary least squares y = slope * x + intercept. R^2 = 1 - SSR/SST, or 1
/// when SST = 0. Residual statistics are absolute deviations from the line.
inline RegressionReport fit_ols(const std::vector<PairedObservation>& points) {
  if (points.size() < 2) throw Error(ErrorKind::TooFewPoints, "need at least 2 points");
  const double n = static_cast<double>(points.size());
  double mean_x = 0.0, mean_y = 0.0;
  for (const auto& p : points) {
    mean_x += p.x;
    mean_y += p.y;
  }
  mean_x /= n;
  mean_y /= n;
  double sxx = 0.0, sxy = 0.0, sst = 0.0;
  for (const auto& p : points) {
    double dx = p.x - mean_x;
    double dy = p.y - mean_y;
    sxx += dx * dx;
    sxy += dx * dy;
    sst += dy * dy;
  }
  if (sxx == 0.0) throw Error(ErrorKind::DegenerateX, "all x values are identical");

  RegressionReport r;
  r.n = points.size();
  r.slope = sxy / sxx;
  r.intercept = mean_y - r.slope * mean_x;
  double ssr = 0.0;
  std::vector<double> abs_residuals;
  abs_residuals.reserve(points.size());
  for (const auto& p : points) {
    double res = p.y - fitted(r, p.x);
    ssr += res * res;
    abs_residuals.push_back(std::abs(res));
  }
  r.r2 = sst == 0.0 ? 1.0 : 1.0 - ssr / sst;
  r.residual_max = *std::max_element(abs_residuals.begin(), abs_residuals.end());
  r.residual_median = median(std::move(abs_residuals));
  return r;
}

struct IdealTolerance {
  double slope = 0.05;
  Watts intercept = 10.0;
  double r2_min = 0.9;
};

struct IdealComparison {
  double slope_deviation = 0.0;
  Watts intercept_deviation = 0.0;
  double r2 = 0.0;
  bool slope_ok = false;
  bool intercept_ok = false;
  bool r2_ok = false;

  bool all_ok() const { return slope_ok && intercept_ok && r2_ok; }
};

inline IdealComparison compare_to_ideal(const RegressionReport& report, IdealTolerance tol = {}) {
  IdealComparison c;
  c.slope_deviation = report.slope - 1.0;
  c.intercept_deviation = report.intercept;
  c.r2 = report.r2;
  c.slope_ok = std::abs(c.slope_deviation) <= tol.slope;
  c.intercept_ok = std::abs(c.intercept_deviation) <= tol.intercept;
  c.r2_ok = report.r2 >= tol.r2_min;
  return c;
}

/// Unweighted mean over scenarios; n is the total point count.
inline RegressionReport mean_report(const std::vector<RegressionReport>& reports) {
  if (reports.empty()) throw Error(ErrorKind::TooFewPoints, "no reports to average");
  RegressionReport m;
  for (const auto& r : reports) {
    m.slope += r.slope;
    m.intercept += r.intercept;
    m.r2 += r.r2;
    m.residual_median += r.residual_median;
    m.residual_max += r.residual_max;
    m.n += r.n;
  }
  double k = static_cast<double>(reports.size());
  m.slope /= k;
  m.intercept /= k;
  m.r2 /= k;
  m.residual_median /= k;
  m.residual_max /= k;
  return m;
}

inline nlohmann::ordered_json to_json(const RegressionReport& r) {
  nlohmann::ordered_json j;
  j["slope"] = r.slope;
  j["intercept_w"] = r.intercept;
  j["r2"] = r.r2;
  j["residual_median_w"] = r.residual_median;
  j["residual_max_w"] = r.residual_max;
  j["n"] = r.n;
  return j;
}

inline RegressionReport report_from_json(const nlohmann::json& j) {
  RegressionReport r;
  r.slope = j.at("slope").get<double>();
  r.intercept = j.at("intercept_w").get<double>();
  r.r2 = j.at("r2").get<double>();
  r.residual_median = j.at("residual_median_w").get<double>();
  r.residual_max = j.at("residual_max_w").get<double>();
  r.n = j.at("n").get<std::size_t>();
  return r;
}

inline std::string plot_csv(const std::vector<PairedObservation>& points,
                            const RegressionReport& report) {
  std::string out = csv_row({"x_w", "y_w", "fitted_w", "residual_w"});
  for (const auto& p : points) {
    double f = fitted(report, p.x);
    out += csv_row({format_double(p.x), format_double(p.y), format_double(f), format_double(p.y - f)});
  }
  return out;
}

}  // namespace gridcalib::validation
