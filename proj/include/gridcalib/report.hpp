#pragma once

// Reading a run's artifact directory back: the per-process energy table with
// an "other" bucket, regression verdicts, and re-fitting the regression from
// the stored series.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridcalib/csv.hpp"
#include "gridcalib/error.hpp"
#include "gridcalib/scenario.hpp"
#include "gridcalib/timeseries.hpp"
#include "gridcalib/validation.hpp"

namespace gridcalib::report {

struct ShareLine {
  std::string name;
  double wh = 0.0;
  double pct = 0.0;
};

/// Processes below `floor_wh` are folded into a trailing "other" line.
/// Percentages are of the total over all processes.
inline std::vector<ShareLine> share_table(const std::vector<std::pair<std::string, double>>& energy,
                                          double floor_wh = 1.0) {
  double total = 0.0;
  for (const auto& [name, wh] : energy) total += wh;
  std::vector<ShareLine> out;
  double other = 0.0;
  bool any_other = false;
  for (const auto& [name, wh] : energy) {
    if (wh < floor_wh) {
      other += wh;
      any_other = true;
      continue;
    }
    out.push_back({name, wh, total > 0.0 ? 100.0 * wh / total : 0.0});
  }
  if (any_other) out.push_back({"other", other, total > 0.0 ? 100.0 * other / total : 0.0});
  return out;
}

inline std::vector<scenario::EnergyRow> read_energy_summary(const std::filesystem::path& dir) {
  auto table = parse_csv(read_file(dir / scenario::files::energy_summary));
  if (table.empty() || table[0].size() != 7 || table[0][0] != "process") {
    throw Error(ErrorKind::ParseError, "unexpected energy summary header");
  }
  std::vector<scenario::EnergyRow> rows;
  for (std::size_t i = 1; i < table.size(); ++i) {
    const auto& r = table[i];
    if (r.size() != 7) throw Error(ErrorKind::ParseError, "energy summary row " + std::to_string(i));
    rows.push_back({r[0], r[1], parse_double(r[2]), parse_double(r[3]), parse_double(r[4]),
                    parse_double(r[5]), parse_double(r[6])});
  }
  return rows;
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

inline std::optional<validation::RegressionReport> read_regression(const std::filesystem::path& dir) {
  auto path = dir / scenario::files::regression;
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    return validation::report_from_json(read_json(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

inline std::string render(const std::filesystem::path& dir, double floor_wh = 1.0,
                          validation::IdealTolerance tol = {}) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorKind::MissingArtifact, dir.string() + " is not a directory");
  }
  auto rows = read_energy_summary(dir);
  std::vector<std::pair<std::string, double>> energy;
  double total = 0.0;
  for (const auto& r : rows) {
    energy.emplace_back(r.process, r.dynamic_wh);
    total += r.dynamic_wh;
  }

  std::string out = "calibrated dynamic energy per process\n";
  char line[256];
  std::snprintf(line, sizeof(line), "  %-28s %12s %8s\n", "process", "Wh", "share");
  out += line;
  for (const auto& s : share_table(energy, floor_wh)) {
    std::snprintf(line, sizeof(line), "  %-28s %12s %7s%%\n", s.name.c_str(), fixed(s.wh, 3).c_str(),
                  fixed(s.pct, 1).c_str());
    out += line;
  }
  std::snprintf(line, sizeof(line), "  %-28s %12s\n", "total", fixed(total, 3).c_str());
  out += line;

  out += "\nregression (measured vs approximated node power)\n";
  auto reg = read_regression(dir);
  if (!reg) {
    std::string reason = "not available";
    auto manifest = dir / scenario::files::manifest;
    if (std::filesystem::exists(manifest)) {
      auto m = read_json(manifest);
      if (m.contains("regression") && m["regression"].is_string()) {
        reason += " (" + m["regression"].get<std::string>() + ")";
      }
    }
    return out + "  " + reason + "\n";
  }
  auto cmp = validation::compare_to_ideal(*reg, tol);
  auto verdict = [](bool ok) { return ok ? "ok" : "out of tolerance"; };
  out += "  n                  " + std::to_string(reg->n) + "\n";
  out += "  slope              " + fixed(reg->slope, 4) + "  (ideal 1, deviation " +
         fixed(cmp.slope_deviation, 4) + ", " + verdict(cmp.slope_ok) + ")\n";
  out += "  intercept          " + fixed(reg->intercept, 3) + " W  (ideal 0, " +
         verdict(cmp.intercept_ok) + ")\n";
  out += "  r2                 " + fixed(reg->r2, 4) + "  (min " + fixed(tol.r2_min, 2) + ", " +
         verdict(cmp.r2_ok) + ")\n";
  out += "  residual median    " + fixed(reg->residual_median, 3) + " W\n";
  out += "  residual max       " + fixed(reg->residual_max, 3) + " W\n";
  return out;
}

struct Revalidation {
  validation::RegressionReport refit;
  std::optional<validation::RegressionReport> stored;
  DurationMs align_tolerance = 0;
  /// Stored report reproduced to 1e-9 relative.
  bool consistent = false;
};

inline bool close(double a, double b, double rel = 1e-9) {
  return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

/// Re-runs pairing and the fit on the stored series CSVs. The alignment
/// tolerance comes from the manifest unless given.
inline Revalidation revalidate(const std::filesystem::path& dir,
                               std::optional<DurationMs> align_tolerance = std::nullopt) {
  Revalidation out;
  if (align_tolerance) {
    out.align_tolerance = *align_tolerance;
  } else {
    auto m = read_json(dir / scenario::files::manifest);
    out.align_tolerance = m.at("align_tolerance_ms").get<DurationMs>();
  }
  auto approx = timeseries::series_from_csv(read_file(dir / scenario::files::approx_series),
                                            scenario::kApproxNodeMetric, {},
                                            timeseries::MetricKind::gauge);
  auto meter = timeseries::series_from_csv(read_file(dir / scenario::files::meter_series),
                                           "socket_meter_power_w", {}, timeseries::MetricKind::gauge);
  out.refit = validation::fit_ols(validation::pair(approx, meter, out.align_tolerance));
  out.stored = read_regression(dir);
  if (out.stored) {
    const auto& a = out.refit;
    const auto& b = *out.stored;
    out.consistent = a.n == b.n && close(a.slope, b.slope) && close(a.intercept, b.intercept) &&
                     close(a.r2, b.r2) && close(a.residual_median, b.residual_median) &&
                     close(a.residual_max, b.residual_max);
  }
  return out;
}

}  // namespace gridcalib::report
