// Acceptance gate: one PASS/FAIL line per criterion, each under its runtime
// bound. Exits 1 if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gridcalib/gridcalib.hpp"

using namespace gridcalib;

namespace {

const std::filesystem::path kConfigs = GRIDCALIB_CONFIG_DIR;

using Gen = std::mt19937_64;

double uni(Gen& g, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(g); }
int uni_int(Gen& g, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(g); }

bool rel_close(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-300});
}

/// Collects failed checks; the criterion passes when none failed.
struct Check {
  std::vector<std::string> failures;
  std::ostringstream detail;

  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
    if (!ok && failures.size() == 5) failures.push_back("...");
  }
};

config::ScenarioConfig preset(const std::string& name) {
  return config::load_config(kConfigs / (name + ".json"));
}

double sum_energy(const scenario::RunResult& r, double scenario::EnergyRow::*field) {
  double s = 0.0;
  for (const auto& e : r.energy) s += e.*field;
  return s;
}

// 1. Calibration algebra.
void c1(Check& c) {
  c.expect(calibration::dynamic_factor(30.0, 100.0, 20.0).a == 0.375, "A(30,100,20) != 0.375");
  Gen g(1);
  double worst = 0.0;
  for (int i = 0; i < 10'000; ++i) {
    double s = uni(g, 0.0, 100.0);
    double work = uni(g, 1e-3, 500.0);
    double n = s + work;
    double p = uni(g, 0.0, work);
    double simplified = calibration::dynamic_factor(p, n, s).a;
    double expanded = (p + p / (p + n - (p + s)) * s) / n;
    double rel = std::abs(simplified - expanded) / std::max(std::abs(expanded), 1e-300);
    if (expanded == 0.0 && simplified == 0.0) rel = 0.0;
    worst = std::max(worst, rel);
  }
  c.expect(worst <= 1e-12, "simplified vs expanded rel " + std::to_string(worst));
  c.detail << "max rel diff " << worst;
}

// 2. Conservation over random namespace partitions.
void c2(Check& c) {
  Gen g(2);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    int procs = uni_int(g, 1, 20);
    int groups = uni_int(g, 1, procs);
    std::vector<double> ns_p(groups, 0.0);
    double total = 0.0;
    for (int k = 0; k < procs; ++k) {
      double p = uni(g, 0.0, 80.0);
      ns_p[k % groups] += p;
      total += p;
    }
    double s = uni(g, 0.0, 40.0);
    double m_idle = uni(g, 100.0, 300.0);
    double m = m_idle + uni(g, 1.0, 600.0);
    double sum = 0.0;
    for (double p : ns_p) sum += calibration::namespace_power(p, total + s, s, m, m_idle);
    worst = std::max(worst, std::abs(sum - (m - m_idle)) / (m - m_idle));
  }
  c.expect(worst <= 1e-9, "conservation rel " + std::to_string(worst));
  c.detail << "max rel error " << worst;
}

// 3. Leakage recovery on the GPU preset.
void c3(Check& c) {
  auto cfg = preset("gpu-leakage");
  c.expect(std::abs(cfg.workloads.at(0).spec.leakage_lambda - 1.0 / 3.0) < 1e-12, "lambda != 1/3");
  c.expect(cfg.meter.combined_bound() == 0.0, "meter not perfect");
  auto r = scenario::run(cfg);
  double cal = sum_energy(r, &scenario::EnergyRow::dynamic_wh);
  double raw = sum_energy(r, &scenario::EnergyRow::raw_dynamic_wh);
  double truth = sum_energy(r, &scenario::EnergyRow::true_dynamic_wh);
  double ratio = cal / raw;
  double offset = (cal - raw) / cal;
  c.expect(std::abs(ratio - 1.5) <= 0.015, "calibrated/raw " + std::to_string(ratio));
  c.expect(std::abs(offset - 1.0 / 3.0) <= 0.01, "offset fraction " + std::to_string(offset));
  double worst = 0.0;
  for (std::size_t i = 0; i < r.process_records.size(); ++i) {
    for (const auto& [pid, rec] : r.process_records[i]) {
      worst = std::max(worst, std::abs(rec.dynamic - rec.true_dynamic));
    }
  }
  // Perfect meter: no meter noise to allow for beyond rounding.
  c.expect(worst <= 1e-6, "max |calibrated - true| " + std::to_string(worst) + " W");
  c.expect(rel_close(cal, truth, 1e-6), "calibrated energy != true energy");
  c.detail << "cal/raw " << ratio << ", offset " << offset << ", max |cal-true| " << worst << " W";
}

// 4. CPU offset.
void c4(Check& c) {
  auto cfg = preset("cpu-offset");
  c.expect(cfg.approximation.gain == 1.035, "gain != 1.035");
  for (const auto& w : cfg.workloads) c.expect(w.spec.leakage_lambda == 0.0, "lambda != 0");
  auto r = scenario::run(cfg);
  double cal = sum_energy(r, &scenario::EnergyRow::dynamic_wh);
  double raw = sum_energy(r, &scenario::EnergyRow::raw_dynamic_wh);
  double excess = cal / raw - 1.0;
  c.expect(std::abs(excess - 0.035) <= 0.003, "excess " + std::to_string(excess));
  c.detail << "calibrated exceeds raw by " << 100.0 * excess << "%";
}

// 5. Regression recovery.
void c5(Check& c) {
  auto generate = [](double sigma, std::uint64_t seed, int n) {
    emulation::ApproximationModel model{1.01, 5.23, sigma, emulation::IdleSplit::even, 1.0};
    auto rng = emulation::make_rng(seed, 2);
    Gen g(seed);
    std::vector<validation::PairedObservation> pts;
    for (int i = 0; i < n; ++i) {
      emulation::GroundTruth t;
      t.base_idle = 250.0;
      t.system_dynamic = 5.0;
      t.processes.push_back({"frontend", "bench", 8.0, uni(g, 0.0, 150.0), 0.0, 1.0});
      auto a = emulation::approximate(t, model, rng);
      pts.push_back({a.node_total(), t.total(), i * 1000});
    }
    return validation::fit_ols(pts);
  };
  auto noisy = generate(1.0, 5, 600);
  c.expect(noisy.n >= 500, "fewer than 500 pairs");
  c.expect(noisy.slope >= 0.99 && noisy.slope <= 1.03, "slope " + std::to_string(noisy.slope));
  c.expect(noisy.intercept >= 4.23 && noisy.intercept <= 6.23, "intercept " + std::to_string(noisy.intercept));
  c.expect(noisy.r2 >= 0.9, "r2 " + std::to_string(noisy.r2));
  auto exact = generate(0.0, 6, 600);
  c.expect(std::abs(exact.slope - 1.01) <= 1e-9, "exact slope");
  c.expect(std::abs(exact.intercept - 5.23) <= 1e-9, "exact intercept");
  c.expect(std::abs(exact.r2 - 1.0) <= 1e-12, "exact r2");
  // The same model through the full pipeline (store, signals, pairing).
  auto r = scenario::run(preset("regression"));
  c.expect(r.regression.has_value(), "pipeline regression missing");
  if (r.regression) {
    c.expect(r.regression->n >= 500, "pipeline pairs < 500");
    c.expect(r.regression->slope >= 0.99 && r.regression->slope <= 1.03, "pipeline slope");
    c.expect(r.regression->intercept >= 4.23 && r.regression->intercept <= 6.23, "pipeline intercept");
    c.expect(r.regression->r2 >= 0.9, "pipeline r2");
  }
  c.detail << "direct slope " << noisy.slope << " intercept " << noisy.intercept << " r2 " << noisy.r2;
  if (r.regression) {
    c.detail << "; pipeline slope " << r.regression->slope << " intercept " << r.regression->intercept
             << " r2 " << r.regression->r2;
  }
}

// 6. Ratio-model partition.
void c6(Check& c) {
  using namespace attribution;
  std::vector<ProcessUtilization> ex{{"a", 10, 0}, {"b", 30, 0}, {"c", 60, 0}};
  auto s = split_dynamic({100.0, 0.0, 0.0}, ex);
  c.expect(rel_close(s["a"], 10, 1e-15) && rel_close(s["b"], 30, 1e-15) && rel_close(s["c"], 60, 1e-15),
           "split_dynamic(100, {10,30,60})");
  Gen g(6);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    int n = uni_int(g, 1, 15);
    bool zeros = i % 5 == 0;
    std::vector<ProcessUtilization> procs;
    double req = 0.0;
    for (int k = 0; k < n; ++k) {
      procs.push_back({"p" + std::to_string(k), zeros ? 0.0 : uni(g, 0.0, 1e4), uni(g, 0.1, 8.0)});
      req += procs.back().requested;
    }
    NodePower node{uni(g, 0.1, 500.0), uni(g, 0.1, 300.0), req};
    double dyn = 0.0, idle_req = 0.0, idle_even = 0.0;
    for (const auto& [id, w] : split_dynamic(node, procs)) dyn += w;
    for (const auto& [id, w] : split_idle_requested(node, procs)) idle_req += w;
    for (int k = 0; k < n; ++k) idle_even += split_idle_even(node, std::size_t(n));
    worst = std::max({worst, std::abs(dyn - node.dynamic) / node.dynamic,
                      std::abs(idle_req - node.idle) / node.idle, std::abs(idle_even - node.idle) / node.idle});
  }
  c.expect(worst <= 1e-9, "partition rel " + std::to_string(worst));
  c.detail << "max rel error " << worst;
}

// 7. Counter/rate oracle.
void c7(Check& c) {
  timeseries::Series ex("e", {}, timeseries::MetricKind::counter);
  ex.append({10'000, 100.0});
  ex.append({12'000, 160.0});
  c.expect(timeseries::rate(ex, 10'000, 12'000) == 30.0, "rate example != 30");
  Gen g(7);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    double p = uni(g, 0.0, 1000.0);
    DurationMs step = uni_int(g, 10, 1000);
    timeseries::Series s("e", {}, timeseries::MetricKind::counter);
    for (TimestampMs t = 0; t <= 20'000; t += step) s.append({t, p * seconds(t)});
    TimestampMs now = uni_int(g, 2000, int(s.back().timestamp));
    double got = timeseries::moving_average_rate(s, timeseries::kDefaultRateWindowMs, now);
    worst = std::max(worst, std::abs(got - p) / std::max(p, 1e-300));
  }
  c.expect(worst <= 1e-6, "rate rel " + std::to_string(worst));
  c.detail << "max rel error " << worst;
}

// 8. Microgrid conservation and bounds.
void c8(Check& c) {
  microgrid::StorageState st{9000.0, 10'000.0, 1e6, 1e6, {}};
  auto ex = microgrid::settle(st, 100.0, 60'000);
  c.expect(ex.storage_delta == 1000.0 && ex.grid_exchange == 5000.0, "headroom example");
  Gen g(8);
  microgrid::StorageState s{5000.0, 20'000.0, 800.0, 600.0,
                            {microgrid::PolicyKind::battery_first, 0.92, 0.9}};
  double worst = 0.0;
  bool bounds = true;
  for (int i = 0; i < 1000; ++i) {
    double dp = uni(g, -1500.0, 1500.0);
    DurationMs dt = uni_int(g, 100, 60'000);
    auto r = microgrid::settle(s, dp, dt);
    double e = dp * seconds(dt);
    worst = std::max(worst, std::abs(r.storage_delta + r.grid_exchange - e) / std::max(std::abs(e), 1e-300));
    bounds = bounds && r.storage.charge >= 0.0 && r.storage.charge <= s.capacity;
    s = r.storage;
  }
  c.expect(worst <= 1e-9, "conservation rel " + std::to_string(worst));
  c.expect(bounds, "charge out of bounds");
  c.detail << "max rel error " << worst;
}

// 9. Meter bound.
void c9(Check& c) {
  emulation::MeterSpec spec;
  auto rng = emulation::make_rng(9, 3);
  Gen g(9);
  double worst = 0.0;
  for (int i = 0; i < 100'000; ++i) {
    double truth = uni(g, 1.0, 2000.0);
    double m = emulation::meter_sample(truth, spec, rng);
    worst = std::max(worst, std::abs(m - truth) / truth);
  }
  c.expect(worst <= 0.035 + 1e-12, "relative error " + std::to_string(worst));
  emulation::MeterSpec perfect{230.0, 0.0, 0.0, 0.0, 1000, 0};
  c.expect(emulation::meter_sample(373.25, perfect, rng) == 373.25, "error-free meter not identity");
  c.expect(emulation::active_power(230.0, 2.0, 1.0) == 460.0, "230 V x 2 A != 460 W");
  c.detail << "max relative error " << worst;
}

// 10. Determinism across all presets.
void c10(Check& c) {
  int n = 0;
  for (const char* name : {"minimal", "gpu-leakage", "cpu-offset", "regression", "rps-benchmark"}) {
    auto cfg = preset(name);
    auto a = scenario::render_artifacts(scenario::run(cfg));
    auto b = scenario::render_artifacts(scenario::run(cfg));
    c.expect(a == b, std::string(name) + " artifacts differ");
    n += int(a.size());
  }
  c.detail << n << " artifacts compared byte for byte";
}

// 11. OLS against a brute-force minimization.
void c11(Check& c) {
  auto ex = validation::fit_ols({{0, 0, 0}, {1, 2, 1}, {2, 3, 2}});
  c.expect(std::abs(ex.slope - 1.5) <= 1e-12 && std::abs(ex.intercept - 1.0 / 6.0) <= 1e-12 &&
               std::abs(ex.r2 - 27.0 / 28.0) <= 1e-12,
           "three-point example");
  Gen g(11);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    int n = uni_int(g, 3, 12);
    std::vector<validation::PairedObservation> pts;
    for (int k = 0; k < n; ++k) pts.push_back({uni(g, 0.0, 10.0), uni(g, -20.0, 20.0), k});
    // For a fixed slope the best intercept is the mean residual, so the sum of
    // squares is a convex function of the slope alone: golden-section search.
    auto best_intercept = [&](long double a) {
      long double m = 0;
      for (const auto& p : pts) m += p.y - a * p.x;
      return m / n;
    };
    auto ssr = [&](long double a) {
      long double b = best_intercept(a), s = 0;
      for (const auto& p : pts) {
        long double r = p.y - a * p.x - b;
        s += r * r;
      }
      return s;
    };
    long double lo = -1000, hi = 1000;
    const long double phi = (std::sqrt(5.0L) - 1) / 2;
    while (hi - lo > 1e-13L) {
      long double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
      if (ssr(x1) < ssr(x2)) hi = x2; else lo = x1;
    }
    long double a = (lo + hi) / 2;
    auto r = validation::fit_ols(pts);
    worst = std::max({worst, double(std::abs(r.slope - a)), double(std::abs(r.intercept - best_intercept(a)))});
  }
  c.expect(worst <= 1e-6, "brute force diff " + std::to_string(worst));
  c.detail << "max |fit - brute force| " << worst;
}

// 12. Benchmark lifecycle on the RPS preset.
void c12(Check& c) {
  auto r = scenario::run(preset("rps-benchmark"));
  std::vector<const benchmark::Event*> starts, ends;
  for (const auto& e : r.events) {
    (e.event.kind == benchmark::EventKind::start ? starts : ends).push_back(&e.event);
  }
  c.expect(starts.size() == 8, "starts " + std::to_string(starts.size()));
  c.expect(ends.size() == 8, "stops/completes " + std::to_string(ends.size()));
  for (std::size_t i = 0; i < std::min(starts.size(), ends.size()); ++i) {
    c.expect(starts[i]->value == 250.0 * double(i + 1), "value at iteration " + std::to_string(i + 1));
    c.expect(ends[i]->value == starts[i]->value, "stop value mismatch");
    c.expect(ends[i]->time - starts[i]->time == 600'000, "iteration span != 600 s");
    c.expect(ends[i]->kind == (i + 1 == ends.size() ? benchmark::EventKind::complete : benchmark::EventKind::stop),
             "event kind at iteration " + std::to_string(i + 1));
  }
  c.detail << starts.size() << " starts, " << ends.size() << " stops/completes";
}

struct Criterion {
  int id;
  const char* title;
  double budget_s;
  std::function<void(Check&)> body;
};

}  // namespace

int main() {
  std::vector<Criterion> criteria{
      {1, "calibration algebra", 1.0, c1},
      {2, "conservation over namespace partitions", 1.0, c2},
      {3, "leakage recovery (lambda = 1/3)", 10.0, c3},
      {4, "cpu offset 3.5%", 10.0, c4},
      {5, "regression recovery", 5.0, c5},
      {6, "ratio-model partition", 1.0, c6},
      {7, "counter/rate oracle", 1.0, c7},
      {8, "microgrid conservation and bounds", 1.0, c8},
      {9, "meter bound", 5.0, c9},
      {10, "determinism of preset artifacts", 20.0, c10},
      {11, "ols against brute force", 5.0, c11},
      {12, "benchmark lifecycle", 5.0, c12},
  };
  int failed = 0;
  for (auto& cr : criteria) {
    Check check;
    auto t0 = std::chrono::steady_clock::now();
    try {
      cr.body(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    double took = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    check.expect(took < cr.budget_s, "runtime over budget");
    bool ok = check.failures.empty();
    if (!ok) ++failed;
    std::printf("C%-2d %s  %-40s %7.3f s (< %g s)  %s\n", cr.id, ok ? "PASS" : "FAIL", cr.title, took,
                cr.budget_s, check.detail.str().c_str());
    for (const auto& f : check.failures) std::printf("      - %s\n", f.c_str());
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
