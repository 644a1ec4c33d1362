#include <gtest/gtest.h>

#include "gridcalib/config.hpp"

using namespace gridcalib;
using namespace gridcalib::config;

namespace {

std::string failure_path(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigFailure& e) {
    return e.path();
  }
  return "<accepted>";
}

const std::filesystem::path kConfigs = GRIDCALIB_CONFIG_DIR;

}  // namespace

TEST(Config, PresetsParse) {
  for (const char* name : {"minimal", "gpu-leakage", "cpu-offset", "regression", "rps-benchmark"}) {
    EXPECT_NO_THROW(load_config(kConfigs / (std::string(name) + ".json"))) << name;
  }
}

TEST(Config, Defaults) {
  auto c = parse_config_text(R"({"duration_ms": 5000, "seed": 3})");
  EXPECT_EQ(c.dt_ms, 1000);
  EXPECT_EQ(c.emit_interval_ms, 1000);
  EXPECT_EQ(c.idle_capture.window, 30'000);
  EXPECT_EQ(c.idle_capture.mode, calibration::IdleCaptureMode::averaged);
  EXPECT_EQ(c.align_tolerance(), c.meter.sample_interval / 2);
  EXPECT_FALSE(c.storage);
  EXPECT_EQ(c.outputs, "out");
}

TEST(Config, RpsPresetContents) {
  auto c = load_config(kConfigs / "rps-benchmark.json");
  EXPECT_EQ(c.seed, 42u);
  ASSERT_EQ(c.workloads.size(), 1u);
  EXPECT_EQ(c.workloads[0].schedule.values.size(), 8u);
  EXPECT_EQ(c.workloads[0].schedule.values.front(), 250.0);
  EXPECT_EQ(c.workloads[0].schedule.runtime, 600'000);
  EXPECT_DOUBLE_EQ(c.approximation.gain, 1.01);
  EXPECT_DOUBLE_EQ(c.approximation.bias, 5.23);
  EXPECT_TRUE(c.storage);
}

TEST(Config, UnknownFieldReportsPath) {
  EXPECT_EQ(failure_path(R"({"duration_ms": 1000, "seed": 1, "bogus": 1})"), "bogus");
  EXPECT_EQ(failure_path(R"({"duration_ms": 1000, "seed": 1, "meter": {"volts": 1}})"), "meter.volts");
  EXPECT_EQ(failure_path(
                R"({"duration_ms": 1000, "seed": 1,
                    "workloads": [{"process_id": "a", "schedule": [1]}, {"process_id": "b", "lambda": 0.1}]})"),
            "workloads[1].lambda");
  EXPECT_EQ(failure_path(R"({"duration_ms": 1000, "seed": 1, "actors": [{"id": "a", "type": "static", "power_w": 1, "x": 2}]})"),
            "actors[0].x");
}

TEST(Config, RequiredAndTyped) {
  EXPECT_EQ(failure_path(R"({"seed": 1})"), "duration_ms");
  EXPECT_EQ(failure_path(R"({"duration_ms": 1000})"), "seed");
  EXPECT_EQ(failure_path(R"({"duration_ms": 1000, "seed": -1})"), "seed");
  EXPECT_EQ(failure_path(R"({"duration_ms": "1000", "seed": 1})"), "duration_ms");
  EXPECT_EQ(failure_path(R"({"duration_ms": 1500, "seed": 1})"), "duration_ms");
  EXPECT_EQ(failure_path(R"({"duration_ms": 1000, "seed": 1, "dt_ms": 0})"), "dt_ms");
  EXPECT_EQ(failure_path("{not json"), "<root>");
  EXPECT_EQ(failure_path("[]"), "<root>");
}

TEST(Config, DomainValidationMapsToPath) {
  EXPECT_EQ(failure_path(R"({"duration_ms": 1000, "seed": 1, "meter": {"relative_error_i": 0.05}})"), "meter");
  EXPECT_EQ(failure_path(R"({"duration_ms": 1000, "seed": 1, "approximation": {"gain": 0}})"), "approximation");
  EXPECT_EQ(failure_path(R"({"duration_ms": 1000, "seed": 1, "storage": {"charge_j": 5, "capacity_j": 1}})"),
            "storage");
  EXPECT_EQ(failure_path(R"({"duration_ms": 1000, "seed": 1, "workloads": [{"process_id": "a", "schedule": "nope"}]})"),
            "workloads[0].schedule");
  EXPECT_EQ(failure_path(R"({"duration_ms": 1000, "seed": 1, "workloads": [{"process_id": "a", "namespace": "system"}]})"),
            "workloads[0].namespace");
  EXPECT_EQ(failure_path(R"({"duration_ms": 1000, "seed": 1, "workloads": [{"process_id": "a"}, {"process_id": "a"}]})"),
            "workloads[1].process_id");
  EXPECT_EQ(failure_path(R"({"duration_ms": 1000, "seed": 1, "actors": [{"id": "a", "type": "wind"}]})"),
            "actors[0].type");
  EXPECT_EQ(failure_path(R"({"duration_ms": 1000, "seed": 1, "actors": [{"id": "pv", "type": "trace", "points": [[0, 1], [0, 2]]}]})"),
            "actors[0].points[1]");
  EXPECT_EQ(failure_path(R"({"duration_ms": 1000, "seed": 1, "signals": {"window_ms": 1500}})"),
            "signals.window_ms");
}

TEST(Config, MissingFile) {
  try {
    load_config("/nonexistent/scenario.json");
    FAIL();
  } catch (const ConfigFailure& e) {
    EXPECT_EQ(e.path(), "<file>");
  }
}
