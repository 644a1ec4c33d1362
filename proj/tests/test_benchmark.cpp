#include <gtest/gtest.h>

#include "gridcalib/benchmark.hpp"
#include "support.hpp"

using namespace gridcalib;
using namespace gridcalib::benchmark;

TEST(BenchmarkController, TwoValueLifecycle) {
  std::vector<double> started;
  int stops = 0;
  BenchmarkController c("frontend", 60'000, {250.0, 500.0},
                        {[&](double v) { started.push_back(v); }, [&] { ++stops; }});
  EXPECT_EQ(c.step_at(0), LifecycleAction::start);
  EXPECT_TRUE(c.running());
  EXPECT_EQ(c.current_value(), 250.0);
  for (TimestampMs t = 1000; t < 60'000; t += 1000) EXPECT_EQ(c.step_at(t), LifecycleAction::none);
  EXPECT_EQ(c.step_at(60'000), LifecycleAction::stop_and_start);
  EXPECT_EQ(c.current_value(), 500.0);
  EXPECT_EQ(c.step_at(119'000), LifecycleAction::none);
  EXPECT_EQ(c.step_at(120'000), LifecycleAction::complete);
  EXPECT_TRUE(c.completed());
  EXPECT_FALSE(c.running());
  EXPECT_EQ(c.step_at(180'000), LifecycleAction::none);

  EXPECT_EQ(started, (std::vector<double>{250.0, 500.0}));
  EXPECT_EQ(stops, 2);
  const auto& ev = c.events();
  ASSERT_EQ(ev.size(), 4u);
  EXPECT_EQ(ev[0].kind, EventKind::start);
  EXPECT_EQ(ev[1].kind, EventKind::stop);
  EXPECT_EQ(ev[1].time, 60'000);
  EXPECT_EQ(ev[2].iteration, 2u);
  EXPECT_EQ(ev[3].kind, EventKind::complete);
  EXPECT_EQ(ev[3].value, 500.0);
}

TEST(BenchmarkController, FinalizeStopsOrCompletes) {
  BenchmarkController a("a", 10'000, {1.0, 2.0});
  a.step_at(0);
  a.finalize(5000);
  EXPECT_EQ(a.events().back().kind, EventKind::stop);
  EXPECT_FALSE(a.completed());

  BenchmarkController b("b", 10'000, {1.0});
  b.step_at(0);
  b.finalize(5000);
  EXPECT_EQ(b.events().back().kind, EventKind::complete);

  BenchmarkController idle("c", 10'000, {1.0});
  idle.finalize(0);
  EXPECT_TRUE(idle.events().empty());
}

TEST(BenchmarkController, Errors) {
  EXPECT_THROW(BenchmarkController("x", 0, {1.0}), Error);
  EXPECT_THROW(BenchmarkController("x", 1000, {}), Error);
}

TEST(BenchmarkProperty, EventSequenceForAnySchedule) {
  testing_support::Gen g(71);
  for (int c = 0; c < 200; ++c) {
    int n = testing_support::uniform_int(g, 1, 10);
    DurationMs dt = testing_support::uniform_int(g, 1, 10) * 100;
    DurationMs runtime = testing_support::uniform_int(g, 1, 20) * dt;
    std::vector<double> schedule;
    for (int i = 0; i < n; ++i) schedule.push_back(i + 1);
    BenchmarkController b("b", runtime, schedule);
    TimestampMs t = 0;
    while (!b.completed()) {
      b.step_at(t);
      t += dt;
    }
    const auto& ev = b.events();
    ASSERT_EQ(ev.size(), std::size_t(2 * n));
    for (int i = 0; i < n; ++i) {
      EXPECT_EQ(ev[2 * i].kind, EventKind::start);
      EXPECT_EQ(ev[2 * i].iteration, std::size_t(i + 1));
      EXPECT_EQ(ev[2 * i + 1].kind, i + 1 == n ? EventKind::complete : EventKind::stop);
      EXPECT_EQ(ev[2 * i + 1].time - ev[2 * i].time, runtime);
      EXPECT_EQ(ev[2 * i + 1].value, schedule[i]);
    }
    EXPECT_EQ(ev.back().time, TimestampMs(n) * runtime);
  }
}

TEST(BenchmarkController, DrivenByEngine) {
  auto clock = Clock::make_virtual(5000);
  microgrid::Engine engine(clock, 1000);
  auto b = std::make_shared<BenchmarkController>("b", 3000, std::vector<double>{1.0, 2.0});
  engine.add_controller(b);
  engine.run(10'000);
  const auto& ev = b->events();
  ASSERT_EQ(ev.size(), 4u);
  EXPECT_EQ(ev[0].time, 5000);
  EXPECT_EQ(ev[1].time, 8000);
  EXPECT_EQ(ev[3].time, 11'000);
  EXPECT_EQ(ev[3].kind, EventKind::complete);
}
