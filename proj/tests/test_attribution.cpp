#include <gtest/gtest.h>

#include "gridcalib/attribution.hpp"
#include "support.hpp"

using namespace gridcalib;
using namespace gridcalib::attribution;

namespace {

ErrorKind failure_kind(auto f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::IoError;
}

std::vector<ProcessUtilization> random_procs(testing_support::Gen& g, int n) {
  std::vector<ProcessUtilization> procs;
  for (int i = 0; i < n; ++i) {
    procs.push_back({"p" + std::to_string(i), testing_support::uniform(g, 0.0, 1e6),
                     testing_support::uniform(g, 0.0, 16.0)});
  }
  return procs;
}

double sum(const Shares& s) {
  double t = 0.0;
  for (const auto& [_, w] : s) t += w;
  return t;
}

}  // namespace

TEST(SplitDynamic, ProportionalToUtil) {
  std::vector<ProcessUtilization> procs{{"a", 1.0, 0.0}, {"b", 3.0, 0.0}};
  auto s = split_dynamic({100.0, 0.0, 0.0}, procs);
  EXPECT_EQ(s.at("a"), 25.0);
  EXPECT_EQ(s.at("b"), 75.0);
}

TEST(SplitDynamic, UtilSumsToNodeDynamic) {
  std::vector<ProcessUtilization> procs{{"a", 10.0, 0.0}, {"b", 30.0, 0.0}, {"c", 60.0, 0.0}};
  auto s = split_dynamic({100.0, 0.0, 0.0}, procs);
  EXPECT_DOUBLE_EQ(s.at("a"), 10.0);
  EXPECT_DOUBLE_EQ(s.at("b"), 30.0);
  EXPECT_DOUBLE_EQ(s.at("c"), 60.0);
}

TEST(SplitDynamic, AllZeroUtilSplitsEvenly) {
  std::vector<ProcessUtilization> procs{{"a", 0.0, 0.0}, {"b", 0.0, 0.0}, {"c", 0.0, 0.0}, {"d", 0.0, 0.0}};
  auto s = split_dynamic({100.0, 0.0, 0.0}, procs);
  for (const auto& [_, w] : s) EXPECT_EQ(w, 25.0);
}

TEST(SplitDynamic, UnderflowingUtilSplitsEvenly) {
  std::vector<ProcessUtilization> procs{{"a", 1e-20, 0.0}, {"b", 0.0, 0.0}};
  auto s = split_dynamic({100.0, 0.0, 0.0}, procs);
  EXPECT_EQ(s.at("a"), 50.0);
  EXPECT_EQ(s.at("b"), 50.0);
}

TEST(SplitDynamic, Errors) {
  std::vector<ProcessUtilization> none;
  EXPECT_EQ(failure_kind([&] { split_dynamic({1.0, 0.0, 0.0}, none); }), ErrorKind::EmptyProcessSet);
  std::vector<ProcessUtilization> neg{{"a", -1.0, 0.0}};
  EXPECT_EQ(failure_kind([&] { split_dynamic({1.0, 0.0, 0.0}, neg); }), ErrorKind::InvalidInput);
  std::vector<ProcessUtilization> nan{{"a", std::nan(""), 0.0}};
  EXPECT_EQ(failure_kind([&] { split_dynamic({1.0, 0.0, 0.0}, nan); }), ErrorKind::InvalidInput);
  std::vector<ProcessUtilization> dup{{"a", 1.0, 0.0}, {"a", 2.0, 0.0}};
  EXPECT_EQ(failure_kind([&] { split_dynamic({1.0, 0.0, 0.0}, dup); }), ErrorKind::InvalidInput);
  std::vector<ProcessUtilization> ok{{"a", 1.0, 0.0}};
  EXPECT_EQ(failure_kind([&] { split_dynamic({-1.0, 0.0, 0.0}, ok); }), ErrorKind::InvalidInput);
}

TEST(SplitIdle, Even) {
  EXPECT_EQ(split_idle_even({0.0, 90.0, 0.0}, 3), 30.0);
  EXPECT_EQ(failure_kind([] { split_idle_even({0.0, 90.0, 0.0}, 0); }), ErrorKind::ZeroProcesses);
}

TEST(SplitIdle, Requested) {
  std::vector<ProcessUtilization> procs{{"a", 0.0, 2.0}, {"b", 0.0, 6.0}};
  auto s = split_idle_requested({0.0, 80.0, 16.0}, procs);
  EXPECT_EQ(s.at("a"), 10.0);
  EXPECT_EQ(s.at("b"), 30.0);
  EXPECT_EQ(failure_kind([&] { split_idle_requested({0.0, 80.0, 0.0}, procs); }),
            ErrorKind::ZeroTotalRequest);
}

TEST(SplitDynamicMulti, SumsPerClass) {
  std::vector<ResourceClass> classes{
      {{60.0, 0.0, 0.0}, {{"a", 1.0, 0.0}, {"b", 2.0, 0.0}}},
      {{40.0, 0.0, 0.0}, {{"a", 1.0, 0.0}, {"c", 1.0, 0.0}}},
  };
  auto s = split_dynamic_multi(classes);
  EXPECT_DOUBLE_EQ(s.at("a"), 40.0);
  EXPECT_DOUBLE_EQ(s.at("b"), 40.0);
  EXPECT_DOUBLE_EQ(s.at("c"), 20.0);
}

TEST(AttributionProperty, PartitionNonNegativeScaleInvariant) {
  testing_support::Gen g(23);
  for (int c = 0; c < 500; ++c) {
    int n = testing_support::uniform_int(g, 1, 12);
    auto procs = random_procs(g, n);
    NodePower node{testing_support::uniform(g, 0.0, 500.0), testing_support::uniform(g, 0.0, 300.0), 0.0};
    auto s = split_dynamic(node, procs);
    ASSERT_EQ(s.size(), std::size_t(n));
    EXPECT_NEAR(sum(s), node.dynamic, 1e-9 * std::max(1.0, node.dynamic));
    for (const auto& [_, w] : s) EXPECT_GE(w, 0.0);

    double k = testing_support::uniform(g, 1e-3, 1e3);
    auto scaled = procs;
    for (auto& p : scaled) p.util *= k;
    auto s2 = split_dynamic(node, scaled);
    for (const auto& [id, w] : s) EXPECT_NEAR(s2.at(id), w, 1e-9 * std::max(1.0, node.dynamic));

    double idle_sum = 0.0;
    for (int i = 0; i < n; ++i) idle_sum += split_idle_even(node, std::size_t(n));
    EXPECT_NEAR(idle_sum, node.idle, 1e-9 * std::max(1.0, node.idle));

    node.total_requested = 0.0;
    for (const auto& p : procs) node.total_requested += p.requested;
    if (node.total_requested > 0.0) {
      EXPECT_NEAR(sum(split_idle_requested(node, procs)), node.idle, 1e-9 * std::max(1.0, node.idle));
    }
  }
}

TEST(AttributionProperty, MonotoneInOwnUtil) {
  testing_support::Gen g(29);
  for (int c = 0; c < 500; ++c) {
    int n = testing_support::uniform_int(g, 2, 8);
    auto procs = random_procs(g, n);
    NodePower node{testing_support::uniform(g, 1.0, 500.0), 0.0, 0.0};
    auto before = split_dynamic(node, procs);
    int i = testing_support::uniform_int(g, 0, n - 1);
    procs[i].util += testing_support::uniform(g, 0.0, 1e6);
    auto after = split_dynamic(node, procs);
    EXPECT_GE(after.at(procs[i].process_id), before.at(procs[i].process_id) - 1e-9);
  }
}
