#pragma once

// Ratio power model: node dynamic power is split across processes by their
// share of resource utilisation; node idle power is split either evenly or by
// requested resources.

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gridcalib/error.hpp"
#include "gridcalib/units.hpp"

namespace gridcalib::attribution {

struct ProcessUtilization {
  std::string process_id;
  /// Abstract units: instructions, cache misses, SM utilisation...
  double util = 0.0;
  double requested = 0.0;
};

struct NodePower {
  Watts dynamic = 0.0;
  Watts idle = 0.0;
  double total_requested = 0.0;
};

using Shares = std::map<std::string, Watts>;

/// Sums below this fraction of the node's dynamic power are treated as zero.
constexpr double kUtilUnderflowRatio = 1e-12;

namespace detail {

inline void check_node(const NodePower& node) {
  if (!(node.dynamic >= 0.0) || !(node.idle >= 0.0) || !std::isfinite(node.dynamic) ||
      !std::isfinite(node.idle)) {
    throw Error(ErrorKind::InvalidInput, "node power must be finite and non-negative");
  }
}

inline void check_processes(std::span<const ProcessUtilization> procs) {
  if (procs.empty()) throw Error(ErrorKind::EmptyProcessSet, "no processes to attribute to");
  std::map<std::string, int> seen;
  for (const auto& p : procs) {
    if (!(p.util >= 0.0) || !(p.requested >= 0.0) || !std::isfinite(p.util) ||
        !std::isfinite(p.requested)) {
      throw Error(ErrorKind::InvalidInput,
                  p.process_id + ": utilisation and request must be finite and non-negative");
    }
    if (seen[p.process_id]++ > 0) {
      throw Error(ErrorKind::InvalidInput, "duplicate process id " + p.process_id);
    }
  }
}

}  // namespace detail

inline Shares split_dynamic(const NodePower& node, std::span<const ProcessUtilization> procs) {
  detail::check_node(node);
  detail::check_processes(procs);
  double total = 0.0;
  for (const auto& p : procs) total += p.util;

  Shares shares;
  bool even = total == 0.0 || total < kUtilUnderflowRatio * node.dynamic;
  for (const auto& p : procs) {
    shares[p.process_id] = even ? node.dynamic / static_cast<double>(procs.size())
                                : node.dynamic * p.util / total;
  }
  return shares;
}

inline Watts split_idle_even(const NodePower& node, std::size_t count) {
  detail::check_node(node);
  if (count == 0) throw Error(ErrorKind::ZeroProcesses, "cannot split idle power over 0 processes");
  return node.idle / static_cast<double>(count);
}

inline Shares split_idle_requested(const NodePower& node,
                                   std::span<const ProcessUtilization> procs) {
  detail::check_node(node);
  detail::check_processes(procs);
  if (!(node.total_requested > 0.0)) {
    throw Error(ErrorKind::ZeroTotalRequest, "node total request must be positive");
  }
  Shares shares;
  for (const auto& p : procs) shares[p.process_id] = node.idle * p.requested / node.total_requested;
  return shares;
}

/// One resource class (CPU, DRAM, GPU...) with its own node power and
/// per-process utilisation.
struct ResourceClass {
  NodePower node;
  std::vector<ProcessUtilization> procs;
};

/// Runs the dynamic split once per resource class and sums per process.
inline Shares split_dynamic_multi(std::span<const ResourceClass> classes) {
  Shares total;
  for (const auto& rc : classes) {
    for (const auto& [id, w] : split_dynamic(rc.node, rc.procs)) total[id] += w;
  }
  return total;
}

}  // namespace gridcalib::attribution
