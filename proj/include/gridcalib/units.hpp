#pragma once

#include <cstdint>

namespace gridcalib {

/// Integer milliseconds, virtual or wall.
using TimestampMs = std::int64_t;
using DurationMs = std::int64_t;

using Watts = double;
using Joules = double;

constexpr double kMsPerSecond = 1000.0;
constexpr double kJoulesPerWh = 3600.0;

constexpr double seconds(DurationMs ms) { return static_cast<double>(ms) / kMsPerSecond; }

}  // namespace gridcalib
