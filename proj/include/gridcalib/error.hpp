#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gridcalib {

enum class ErrorKind {
  // timeseries
  NonMonotonicTimestamp,
  CounterRegression,
  KindMismatch,
  EmptyWindow,
  BadInterval,
  InvalidSample,
  ParseError,
  UnknownMetric,
  AmbiguousSelector,
  // attribution
  EmptyProcessSet,
  ZeroProcesses,
  ZeroTotalRequest,
  InvalidInput,
  // calibration
  ZeroNodeIdle,
  DegenerateDenominator,
  StaleSignal,
  // emulation
  UnknownKind,
  // validation
  NoOverlap,
  DegenerateX,
  TooFewPoints,
  // microgrid / cli
  StepError,
  ConfigError,
  MissingArtifact,
  BindError,
  IoError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case ErrorKind::CounterRegression: return "CounterRegression";
    case ErrorKind::KindMismatch: return "KindMismatch";
    case ErrorKind::EmptyWindow: return "EmptyWindow";
    case ErrorKind::BadInterval: return "BadInterval";
    case ErrorKind::InvalidSample: return "InvalidSample";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UnknownMetric: return "UnknownMetric";
    case ErrorKind::AmbiguousSelector: return "AmbiguousSelector";
    case ErrorKind::EmptyProcessSet: return "EmptyProcessSet";
    case ErrorKind::ZeroProcesses: return "ZeroProcesses";
    case ErrorKind::ZeroTotalRequest: return "ZeroTotalRequest";
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::ZeroNodeIdle: return "ZeroNodeIdle";
    case ErrorKind::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorKind::StaleSignal: return "StaleSignal";
    case ErrorKind::UnknownKind: return "UnknownKind";
    case ErrorKind::NoOverlap: return "NoOverlap";
    case ErrorKind::DegenerateX: return "DegenerateX";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::StepError: return "StepError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::MissingArtifact: return "MissingArtifact";
    case ErrorKind::BindError: return "BindError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a kind so callers can branch
/// without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by the microgrid engine; wraps the actor/controller failure with the
/// step index at which it happened.
class StepFailure : public Error {
 public:
  StepFailure(std::size_t step, const std::string& message)
      : Error(ErrorKind::StepError, "step " + std::to_string(step) + ": " + message), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Configuration failure with the JSON path of the offending field.
class ConfigFailure : public Error {
 public:
  ConfigFailure(std::string path, const std::string& message)
      : Error(ErrorKind::ConfigError, path + ": " + message), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace gridcalib
