#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sbd {

enum class ErrorKind {
  InvalidArgument,
  UnsupportedRegime,
  IndexOutOfRange,
  NonFinite,
  NegativeCount,
  StallError,
  CFLViolation,
  NegativeDensity,
  RegimeExit,
  DivergentNorm,
  InsufficientBurnIn,
  InvariantViolation,
  ConfigError,
  IOError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::UnsupportedRegime: return "UnsupportedRegime";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::NegativeCount: return "NegativeCount";
    case ErrorKind::StallError: return "StallError";
    case ErrorKind::CFLViolation: return "CFLViolation";
    case ErrorKind::NegativeDensity: return "NegativeDensity";
    case ErrorKind::RegimeExit: return "RegimeExit";
    case ErrorKind::DivergentNorm: return "DivergentNorm";
    case ErrorKind::InsufficientBurnIn: return "InsufficientBurnIn";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IOError: return "IOError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace sbd
