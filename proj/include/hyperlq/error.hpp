#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hyperlq {

enum class ErrorCode {
  SingularMatrix,
  NoConvergence,
  NotPositiveDefinite,
  UnstableMatrix,
  SingularK,
  NonPositiveSpeed,
  DimensionMismatch,
  OutOfDomain,
  SingularQ,
  PoleHit,
  OverflowGuard,
  InvalidConfig,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::UnstableMatrix: return "UnstableMatrix";
    case ErrorCode::SingularK: return "SingularK";
    case ErrorCode::NonPositiveSpeed: return "NonPositiveSpeed";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::SingularQ: return "SingularQ";
    case ErrorCode::PoleHit: return "PoleHit";
    case ErrorCode::OverflowGuard: return "OverflowGuard";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Every failure in the library is reported through this type; `code()`
/// identifies the failure class and `what()` carries the code name followed
/// by a short detail message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hyperlq
