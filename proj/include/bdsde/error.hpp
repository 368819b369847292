#ifndef BDSDE_ERROR_HPP
#define BDSDE_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace bdsde {

enum class ErrorCode {
  InvalidArgument,
  NonPositiveCoefficient,
  ZeroNoise,
  NegativeInterference,
  Overflow,
  NonPositiveCrowding,
  NonPositivePoint,
  RegimePrecondition,
  ToleranceNotMet,
  NonPositiveLambda,
  GridTooLarge,
  StepOverflow,
  UnknownFunctional,
  HorizonTooShort,
  GridMismatch,
  BracketFailure,
  ScanInconclusive,
  DepthExceeded,
  ConfigError,
};

inline constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonPositiveCoefficient: return "NonPositiveCoefficient";
    case ErrorCode::ZeroNoise: return "ZeroNoise";
    case ErrorCode::NegativeInterference: return "NegativeInterference";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::NonPositiveCrowding: return "NonPositiveCrowding";
    case ErrorCode::NonPositivePoint: return "NonPositivePoint";
    case ErrorCode::RegimePrecondition: return "RegimePrecondition";
    case ErrorCode::ToleranceNotMet: return "ToleranceNotMet";
    case ErrorCode::NonPositiveLambda: return "NonPositiveLambda";
    case ErrorCode::GridTooLarge: return "GridTooLarge";
    case ErrorCode::StepOverflow: return "StepOverflow";
    case ErrorCode::UnknownFunctional: return "UnknownFunctional";
    case ErrorCode::HorizonTooShort: return "HorizonTooShort";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::ScanInconclusive: return "ScanInconclusive";
    case ErrorCode::DepthExceeded: return "DepthExceeded";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Base exception for every failure raised by the library. The code is
/// stable and meant for programmatic dispatch; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {

inline void require(bool cond, const char* what) {
  if (!cond) throw Error(ErrorCode::InvalidArgument, what);
}

}  // namespace detail
}  // namespace bdsde

#endif  // BDSDE_ERROR_HPP
