#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace levelcg {

enum class ErrorCode {
  DegenerateCritical,
  NoRoots,
  InvalidPotential,
  UnsupportedTopology,
  OutOfRange,
  NearSaddle,
  Unstable,
  CFLViolation,
  MassLoss,
  UnboundedSupport,
  TimeGridMismatch,
  OutOfDomain,
  InvalidArgument,
  Config,
  Io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateCritical: return "DegenerateCritical";
    case ErrorCode::NoRoots: return "NoRoots";
    case ErrorCode::InvalidPotential: return "InvalidPotential";
    case ErrorCode::UnsupportedTopology: return "UnsupportedTopology";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::NearSaddle: return "NearSaddle";
    case ErrorCode::Unstable: return "Unstable";
    case ErrorCode::CFLViolation: return "CFLViolation";
    case ErrorCode::MassLoss: return "MassLoss";
    case ErrorCode::UnboundedSupport: return "UnboundedSupport";
    case ErrorCode::TimeGridMismatch: return "TimeGridMismatch";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace levelcg
