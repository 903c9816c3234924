#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qproc {

enum class ErrorKind {
  NotAProbabilityVector,
  AssumptionViolated,
  CriticalLawUnsupported,
  ConvergenceFailure,
  TruncationOverflow,
  CapTooSmall,
  DegenerateSample,
  NonpositiveCRho,
  DivisionByZero,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NotAProbabilityVector: return "NotAProbabilityVector";
    case ErrorKind::AssumptionViolated: return "AssumptionViolated";
    case ErrorKind::CriticalLawUnsupported: return "CriticalLawUnsupported";
    case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorKind::TruncationOverflow: return "TruncationOverflow";
    case ErrorKind::CapTooSmall: return "CapTooSmall";
    case ErrorKind::DegenerateSample: return "DegenerateSample";
    case ErrorKind::NonpositiveCRho: return "NonpositiveCRho";
    case ErrorKind::DivisionByZero: return "DivisionByZero";
  }
  return "Unknown";
}

/// Process exit code used by the command-line tool for each error kind.
/// 2 = invalid law or assumptions, 3 = truncation/cap, 4 = convergence.
constexpr int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NotAProbabilityVector:
    case ErrorKind::AssumptionViolated:
    case ErrorKind::CriticalLawUnsupported:
    case ErrorKind::NonpositiveCRho:
      return 2;
    case ErrorKind::TruncationOverflow:
    case ErrorKind::CapTooSmall:
      return 3;
    case ErrorKind::ConvergenceFailure:
      return 4;
    case ErrorKind::DegenerateSample:
      return 5;
    case ErrorKind::DivisionByZero:
      return 6;
  }
  return 1;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace qproc
