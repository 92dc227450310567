#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace s2vi {

/// Machine-readable failure category carried by every library exception.
enum class ErrorKind {
  InvalidArgument,
  NotUnit,
  NotRotation,
  GaugeViolation,
  NotSymmetric,
  NotPositiveDefinite,
  InvalidState,
  SingularMass,
  PotentialSingular,
  NoConvergence,
  StepTooLarge,
  StepRejected,
  UnknownPreset,
  ConfigError,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NotUnit: return "NotUnit";
    case ErrorKind::NotRotation: return "NotRotation";
    case ErrorKind::GaugeViolation: return "GaugeViolation";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::InvalidState: return "InvalidState";
    case ErrorKind::SingularMass: return "SingularMass";
    case ErrorKind::PotentialSingular: return "PotentialSingular";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::StepTooLarge: return "StepTooLarge";
    case ErrorKind::StepRejected: return "StepRejected";
    case ErrorKind::UnknownPreset: return "UnknownPreset";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by the Cayley solver when the iteration budget runs out.
class NoConvergenceError : public Error {
 public:
  NoConvergenceError(std::size_t iterations, double residual)
      : Error(ErrorKind::NoConvergence,
              "fixed-point iteration did not converge after " + std::to_string(iterations) +
                  " iterations (residual " + std::to_string(residual) + ")"),
        iterations_(iterations),
        residual_(residual) {}

  std::size_t iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  std::size_t iterations_;
  double residual_;
};

}  // namespace s2vi
