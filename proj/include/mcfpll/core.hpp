#pragma once

#include <numbers>
#include <stdexcept>
#include <string>

namespace mcfpll {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Length of one deployed MCF strand in km.
inline constexpr double kStrandLengthKm = 6.29;

enum class ErrorKind {
  calibration,
  actuation,
  not_calibrated,
  degenerate_fringe,
  insufficient_scan,
  parameter,
  domain,
  validation,
  simulation,
  io,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::calibration: return "calibration";
    case ErrorKind::actuation: return "actuation";
    case ErrorKind::not_calibrated: return "not-calibrated";
    case ErrorKind::degenerate_fringe: return "degenerate-fringe";
    case ErrorKind::insufficient_scan: return "insufficient-scan";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::domain: return "domain";
    case ErrorKind::validation: return "validation";
    case ErrorKind::simulation: return "simulation";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mcfpll
