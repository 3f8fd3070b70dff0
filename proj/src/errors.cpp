#include "mellin_radon/errors.hpp"

namespace mellin_radon {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Structural: return "structural";
    case ErrorKind::Pole: return "pole";
    case ErrorKind::Coverage: return "coverage";
    case ErrorKind::Resolution: return "resolution";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::DivisionInstability: return "division-instability";
    case ErrorKind::Integrability: return "integrability";
    case ErrorKind::DegenerateProduction: return "degenerate-production";
    case ErrorKind::Argument: return "argument";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace mellin_radon
