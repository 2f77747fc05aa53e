#include "propkit/error.hpp"

namespace propkit {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::EmptySeries: return "empty series";
    case ErrorKind::DataIntegrity: return "data integrity error";
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::DegenerateType: return "degenerate event type";
    case ErrorKind::Conditioning: return "ill-conditioned system";
    case ErrorKind::Horizon: return "correlation horizon too short";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Underdetermined: return "underdetermined fit";
    case ErrorKind::NotRepresentable: return "not representable";
    case ErrorKind::Io: return "i/o error";
  }
  return "error";
}

Error::Error(ErrorKind kind, std::string module, const std::string& message)
    : std::runtime_error(module + ": " + std::string(to_string(kind)) + ": " + message),
      kind_(kind),
      module_(std::move(module)) {}

}  // namespace propkit
