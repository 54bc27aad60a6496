#include "bagscan/error.hpp"

namespace bagscan {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidModel: return "invalid-model";
    case ErrorKind::InvalidEvidence: return "invalid-evidence";
    case ErrorKind::InconsistentEvidence: return "inconsistent-evidence";
    case ErrorKind::NotFound: return "not-found";
    case ErrorKind::ResourceLimit: return "resource-limit";
    case ErrorKind::InvalidSpec: return "invalid-spec";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Internal: return "internal";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace bagscan
