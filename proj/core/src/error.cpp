#include "structpop/error.hpp"

namespace structpop {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
      return "invalid_argument";
    case ErrorKind::kDomain:
      return "domain";
    case ErrorKind::kConfig:
      return "config";
    case ErrorKind::kSubcritical:
      return "subcritical";
    case ErrorKind::kNotConverged:
      return "not_converged";
    case ErrorKind::kIo:
      return "io";
  }
  return "unknown";
}

}  // namespace structpop
