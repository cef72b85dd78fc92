#include "discom/error.hpp"

namespace discom {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Authentication: return "authentication";
    case ErrorKind::Authorization: return "authorization";
    case ErrorKind::NotFound: return "not-found";
    case ErrorKind::Conflict: return "conflict";
    case ErrorKind::Integrity: return "integrity";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Transport: return "transport";
  }
  return "unknown";
}

}  // namespace discom
