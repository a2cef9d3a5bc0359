#include "hallaudit/error.hpp"

namespace hallaudit {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::io: return "io";
    case ErrorKind::parse: return "parse";
    case ErrorKind::validation: return "validation";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::network: return "network";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::stage: return "stage";
    case ErrorKind::internal: return "internal";
  }
  return "internal";
}

}  // namespace hallaudit
