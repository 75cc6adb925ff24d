#include "mpath/error.hpp"

namespace mpath {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::index: return "index";
    case ErrorKind::contract: return "contract";
    case ErrorKind::parse: return "parse";
    case ErrorKind::format: return "format";
    case ErrorKind::config: return "config";
    case ErrorKind::lookup: return "lookup";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::schema: return "schema";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace mpath
