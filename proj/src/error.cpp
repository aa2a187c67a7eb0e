#include "lbc/error.hpp"

namespace lbc {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::schema: return "schema";
    case ErrorKind::parse: return "parse";
    case ErrorKind::type: return "type";
    case ErrorKind::value: return "value";
    case ErrorKind::fit: return "fit";
    case ErrorKind::render: return "render";
    case ErrorKind::order: return "order";
    case ErrorKind::contract: return "contract";
    case ErrorKind::backend: return "backend";
    case ErrorKind::eval: return "eval";
    case ErrorKind::stat: return "stat";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

std::string Error::describe() const {
  return module_ + "/" + stage_ + ": " + what();
}

}  // namespace lbc
