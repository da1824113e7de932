#include "latentforge/errors.hpp"

namespace latentforge {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::dimension: return "DimensionError";
    case ErrorKind::input: return "InputError";
    case ErrorKind::invariant: return "InvariantError";
    case ErrorKind::training: return "TrainingError";
    case ErrorKind::config: return "ConfigError";
    case ErrorKind::backend: return "BackendError";
    case ErrorKind::io: return "IoError";
    case ErrorKind::data: return "DataError";
    case ErrorKind::degenerate: return "DegenerateError";
    case ErrorKind::dependency: return "DependencyError";
    case ErrorKind::format: return "FormatError";
  }
  return "Error";
}

void rethrow_with_context(const Error& e, const std::string& context) {
  const std::string what = context + ": " + e.what();
  switch (e.kind()) {
    case ErrorKind::dimension: throw DimensionError(what);
    case ErrorKind::input: throw InputError(what);
    case ErrorKind::invariant: throw InvariantError(what);
    case ErrorKind::training: throw TrainingError(what);
    case ErrorKind::config: throw ConfigError(what);
    case ErrorKind::backend: throw BackendError(what);
    case ErrorKind::io: throw IoError(what);
    case ErrorKind::data: throw DataError(what);
    case ErrorKind::degenerate: throw DegenerateError(what);
    case ErrorKind::dependency: throw DependencyError(what);
    case ErrorKind::format: throw FormatError(what);
  }
  throw Error(e.kind(), what);
}

}  // namespace latentforge
