#pragma once

#include <stdexcept>
#include <string>

namespace latentforge {

enum class ErrorKind {
  dimension,
  input,
  invariant,
  training,
  config,
  backend,
  io,
  data,
  degenerate,
  dependency,
  format,
};

const char* to_string(ErrorKind kind) noexcept;

// Base of every error the toolkit raises. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define LATENTFORGE_ERROR_TYPE(Name, Kind)                                          \
  class Name : public Error {                                                      \
   public:                                                                         \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {}       \
  };

LATENTFORGE_ERROR_TYPE(DimensionError, dimension)
LATENTFORGE_ERROR_TYPE(InputError, input)
LATENTFORGE_ERROR_TYPE(InvariantError, invariant)
LATENTFORGE_ERROR_TYPE(TrainingError, training)
LATENTFORGE_ERROR_TYPE(ConfigError, config)
LATENTFORGE_ERROR_TYPE(BackendError, backend)
LATENTFORGE_ERROR_TYPE(IoError, io)
LATENTFORGE_ERROR_TYPE(DataError, data)
LATENTFORGE_ERROR_TYPE(DegenerateError, degenerate)
LATENTFORGE_ERROR_TYPE(DependencyError, dependency)
LATENTFORGE_ERROR_TYPE(FormatError, format)

#undef LATENTFORGE_ERROR_TYPE

// Re-throws `e` as the same concrete type with `context` prepended.
[[noreturn]] void rethrow_with_context(const Error& e, const std::string& context);

}  // namespace latentforge
