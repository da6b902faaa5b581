#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lovm {

enum class ErrorKind {
  Io,
  Format,
  DimensionMismatch,
  NonFinite,
  OutOfRange,
  ZeroVector,
  Degenerate,
  Duplicate,
  Missing,
  InvalidArgument,
  Transport,
  EmptyParse,
  InsufficientData,
};

std::string_view to_string(ErrorKind kind) noexcept;

// All domain failures surface as LovmError; the CLI maps them to exit code 1.
class LovmError : public std::runtime_error {
 public:
  LovmError(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw LovmError(kind, message);
}

}  // namespace lovm
