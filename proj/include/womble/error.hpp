#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace womble {

/// Failure classes surfaced to callers; the CLI maps each to an exit code.
enum class ErrorKind { Validation, Io, Numeric };

std::string_view to_string(ErrorKind kind) noexcept;

/// Library error carrying a failure class and a short machine-readable code
/// (e.g. "constant_metric", "asymmetric_matrix").
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message)
      : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

[[noreturn]] inline void fail_validation(std::string code, const std::string& message) {
  throw Error(ErrorKind::Validation, std::move(code), message);
}

[[noreturn]] inline void fail_io(std::string code, const std::string& message) {
  throw Error(ErrorKind::Io, std::move(code), message);
}

[[noreturn]] inline void fail_numeric(std::string code, const std::string& message) {
  throw Error(ErrorKind::Numeric, std::move(code), message);
}

/// A broken internal invariant (e.g. a precision matrix that should be PD
/// failing to factor). Not a user error.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace womble
