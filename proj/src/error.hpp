#pragma once

#include <stdexcept>
#include <string>

namespace tbench {

enum class ErrorKind {
  kInvalidInput,  // malformed files, failed validation, bad configuration
  kIo,            // unreadable or unwritable paths
  kNumeric,       // unstable filters, non-finite values
  kAdapter,       // embedder subprocess protocol violations
  kInternal,
};

// Single exception type for the core; the C API and CLI map `kind()` onto
// status and exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace tbench
