#pragma once

#include <stdexcept>
#include <string>

namespace hallaudit {

enum class ErrorKind {
  invalid_argument,
  io,
  parse,
  validation,
  not_found,
  network,
  numeric,
  stage,
  internal,
};

const char* to_string(ErrorKind kind);

// Every failure the core reports to callers is an Error; the C API maps the
// kind onto its status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace hallaudit
