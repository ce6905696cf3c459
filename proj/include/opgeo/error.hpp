#pragma once

#include <stdexcept>
#include <string>

namespace opgeo {

enum class ErrorKind {
  invalid_argument,
  shape_mismatch,
  precondition,
  zero_norm,
  malformed_certificate,
  parse,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::shape_mismatch: return "shape-mismatch";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::zero_norm: return "zero-norm";
    case ErrorKind::malformed_certificate: return "malformed-certificate";
    case ErrorKind::parse: return "parse";
  }
  return "unknown";
}

// All library failures are reported through this type; callers switch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace opgeo
