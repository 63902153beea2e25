#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace structpop {

/// Failure categories. The CLI maps each one to a stable exit code.
enum class ErrorKind {
  kInvalidArgument,
  kDomain,
  kConfig,
  kSubcritical,
  kNotConverged,
  kIo,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Thrown when the growth operator at lambda = 0 has spectral radius <= 1, so
/// no nontrivial stationary state exists.
class SubcriticalError : public Error {
 public:
  SubcriticalError(const std::string& what, double rho_at_zero)
      : Error(ErrorKind::kSubcritical, what), rho_at_zero_(rho_at_zero) {}

  double rho_at_zero() const noexcept { return rho_at_zero_; }

 private:
  double rho_at_zero_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace structpop
