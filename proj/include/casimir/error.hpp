#pragma once

#include <stdexcept>
#include <string>

namespace casimir {

/// Argument outside the domain of an operation (negative frequency, L <= 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A sum, quadrature or truncation did not reach its tolerance.
///
/// Carries whatever was accumulated so callers can still report a partial
/// value together with the estimate of what is missing.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double partial, double tail)
      : std::runtime_error(what), partial_(partial), tail_(tail) {}

  double partial() const noexcept { return partial_; }
  double tail_estimate() const noexcept { return tail_; }

 private:
  double partial_;
  double tail_;
};

/// Finite differences could not resolve a derivative above the noise floor.
class DifferentiationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Least-squares fit with too few or degenerate samples.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. `line()` is 1-based, 0 when not applicable.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace casimir
