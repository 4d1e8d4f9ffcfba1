#pragma once

#include <stdexcept>
#include <string>

namespace hdmed {

enum class ErrorCategory { io, parse, data, numeric };

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::io: return "io";
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::data: return "data";
    case ErrorCategory::numeric: return "numeric";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

// Bad input: wrong shapes, non-finite values, too few rows.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(ErrorCategory::parse, what) {}
};

// Singular moment matrices, solver failures, non-convergence.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

// No point satisfies the l-infinity constraint at the requested tau.
class InfeasibleError : public NumericError {
 public:
  InfeasibleError(const std::string& what, double min_residual)
      : NumericError(what), min_residual_(min_residual) {}
  // Smallest achievable ||sigma * w - d||_inf; any tau above it is feasible.
  double min_residual() const noexcept { return min_residual_; }

 private:
  double min_residual_;
};

}  // namespace hdmed
