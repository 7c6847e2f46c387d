#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace innosurv {

// Base for every error raised by the library. The CLI maps the concrete
// subclasses onto exit codes: data problems exit 2, numerical failures 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (CSV rows, schema lines, config files, model files).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Input that parses but violates a precondition of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures. The message always carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

// Non-convergence, divergence, singular systems.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Monotone likelihood: the estimate for `column` runs off to infinity.
class SeparationError : public NumericalError {
 public:
  SeparationError(std::string column, const std::string& what)
      : NumericalError(what), column_(std::move(column)) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

// Linearly dependent design columns.
class SingularError : public NumericalError {
 public:
  SingularError(std::vector<std::string> columns, const std::string& what)
      : NumericalError(what), columns_(std::move(columns)) {}
  const std::vector<std::string>& columns() const noexcept { return columns_; }

 private:
  std::vector<std::string> columns_;
};

// Collected non-fatal diagnostics (unseen categorical levels, variance
// floors, emptied datasets). Operations append; callers decide what to show.
using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, std::string message) {
  if (sink != nullptr) sink->push_back(std::move(message));
}

}  // namespace innosurv
