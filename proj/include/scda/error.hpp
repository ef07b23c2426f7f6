#pragma once

#include <stdexcept>
#include <string>

namespace scda {

/// Dimension mismatch between operands (matrix shapes, vector lengths).
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

/// A documented precondition was violated by the caller.
class ContractViolation : public std::runtime_error {
 public:
  explicit ContractViolation(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file. Carries a 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long line = -1)
      : std::runtime_error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

/// Synthetic data generation could not satisfy its constraints.
class GeneratorError : public std::runtime_error {
 public:
  explicit GeneratorError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite value produced where the pipeline requires finite numbers.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem failure (unwritable path, missing file).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace scda
