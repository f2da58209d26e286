#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace seqcov {

/// Invalid caller-supplied argument (out-of-range parameter, bad index, shape mismatch).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed dataset or model file. Carries the 1-based line of the failure (0 if unknown).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation invoked on an object that is not ready for it (e.g. untrained model).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Computation would exceed a configured resource cap.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric is undefined for the given inputs (e.g. AER with zero clean return).
class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace seqcov
