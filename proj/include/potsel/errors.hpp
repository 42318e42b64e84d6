#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace potsel {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class InsufficientDataError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A test could not produce a statistic (failed fit, singular information, ...).
class TestUnavailableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An interval or derived estimate needs something the fit does not provide.
class EstimateUnavailableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fitted shape outside the null table; callers fall back to the bootstrap.
class TableRangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class TableBuildError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LadderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace potsel
