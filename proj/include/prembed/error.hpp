#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace prembed {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Input violates a precondition (empty corpus, inconsistent artifacts, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input. Carries the 1-based line number when known.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A NaN or Inf showed up during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace prembed
