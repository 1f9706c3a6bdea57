#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace axleval {

/// Base class for everything this library throws on bad input.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed annotation or table text. Carries the source name (file path
/// or image id) and the 1-based line the problem was found on.
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what),
        source_(std::move(source)),
        line_(line) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_ = 0;
};

/// Manifest or dataset level failure: missing file, duplicate image id,
/// unknown category, unwritable destination.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// A precondition or domain invariant was violated (degenerate box,
/// infeasible quota, unbalanced matrix, out-of-range test parameters).
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace axleval
