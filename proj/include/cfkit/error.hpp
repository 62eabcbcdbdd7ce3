#pragma once

#include <stdexcept>
#include <string>

namespace cfkit {

/// Input that violates a documented precondition or file format.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A CoNLL-U (or other line-oriented) input error, tagged with its line.
class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Lookup of an unknown session, sentence, or candidate.
class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cfkit
