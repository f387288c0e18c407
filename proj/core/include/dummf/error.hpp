#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dummf {

// Base of every error thrown by the library. Callers that only care about
// "something went wrong" catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/track dimensions disagree with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed input text. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Input parses but is inconsistent (dangling references, cycles, ...).
class SemanticError : public Error {
 public:
  using Error::Error;
};

// API misuse: wrong argument counts, limits exceeded, invalid option values.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Invalid or incomplete configuration (JSON configs, mapping tables).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Scene synthesis could not satisfy its placement constraints.
class SynthesisError : public Error {
 public:
  using Error::Error;
};

// Checkpoint / tensor-table persistence failures.
class LoadError : public Error {
 public:
  using Error::Error;
};

// A loss or tensor became NaN/Inf during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace dummf
