#ifndef DCSHAP_ERRORS_HPP
#define DCSHAP_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dcshap {

// Root of every error raised by the library. Callers that only need a
// message can catch this; the CLI and service map subclasses to exit codes
// and HTTP statuses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input errors (malformed CSV, constraint text, references).
class InputError : public Error {
 public:
  using Error::Error;
};

class ArityError : public InputError {
 public:
  using InputError::InputError;
};

class SchemaError : public InputError {
 public:
  using InputError::InputError;
};

class ShapeError : public InputError {
 public:
  using InputError::InputError;
};

class RefError : public InputError {
 public:
  using InputError::InputError;
};

class BindError : public InputError {
 public:
  using InputError::InputError;
};

class ArgError : public InputError {
 public:
  using InputError::InputError;
};

// Order comparison between a number and a text value.
class TypeError : public InputError {
 public:
  using InputError::InputError;
};

class ParseError : public InputError {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& message)
      : InputError(std::to_string(line) + ":" + std::to_string(column) + ": " +
                   message),
        line_(line),
        column_(column),
        detail_(message) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }
  const std::string& detail() const { return detail_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::string detail_;
};

// The repair algorithm crashed, timed out, or answered with garbage.
class BlackBoxError : public Error {
 public:
  using Error::Error;
};

// The repair algorithm answered, but broke the shape/schema contract.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Exact enumeration requested over more players than the configured cap.
class CapError : public Error {
 public:
  using Error::Error;
};

// The target cell is not changed by the full repair.
class UnexplainableError : public Error {
 public:
  using Error::Error;
};

}  // namespace dcshap

#endif  // DCSHAP_ERRORS_HPP
