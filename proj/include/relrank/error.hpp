#pragma once

#include <stdexcept>
#include <string>

namespace relrank {

/// Root of every error raised by the library. The CLI maps the two
/// families below onto its exit codes (1 for caller mistakes, 2 for
/// failures while running).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied something invalid: a bad configuration, an illegal
/// label, a malformed file.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Something went wrong while computing on valid inputs.
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

class ConfigError : public InputError {
 public:
  explicit ConfigError(const std::string& what) : InputError("configuration error: " + what) {}
};

class ValidationError : public InputError {
 public:
  explicit ValidationError(const std::string& what) : InputError("validation error: " + what) {}
};

class ShapeError : public InputError {
 public:
  explicit ShapeError(const std::string& what) : InputError("shape error: " + what) {}
};

class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : InputError("parse error at line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public InputError {
 public:
  explicit SchemaError(const std::string& what) : InputError("schema error: " + what) {}
};

class NumericalError : public RuntimeFailure {
 public:
  explicit NumericalError(const std::string& what) : RuntimeFailure("numerical error: " + what) {}
};

class PairingError : public RuntimeFailure {
 public:
  explicit PairingError(const std::string& what) : RuntimeFailure("pairing error: " + what) {}
};

class OracleError : public RuntimeFailure {
 public:
  explicit OracleError(const std::string& what) : RuntimeFailure("oracle error: " + what) {}
};

class UndefinedMetricError : public RuntimeFailure {
 public:
  explicit UndefinedMetricError(const std::string& what)
      : RuntimeFailure("undefined metric: " + what) {}
};

class IoError : public RuntimeFailure {
 public:
  explicit IoError(const std::string& what) : RuntimeFailure("i/o error: " + what) {}
};

}  // namespace relrank
