#pragma once

#include <stdexcept>
#include <string>

namespace sgmm {

enum class ErrorKind {
  InvalidArgument,
  TooFewPoints,
  DegenerateInput,
  NonPositiveDefinite,
  AllComponentsFiltered,
  ZeroMap,
  ConstantMap,
  ShapeMismatch,
  DivergenceDetected,
  MissingNegatives,
  ParseError,
  BoundsError,
  IoError,
  FormatError,
};

const char* to_string(ErrorKind kind);

// Carries an ErrorKind so callers (the CLI in particular) can map failures
// to exit codes without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Parse/bounds errors that refer to a line of an input file.
class LineError : public Error {
 public:
  LineError(ErrorKind kind, std::size_t line, const std::string& what)
      : Error(kind, "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace sgmm
