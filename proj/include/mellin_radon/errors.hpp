#pragma once

#include <stdexcept>
#include <string>

namespace mellin_radon {

/// Failure categories. The CLI maps these onto exit codes.
enum class ErrorKind {
  Domain,
  Shape,
  Parse,
  Structural,
  Pole,
  Coverage,
  Resolution,
  NonConvergence,
  DivisionInstability,
  Integrability,
  DegenerateProduction,
  Argument,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Parse failure with a 1-based source position.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line, int column)
      : Error(ErrorKind::Parse, "line " + std::to_string(line) + ", column " +
                                    std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace mellin_radon
