#ifndef REPLICHECK_ERRORS_HPP
#define REPLICHECK_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace replicheck {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File could not be read or written.
struct IoError : Error {
  using Error::Error;
};

// MLMD text did not parse as JSON.
struct ParseError : Error {
  ParseError(const std::string& msg, int line, int col)
      : Error(msg), line(line), col(col) {}
  int line = 0;
  int col = 0;
};

// JSON parsed but does not follow the MLMD schema.
struct SchemaError : Error {
  using Error::Error;
};

struct ShapeMismatch : Error {
  using Error::Error;
};

struct UncalibratedQuant : Error {
  using Error::Error;
};

struct DivisionDomain : Error {
  using Error::Error;
};

struct DegenerateVariance : Error {
  using Error::Error;
};

struct MissingContext : Error {
  using Error::Error;
};

struct TargetOutOfRange : Error {
  using Error::Error;
};

struct PreconditionViolated : Error {
  using Error::Error;
};

struct ExpansionTooLarge : Error {
  using Error::Error;
};

struct UnsupportedOp : Error {
  using Error::Error;
};

}  // namespace replicheck

#endif
