#pragma once

#include <stdexcept>
#include <string>

namespace flexknn {

// Shared error taxonomy. Everything derives from Error so callers (notably the
// CLI) can catch a single base type at the boundary.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

// Thrown by text parsers (distance specs, CSV). Row/col are 1-based where
// known, -1 otherwise.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg) : Error(msg) {}
  ParseError(const std::string& msg, long row, long col)
      : Error(msg + " (row " + std::to_string(row) + ", col " + std::to_string(col) + ")"),
        row(row),
        col(col) {}
  long row = -1;
  long col = -1;
};

class KTooLarge : public Error {
 public:
  using Error::Error;
};

class NotBinary : public Error {
 public:
  using Error::Error;
};

class DegenerateVariance : public Error {
 public:
  using Error::Error;
};

class NonFiniteObjective : public Error {
 public:
  using Error::Error;
};

class EmptySelectSet : public Error {
 public:
  using Error::Error;
};

// Dataset too small for the requested split or query.
class TooSmall : public Error {
 public:
  using Error::Error;
};

// Fewer than two observations; no sample variance.
class TooFew : public Error {
 public:
  using Error::Error;
};

class MissingColumn : public Error {
 public:
  using Error::Error;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

class ClassTooSmall : public Error {
 public:
  using Error::Error;
};

class RankTooSmall : public Error {
 public:
  using Error::Error;
};

}  // namespace flexknn
