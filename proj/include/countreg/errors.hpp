#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace countreg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A distribution or model parameter lies outside its domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A column named in a schema or model specification is missing or has the
/// wrong type.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A CSV cell could not be parsed under its declared type.
class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : Error("row " + std::to_string(row) + ": " + what), row_(row) {}

  /// 1-based data row (the header is row 0).
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// A covariate that would produce an all-zero or collinear dummy block.
class DegenerateCovariateError : public Error {
 public:
  using Error::Error;
};

/// A contingency table with an empty margin or a single row/column.
class DegenerateTableError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite intermediate while evaluating the likelihood.
class EvaluationError : public Error {
 public:
  EvaluationError(std::size_t row, const std::string& what)
      : Error("observation " + std::to_string(row) + ": " + what), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ComparisonError : public Error {
 public:
  using Error::Error;
};

}  // namespace countreg
