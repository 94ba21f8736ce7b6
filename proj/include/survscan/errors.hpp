#pragma once

#include <stdexcept>
#include <string>

namespace survscan {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- data ingestion -------------------------------------------------------

// Malformed token, short row, missing value, unreadable file.
struct ParseError : Error {
  using Error::Error;
};

// Required column missing or header otherwise unusable.
struct SchemaError : Error {
  using Error::Error;
};

// Value outside its admissible domain (negative time, bad status, ...).
struct DomainError : Error {
  using Error::Error;
};

// Row/column reference outside [0, N) x [0, P).
struct IndexError : Error {
  using Error::Error;
};

// Same (row, column) cell or same row id supplied twice.
struct DuplicateEntryError : Error {
  using Error::Error;
};

// Column index past the dataset width, or a column/beta length mismatch.
struct InvalidColumnError : Error {
  using Error::Error;
};

// ---- numerics -------------------------------------------------------------

// A risk-set denominator came out <= 0 (or NaN): exp terms under/overflowed.
struct NonPositiveDenominatorError : Error {
  using Error::Error;
};

// A linear-predictor update would leave exp() range (|x'beta| > 700).
struct OverflowError : Error {
  using Error::Error;
};

// Censoring survival curve hits zero while weights are still needed.
struct DegenerateCurveError : Error {
  using Error::Error;
};

// A cross-validation fold contains no primary events.
struct EmptyFoldError : Error {
  using Error::Error;
};

}  // namespace survscan
