#pragma once

#include <stdexcept>
#include <string>

namespace projflow {

/// Input shapes or lengths do not line up.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A value or structure violates a documented precondition
/// (bad parameter range, disconnected skeleton, out-of-range index, ...).
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// File could not be read or its contents do not match the schema.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A factorization or solve failed beyond the documented tolerances.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Redundant or conflicting hard constraints made the measurement
/// system singular.  The message names the offending rows.
struct RankDeficientError : NumericError {
  using NumericError::NumericError;
};

/// A point claimed to satisfy hard constraints does not.
struct InfeasibleError : NumericError {
  using NumericError::NumericError;
};

}  // namespace projflow
