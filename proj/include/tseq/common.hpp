#pragma once

#include <stdexcept>
#include <string>

namespace tseq {

// Error taxonomy. All library errors derive from Error so callers can map
// them to exit codes in one place.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible shapes or an out-of-range index.
struct DimensionError : Error {
  using Error::Error;
};

// Input value outside an operation's domain (e.g. duration below d_min,
// a vector that is not a probability distribution).
struct DomainError : Error {
  using Error::Error;
};

// Malformed data file; message carries file/line context.
struct ParseError : Error {
  using Error::Error;
};

// Non-finite value where a finite one is required (divergence, bad loss).
struct NumericError : Error {
  using Error::Error;
};

// Bad run configuration (unknown key, invalid value, missing path).
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace tseq
