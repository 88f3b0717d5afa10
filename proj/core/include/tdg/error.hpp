#pragma once

#include <stdexcept>

namespace tdg {

// Base class for all library errors. The CLI maps subclasses onto exit
// codes: config/usage -> 1, numeric/verification -> 2, I/O -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
  using Error::Error;
};

struct DegenerateInputError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

struct IndexError : Error {
  using Error::Error;
};

struct ValidationError : Error {
  using Error::Error;
};

struct EncodingError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace tdg
