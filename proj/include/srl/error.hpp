#pragma once

#include <stdexcept>
#include <string>

namespace srl {

// Each category maps to one CLI exit code (see cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

// Missing or malformed input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// A file parsed but its header does not describe what the reader expects.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, degenerate normalizations, failed factorizations.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace srl
