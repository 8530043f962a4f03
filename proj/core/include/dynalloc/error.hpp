#pragma once

#include <stdexcept>
#include <string>

namespace dynalloc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid inputs, malformed files, or inconsistent configuration.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown (non-finite objective, non-factorizable matrix, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace dynalloc
