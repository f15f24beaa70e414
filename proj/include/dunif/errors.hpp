#pragma once

#include <stdexcept>
#include <string>

namespace dunif {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed files, inconsistent dimensions, impossible transitions.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// A solve or optimizer produced non-finite values or failed to converge.
class NumericalError : public Error {
public:
  using Error::Error;
};

} // namespace dunif
