#pragma once

#include <stdexcept>
#include <string>

namespace rydmis {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input: duplicate sites, malformed identifiers, parameter
/// invariant violations.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A configured size limit would be exceeded.
class LimitError : public Error {
 public:
  using Error::Error;
};

/// Time integration failed (norm drift, step underflow, singular CD
/// denominator).
class IntegrationError : public Error {
 public:
  using Error::Error;
};

/// Malformed or schema-violating file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace rydmis
