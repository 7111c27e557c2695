#pragma once

#include <stdexcept>
#include <string>

namespace custdyn {

// Base type for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller handed us something malformed: a negative rate, a NaN state, ...
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// A documented precondition of the operation does not hold for these inputs.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// A run configuration failed to parse or failed field validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// The parameter pattern is degenerate for the requested analytic route.
class DegenerateParametersError : public Error {
 public:
  using Error::Error;
};

// An integration stage produced a non-finite value and step shrinking did not help.
class StepFailureError : public Error {
 public:
  using Error::Error;
};

// A self-check failed. This signals a bug in the library, not bad input.
class InternalInconsistencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace custdyn
