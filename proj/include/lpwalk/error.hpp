#pragma once

#include <stdexcept>
#include <string>

namespace lpwalk {

// Base of every error the library throws. The CLI maps ConfigError to exit
// code 2 and everything else to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or invalid construction parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Parameter outside the domain of a function (e.g. a horizon below a law's
// exact-tail regime).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A quantity that has no closed form for the requested law, or is infinite.
class UnavailableError : public Error {
 public:
  using Error::Error;
};

// A lattice coordinate left the representable range.
class SaturationError : public Error {
 public:
  using Error::Error;
};

// Truncated support enumeration could not settle the subgroup question.
class InconclusiveError : public Error {
 public:
  using Error::Error;
};

// A table or path would exceed the configured memory guard.
class MemoryGuardError : public Error {
 public:
  using Error::Error;
};

}  // namespace lpwalk
