#pragma once

#include <stdexcept>
#include <string>

namespace phydro {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A state left the admissible set (nonpositive density or energy).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-supplied parameters or configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operation requires a bounded (or periodic) mesh and got the other kind.
class TopologyError : public Error {
 public:
  using Error::Error;
};

/// Time step produced an inadmissible state.
class StepError : public Error {
 public:
  using Error::Error;
};

/// Implicit stage equation did not converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class IOError : public Error {
 public:
  using Error::Error;
};

}  // namespace phydro
