#pragma once

#include <stdexcept>
#include <string>

namespace asfem {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was not met (bad index, bad range, unknown name).
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// A structural invariant of a mesh, operator or estimate does not hold.
class InvariantViolation : public Error {
public:
  using Error::Error;
};

/// A linear solve failed: singular factorization, lost definiteness or no convergence.
class SolverError : public Error {
public:
  using Error::Error;
};

} // namespace asfem
