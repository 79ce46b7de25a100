#pragma once

#include <stdexcept>
#include <string>

namespace htbandit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An input that must be finite (loss, cumulative loss, learning rate) was NaN or infinite.
class NonFiniteInput : public Error {
 public:
  using Error::Error;
};

/// A precondition on a numeric argument was violated.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The multiplier root-finder failed to reach its tolerance within the iteration cap.
class NoConvergence : public Error {
 public:
  using Error::Error;
};

/// Two or more arms share the minimal mean loss of a stochastic environment.
class NonUniqueBestArm : public Error {
 public:
  using Error::Error;
};

/// An environment failed a check that a run requires (moment bound, unique best arm,
/// truncated non-negativity of the benchmark arm).
class PreconditionFailed : public Error {
 public:
  using Error::Error;
};

}  // namespace htbandit
