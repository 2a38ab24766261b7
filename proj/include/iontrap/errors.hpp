#pragma once

#include <stdexcept>
#include <string>

namespace iontrap {

/// Base of every error raised by the library. Callers that only need to
/// report failures can catch this; the subclasses name the condition.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A Fock-space truncation is too small for the requested state.
class TruncationError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented precondition (negative duration, eta >= 1, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Sampled curve has no interior local maximum.
class NoMaximumError : public Error {
 public:
  using Error::Error;
};

/// Sideband amplitudes do not admit a thermal estimate (a_blue <= a_red).
class DegenerateEstimateError : public Error {
 public:
  using Error::Error;
};

/// Least-squares problem is singular or the model cannot describe the data.
class FitError : public Error {
 public:
  using Error::Error;
};

/// Photon count lands exactly on an integer threshold.
class TieError : public Error {
 public:
  using Error::Error;
};

/// Trajectory diverged or the trap parameters are outside the stable region.
class InstabilityError : public Error {
 public:
  using Error::Error;
};

/// Iterative search did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Geometry does not produce the requested feature (null, saddle, ...).
class GeometryError : public Error {
 public:
  using Error::Error;
};

}  // namespace iontrap
