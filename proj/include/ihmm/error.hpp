#pragma once

#include <stdexcept>
#include <string>

namespace ihmm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid distribution or configuration parameter.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// The adaptive truncation needed more states than the configured cap.
class TruncationError : public Error {
 public:
  using Error::Error;
};

/// Non-finite quantity met inside the sampler.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, long iteration = -1)
      : Error(iteration >= 0 ? what + " (iteration " + std::to_string(iteration) + ")" : what),
        iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

/// A sampler invariant was broken; indicates a bug rather than bad input.
class InternalError : public Error {
 public:
  using Error::Error;
};

/// Input data cannot support the requested clustering (e.g. K > distinct points).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// A mixture fit collapsed to a singular covariance.
class DegenerateFitError : public Error {
 public:
  using Error::Error;
};

/// Overlap calibration could not bracket the target.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// Statistic is undefined for the given trace (e.g. zero variance).
class UndefinedStatisticError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable file.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ihmm
