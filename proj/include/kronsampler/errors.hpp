#pragma once

#include <stdexcept>
#include <string>

namespace kronsampler {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad shapes, out-of-range indices, infeasible budgets.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A size or enumeration guard was exceeded.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure, e.g. a rank-deficient restriction where a full-rank
/// one is required.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public NumericalError {
 public:
  SingularityError(const std::string& what, std::size_t mode, std::size_t rank)
      : NumericalError(what), mode_(mode), rank_(rank) {}

  /// 0-based mode index of the offending factor.
  std::size_t mode() const { return mode_; }
  std::size_t rank() const { return rank_; }

 private:
  std::size_t mode_;
  std::size_t rank_;
};

/// Input is well-formed but the requested quantity is undefined for it
/// (zero factor matrix, zero row-norm budget).
class DegenerateInputError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace kronsampler
