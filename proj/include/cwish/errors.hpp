#pragma once
#include <stdexcept>
#include <string>

namespace cwish {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Matrix/vector dimensions do not agree.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Cholesky pivot fell at or below the positive-definiteness threshold.
class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

/// Parameter outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver exceeded its iteration cap.
class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

/// The hypergeometric series did not converge within the configured
/// truncation order; the argument is too large for max_weight.
class TruncationNotConverged : public Error {
 public:
  using Error::Error;
};

/// Pair correlation outside [0, 1 - 1e-6); the density would be improper.
class RhoOutOfRange : public Error {
 public:
  using Error::Error;
};

/// Every term of a normalization underflowed to -infinity.
class NumericalUnderflow : public Error {
 public:
  using Error::Error;
};

/// A pair-weight plan retained zero pairs.
class EmptyPlan : public Error {
 public:
  using Error::Error;
};

/// Backtracking line search could not find an acceptable step.
class LineSearchFailure : public Error {
 public:
  using Error::Error;
};

/// A voxel mask retains fewer points than a covariance needs.
class MaskTooSmall : public Error {
 public:
  using Error::Error;
};

/// Feature matrix is rank-deficient beyond repair (e.g., constant image).
class DegenerateFeatures : public Error {
 public:
  using Error::Error;
};

/// Blue-channel magnitudes have (near-)zero spread; normalization undefined.
class ZeroBlueVariance : public Error {
 public:
  using Error::Error;
};

/// Two label sequences have different lengths.
class LengthMismatch : public Error {
 public:
  using Error::Error;
};

/// File/parse failure, annotated with the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cwish
