#pragma once
#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "cwish/errors.hpp"

namespace cwish {

class LowerTriangular;

/// Symmetric positive-definite matrix.
///
/// Construction symmetrizes the input (average with its transpose) after
/// checking the asymmetry is within 1e-10 per entry; positive-definiteness is
/// certified by a Cholesky factorization whose pivots must exceed 1e-14.
class SpdMatrix {
 public:
  /// Validates symmetry and positive-definiteness; throws DimensionMismatch,
  /// DomainError (non-finite / asymmetric beyond tolerance), or
  /// NotPositiveDefinite.
  explicit SpdMatrix(const Eigen::MatrixXd& m);

  int dim() const { return static_cast<int>(mat_.rows()); }
  double operator()(int i, int j) const { return mat_(i, j); }
  const Eigen::MatrixXd& mat() const { return mat_; }

  static SpdMatrix identity(int p) {
    return SpdMatrix(Eigen::MatrixXd::Identity(p, p));
  }

 private:
  Eigen::MatrixXd mat_;
};

/// Lower-triangular Cholesky factor with strictly positive diagonal.
class LowerTriangular {
 public:
  explicit LowerTriangular(Eigen::MatrixXd l) : mat_(std::move(l)) {}

  int dim() const { return static_cast<int>(mat_.rows()); }
  const Eigen::MatrixXd& mat() const { return mat_; }

  /// Sum of log diagonal entries (= 0.5 * log det of the source matrix).
  double log_diag_sum() const;

 private:
  Eigen::MatrixXd mat_;
};

/// Covariate vector attached to one observed matrix.
struct CovariateVector {
  Eigen::VectorXd values;

  int dim() const { return static_cast<int>(values.size()); }
};

/// Lower Cholesky factor; throws NotPositiveDefinite when a pivot <= 1e-14.
LowerTriangular cholesky(const SpdMatrix& m);

/// Cholesky of a raw symmetric matrix; same pivot contract. Exposed for
/// callers that factorize matrices (correlation matrices, congruence
/// products) that are not tracked as SpdMatrix values.
Eigen::MatrixXd cholesky_raw(const Eigen::MatrixXd& m, double pivot_min = 1e-14);

/// Eigen-decomposition with eigenvalues sorted descending and matching
/// orthonormal columns; throws ConvergenceFailure if the solver fails.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> eigensystem(const SpdMatrix& m);

/// Matrix logarithm via the spectral decomposition.
Eigen::MatrixXd matrix_log(const SpdMatrix& m);

/// log det via the Cholesky factor.
double log_det(const SpdMatrix& m);

/// Squared Frobenius distance between equal-shaped matrices.
double frobenius_sq(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Symmetric square root of a symmetric positive-semidefinite matrix
/// (eigenvalues clamped at zero); used where Cholesky would be brittle.
Eigen::MatrixXd spd_sqrt_raw(const Eigen::MatrixXd& sym_psd);

/// Euclidean distance between covariate vectors of equal dimension.
double euclidean_distance(const CovariateVector& x, const CovariateVector& y);

/// CSV block: p lines of p comma-separated decimals.
std::string spd_to_csv(const SpdMatrix& m);
/// Parse one CSV block; validates the SpdMatrix invariants.
SpdMatrix spd_from_csv(const std::string& text);

/// JSON array-of-arrays text.
std::string spd_to_json(const SpdMatrix& m);
SpdMatrix spd_from_json(const std::string& text);

}  // namespace cwish
