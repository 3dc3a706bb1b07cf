#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "cwish/errors.hpp"

namespace cwish {

/// Integer partition indexing one zonal-polynomial series term.
struct Partition {
  std::vector<int> parts;  // weakly decreasing, positive
  int weight = 0;          // sum of parts
};

/// Truncation controls for the hypergeometric series of matrix argument.
struct HypergeomConfig {
  int max_weight = 60;
  double relative_tol = 1e-10;
};

/// log Gamma_p(a) = (p(p-1)/4) log pi + sum_j log Gamma(a - (j-1)/2).
/// Throws DomainError when a <= (p-1)/2 (the density would be improper).
double log_multigamma(int p, double a);

/// Scalar 0F1(a; z) by direct series, summed to relative 1e-14.
/// Serves as the 1x1 oracle for the matrix-argument routine.
double scalar_hyp0f1(double a, double z);

/// Shared per-(p, max_weight) table of partitions and branching coefficients
/// for evaluating zonal polynomials at eigenvalue tuples. Immutable once
/// built; the get() cache is safe for concurrent readers.
class ZonalTable {
 public:
  static const ZonalTable& get(int p, int max_weight);

  int dim() const { return p_; }
  int max_weight() const { return max_weight_; }
  int partition_count() const { return static_cast<int>(weights_.size()); }
  const std::vector<Partition>& partitions() const { return partitions_; }
  int weight_of(int idx) const { return weights_[idx]; }

  /// q_kappa = 2^k P_kappa(x / max(x)) / c'_kappa for every partition, where
  /// P is the Jack polynomial (alpha = 2, P-normalization). These coefficients
  /// depend only on the eigenvalues, not on (a, scale); callers that evaluate
  /// the same argument at many (a, scale) values cache them. `q_out` must
  /// hold partition_count() doubles. Returns the log of the eigenvalue scale.
  double series_coefficients(const double* eigs, double* q_out) const;

  /// log 0F1(a; scale * diag(eigs_scaled)) from cached coefficients:
  ///   sum over k of z^k * sum_{kappa of weight k} q_kappa / (a)_kappa,
  /// with z = exp(log_z) the product of the cached eigenvalue scale and any
  /// caller-side factor. Sets *converged; on false the value is a partial sum.
  double eval_from_coefficients(const double* q, double a, double log_z,
                                const HypergeomConfig& cfg,
                                bool* converged) const;

  /// Same, with the inverse Pochhammer vector supplied by the caller; lets a
  /// batch evaluator share one u vector across many cached arguments.
  double eval_with_pochhammer(const double* q, const std::vector<double>& u,
                              double log_z, const HypergeomConfig& cfg,
                              bool* converged) const;

  /// 1/(a)_kappa for every partition (generalized Pochhammer, alpha = 2).
  void inverse_pochhammer(double a, std::vector<double>& u) const;

 private:
  ZonalTable(int p, int max_weight);

  struct Edge {
    std::int32_t target;  // partition gaining boxes in the new variable
    std::int32_t source;  // partition it branches from
    std::int32_t degree;  // boxes added (power of the new variable)
    double psi;           // branching coefficient
  };

  int p_;
  int max_weight_;
  std::vector<Partition> partitions_;     // by weight, then enumeration order
  std::vector<int> weights_;              // weight per partition
  std::vector<double> factor_;            // 2^k / c'_kappa
  std::vector<std::vector<Edge>> edges_;  // one list per variable level
  std::vector<std::int32_t> poch_parent_;  // partition minus its last box
  std::vector<double> poch_term_;          // (a + c) offset c of that box
};

/// log 0F1(a; arg) for a square matrix with nonnegative real eigenvalues,
/// by the truncated zonal-polynomial series at the argument's eigenvalues.
/// Throws DomainError (a <= (p-1)/2) or TruncationNotConverged.
double log_hyp0f1_matrix(double a, const Eigen::MatrixXd& arg,
                         const HypergeomConfig& cfg = {});

/// Same series evaluated directly at known nonnegative eigenvalues.
double log_hyp0f1_eigs(double a, const double* eigs, int p,
                       const HypergeomConfig& cfg = {});

}  // namespace cwish
