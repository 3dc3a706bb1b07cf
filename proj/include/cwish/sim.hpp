#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "cwish/rng.hpp"
#include "cwish/spd.hpp"

namespace cwish {

/// Configuration of one synthetic draw from the hierarchical model.
/// `dof` is real-valued for symmetry with the fitting side, but the
/// sampling operations require it to be a positive integer (the residual
/// process is a sum of `dof` outer products).
struct SimConfig {
  int n_obs = 50;           // T
  int dim = 3;              // p
  int n_groups = 3;         // K
  double dof = 5.0;         // M
  double phi = 1.0;         // correlation range
  std::vector<double> weights;  // group probabilities, sum 1
  int covariate_dim = 10;   // d
  std::uint64_t seed = 0;

  /// Throws DomainError / DimensionMismatch when any invariant fails
  /// (n_obs >= 2, n_groups >= 1, dof > dim - 1, phi > 0, weights a simplex
  /// within 1e-12).
  void validate() const;
};

/// One synthetic data set: observed matrices plus every latent quantity,
/// retained so tests can check the generative laws directly.
struct SimOutput {
  std::vector<SpdMatrix> matrices;      // A_t
  std::vector<CovariateVector> covariates;  // X_t, entries in [0,1]
  std::vector<int> labels;              // Z_t in 1..K
  std::vector<SpdMatrix> group_means;   // S_k
  std::vector<SpdMatrix> residuals;     // U_t
};

/// Exponential correlation kernel exp(-distance / phi).
/// Throws DomainError on phi <= 0 or distance < 0.
double exp_correlation(double distance, double phi);

/// Correlation kernel hook: maps (distance, range) to a correlation in
/// (0, 1]. Only the exponential kernel ships, but samplers accept
/// alternatives through this signature.
using CorrelationKernel = std::function<double(double, double)>;

/// Draw `n_rep` independent replicates of a mean-zero Gaussian random field
/// over the sites of `corr`: result[j] is dim x T, and for each replicate j
/// and coordinate c the T-vector across sites is N(0, corr), all
/// independent. `corr` must be symmetric with unit diagonal; a jitter of
/// 1e-10 * I (escalated tenfold up to 1e-6) keeps the factorization alive
/// for duplicate sites, after which NotPositiveDefinite propagates.
std::vector<Eigen::MatrixXd> sample_correlated_gaussians(
    const Eigen::MatrixXd& corr, int dim, int n_rep, std::uint64_t seed);

/// Draw the residual matrix process U_t = (1/M) sum_j Z_jt Z_jt^T at every
/// site. Each U_t is marginally Wishart with identity mean; cross-site
/// dependence follows `corr`. Requires integer n_rep >= dim.
std::vector<SpdMatrix> sample_wishart_process(const Eigen::MatrixXd& corr,
                                              int dim, int n_rep,
                                              std::uint64_t seed);

/// Draw one full data set: covariates uniform on [0,1]^d, pairwise
/// distances scaled by their maximum, labels from the group weights, group
/// means from a Wishart with identity scale and `dim` degrees of freedom
/// (rejected until the condition number is below 1e6), residual process
/// from the scaled distances, and observations A_t = L_{Z_t} U_t L_{Z_t}^T.
/// Bit-identical for equal configs.
SimOutput simulate(const SimConfig& cfg);

/// Same, with caller-supplied group means (skips the mean draw; the RNG
/// streams for all other stages are unchanged, so latent draws match the
/// auto-mean run with the same seed).
SimOutput simulate(const SimConfig& cfg, std::vector<SpdMatrix> group_means,
                   const CorrelationKernel& kernel = exp_correlation);

/// The group means simulate(cfg) would draw; deterministic in cfg.seed.
std::vector<SpdMatrix> draw_group_means(const SimConfig& cfg);

/// Per-group plug-in mean estimates: the entrywise average of `n_train`
/// fresh independent draws with mean S_k (matching the protocol of
/// estimating each group mean from a small training sample).
std::vector<SpdMatrix> trained_means(const SimConfig& cfg, int n_train,
                                     std::uint64_t seed);

/// Pairwise covariate distances scaled so the largest equals one (left as
/// zeros when all covariates coincide).
Eigen::MatrixXd scaled_distances(const std::vector<CovariateVector>& covs);

/// Correlation matrix from scaled distances under a kernel.
Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& distances,
                                   double phi,
                                   const CorrelationKernel& kernel);

}  // namespace cwish
