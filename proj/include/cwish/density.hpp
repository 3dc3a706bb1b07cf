#pragma once

#include <Eigen/Dense>

#include "cwish/special.hpp"
#include "cwish/spd.hpp"

namespace cwish {

/// Parameters of a single Wishart observation model parameterized by its
/// mean: A ~ W_p(Sigma / dof, dof) so that E[A] = Sigma.
struct MarginalParams {
  SpdMatrix mean;
  double dof;

  MarginalParams(SpdMatrix mean_in, double dof_in);
};

/// Parameters of a correlated pair of Wishart observations sharing one
/// degree-of-freedom parameter. `rho` is the latent Gaussian correlation
/// between the two matrices; it must lie in [0, 1).
struct PairParams {
  SpdMatrix mean_t;
  SpdMatrix mean_s;
  double dof;
  double rho;

  PairParams(SpdMatrix mean_t_in, SpdMatrix mean_s_in, double dof_in,
             double rho_in);
};

/// Log density of one mean-parameterized Wishart observation.
/// Throws DomainError when dof <= p - 1 and DimensionMismatch on shape
/// disagreement.
double log_wishart_pdf(const SpdMatrix& obs, const MarginalParams& params);

/// Log density of a correlated pair of Wishart observations. Requires
/// rho < 1 - 1e-6 (RhoOutOfRange otherwise); propagates
/// TruncationNotConverged from the matrix hypergeometric series. The result
/// is finite whenever the series converges — never NaN or infinite.
double log_bivariate_pdf(const SpdMatrix& obs_t, const SpdMatrix& obs_s,
                         const PairParams& params,
                         const HypergeomConfig& config = HypergeomConfig{});

// ---------------------------------------------------------------------------
// Building blocks shared with the composite-likelihood kernel. The pair
// density splits into (a) parameter-free spectral data of the whitened
// observations and (b) a cheap closed-form assembly in (dof, rho); the
// kernel caches (a) once per data set and re-evaluates (b) per candidate.
// ---------------------------------------------------------------------------

/// Observation congruence-transformed by the inverse Cholesky factor of its
/// group mean: u = Q^{-1} a Q^{-T}. `trace` equals tr(Sigma^{-1} a).
struct WhitenedObs {
  Eigen::MatrixXd u;
  double trace;
};

/// Whiten an observation against a mean's lower Cholesky factor.
WhitenedObs whiten(const Eigen::MatrixXd& obs,
                   const LowerTriangular& mean_factor);

/// Eigenvalues (descending) of u_s^{1/2} u_t u_s^{1/2}, the unscaled
/// argument of the hypergeometric coupling term. `us_sqrt` is the symmetric
/// square root of the second whitened observation.
Eigen::VectorXd coupling_eigs(const Eigen::MatrixXd& ut,
                              const Eigen::MatrixXd& us_sqrt);

/// Log of the scalar multiplying the coupling eigenvalues inside the
/// hypergeometric argument: (dof * rho / (1 - rho^2))^2 / 4. Returns -inf
/// at rho = 0, which reduces the pair density to the product of marginals.
double log_coupling_scale(double dof, double rho);

/// Closed-form part of the bivariate log density (everything except the
/// hypergeometric term). `ld_ratio` is log|a_t| + log|a_s| - log|S_t| -
/// log|S_s|, `tr_sum` is tr(S_t^{-1} a_t) + tr(S_s^{-1} a_s) and `ld_means`
/// is log|S_t| + log|S_s|.
double bivariate_log_terms(int p, double dof, double rho, double ld_ratio,
                           double tr_sum, double ld_means);

}  // namespace cwish
