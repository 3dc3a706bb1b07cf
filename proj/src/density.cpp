#include "cwish/density.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "cwish/errors.hpp"

namespace cwish {

namespace {

constexpr double kRhoCeiling = 1.0 - 1e-6;
constexpr double kLog2 = 0.6931471805599453;

void check_dof(double dof, int p, const char* where) {
  if (!std::isfinite(dof) || dof <= static_cast<double>(p - 1)) {
    throw DomainError(std::string(where) +
                      ": dof must exceed dimension minus one");
  }
}

}  // namespace

MarginalParams::MarginalParams(SpdMatrix mean_in, double dof_in)
    : mean(std::move(mean_in)), dof(dof_in) {
  check_dof(dof, mean.dim(), "MarginalParams");
}

PairParams::PairParams(SpdMatrix mean_t_in, SpdMatrix mean_s_in, double dof_in,
                       double rho_in)
    : mean_t(std::move(mean_t_in)),
      mean_s(std::move(mean_s_in)),
      dof(dof_in),
      rho(rho_in) {
  if (mean_t.dim() != mean_s.dim()) {
    throw DimensionMismatch("PairParams: mean dimensions differ");
  }
  check_dof(dof, mean_t.dim(), "PairParams");
  if (!std::isfinite(rho) || rho < 0.0 || rho >= 1.0) {
    throw RhoOutOfRange("PairParams: rho must lie in [0, 1)");
  }
}

double log_wishart_pdf(const SpdMatrix& obs, const MarginalParams& params) {
  const int p = params.mean.dim();
  if (obs.dim() != p) {
    throw DimensionMismatch("log_wishart_pdf: observation/mean shapes differ");
  }
  const double m = params.dof;
  const LowerTriangular q = cholesky(params.mean);
  const WhitenedObs white = whiten(obs.mat(), q);
  const double ld_mean = 2.0 * q.log_diag_sum();
  const double ld_obs = log_det(obs);
  return 0.5 * (m - p - 1.0) * ld_obs - 0.5 * m * white.trace -
         0.5 * m * p * kLog2 - 0.5 * m * (ld_mean - p * std::log(m)) -
         log_multigamma(p, 0.5 * m);
}

double log_bivariate_pdf(const SpdMatrix& obs_t, const SpdMatrix& obs_s,
                         const PairParams& params,
                         const HypergeomConfig& config) {
  const int p = params.mean_t.dim();
  if (obs_t.dim() != p || obs_s.dim() != p) {
    throw DimensionMismatch(
        "log_bivariate_pdf: observation/mean shapes differ");
  }
  if (params.rho >= kRhoCeiling) {
    throw RhoOutOfRange("log_bivariate_pdf: rho too close to one");
  }

  const LowerTriangular qt = cholesky(params.mean_t);
  const LowerTriangular qs = cholesky(params.mean_s);
  const WhitenedObs ut = whiten(obs_t.mat(), qt);
  const WhitenedObs us = whiten(obs_s.mat(), qs);

  const double ld_means = 2.0 * (qt.log_diag_sum() + qs.log_diag_sum());
  const double ld_ratio = log_det(obs_t) + log_det(obs_s) - ld_means;
  const double tr_sum = ut.trace + us.trace;

  const double scale = std::exp(log_coupling_scale(params.dof, params.rho));
  const Eigen::VectorXd eigs =
      scale * coupling_eigs(ut.u, spd_sqrt_raw(us.u));
  const double log_hyp =
      log_hyp0f1_eigs(0.5 * params.dof, eigs.data(), p, config);

  return log_hyp + bivariate_log_terms(p, params.dof, params.rho, ld_ratio,
                                       tr_sum, ld_means);
}

WhitenedObs whiten(const Eigen::MatrixXd& obs,
                   const LowerTriangular& mean_factor) {
  const Eigen::MatrixXd half =
      mean_factor.mat().triangularView<Eigen::Lower>().solve(obs);
  Eigen::MatrixXd u = mean_factor.mat()
                          .triangularView<Eigen::Lower>()
                          .solve(half.transpose())
                          .transpose();
  u = 0.5 * (u + u.transpose()).eval();
  const double trace = u.trace();
  return WhitenedObs{std::move(u), trace};
}

Eigen::VectorXd coupling_eigs(const Eigen::MatrixXd& ut,
                              const Eigen::MatrixXd& us_sqrt) {
  const Eigen::MatrixXd prod = us_sqrt * ut * us_sqrt;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      0.5 * (prod + prod.transpose()));
  if (solver.info() != Eigen::Success) {
    throw ConvergenceFailure("coupling_eigs: eigendecomposition failed");
  }
  return solver.eigenvalues().array().max(0.0).matrix().reverse();
}

double log_coupling_scale(double dof, double rho) {
  if (rho == 0.0) {
    return -std::numeric_limits<double>::infinity();
  }
  const double ratio = dof * rho / (1.0 - rho * rho);
  return 2.0 * std::log(ratio) - 2.0 * kLog2;
}

double bivariate_log_terms(int p, double dof, double rho, double ld_ratio,
                           double tr_sum, double ld_means) {
  const double one_minus = 1.0 - rho * rho;
  return -dof * p * kLog2 - 2.0 * log_multigamma(p, 0.5 * dof) +
         0.5 * (dof - p - 1.0) * ld_ratio -
         0.5 * p * dof * std::log(one_minus / (dof * dof)) -
         0.5 * dof / one_minus * tr_sum - 0.5 * (p + 1.0) * ld_means;
}

}  // namespace cwish
