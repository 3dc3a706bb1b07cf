#include "cwish/sim.hpp"

#include <cmath>
#include <utility>

#include "cwish/errors.hpp"

namespace cwish {

namespace {

constexpr double kJitterStart = 1e-10;
constexpr double kJitterCap = 1e-6;
constexpr double kMaxMeanCondition = 1e6;

// Stream ids carved out of the config seed; changing these renumbers every
// replay, so they are frozen.
enum StreamId : std::uint64_t {
  kCovariateStream = 0,
  kMeanStream = 1,
  kLabelStream = 2,
  kResidualStream = 3,
};

void check_integer_replicates(double dof, const char* where) {
  if (!(dof >= 1.0) || std::floor(dof) != dof) {
    throw DomainError(std::string(where) +
                      ": sampling requires an integer dof (sum of dof outer "
                      "products); got a non-integer value");
  }
}

LowerTriangular factor_with_jitter(const Eigen::MatrixXd& corr) {
  for (double eps = kJitterStart; eps <= kJitterCap * (1.0 + 1e-12);
       eps *= 10.0) {
    Eigen::MatrixXd shifted = corr;
    shifted.diagonal().array() += eps;
    try {
      return LowerTriangular(cholesky_raw(shifted));
    } catch (const NotPositiveDefinite&) {
      // escalate
    }
  }
  throw NotPositiveDefinite(
      "sample_correlated_gaussians: correlation matrix stayed indefinite at "
      "the jitter cap — sites too degenerate");
}

Eigen::VectorXd standard_gaussians(Rng& rng, int n) {
  Eigen::VectorXd g(n);
  for (int i = 0; i < n; ++i) g(i) = rng.gaussian();
  return g;
}

// U = (1/M) sum of M outer products of iid standard normal p-vectors.
Eigen::MatrixXd wishart_identity_mean(Rng& rng, int dim, int n_rep) {
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(dim, dim);
  for (int j = 0; j < n_rep; ++j) {
    const Eigen::VectorXd g = standard_gaussians(rng, dim);
    u.selfadjointView<Eigen::Lower>().rankUpdate(g);
  }
  u = u.selfadjointView<Eigen::Lower>();
  return u / static_cast<double>(n_rep);
}

std::vector<SpdMatrix> draw_means_impl(Rng rng, int dim, int n_groups) {
  std::vector<SpdMatrix> means;
  means.reserve(n_groups);
  for (int k = 0; k < n_groups; ++k) {
    for (int attempt = 0;; ++attempt) {
      if (attempt >= 1000) {
        throw ConvergenceFailure(
            "draw_group_means: no well-conditioned draw in 1000 attempts");
      }
      Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dim, dim);
      for (int i = 0; i < dim; ++i) {
        const Eigen::VectorXd g = standard_gaussians(rng, dim);
        s.selfadjointView<Eigen::Lower>().rankUpdate(g);
      }
      s = s.selfadjointView<Eigen::Lower>();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s);
      const double lo = solver.eigenvalues().minCoeff();
      const double hi = solver.eigenvalues().maxCoeff();
      if (lo > 0.0 && hi / lo < kMaxMeanCondition) {
        means.emplace_back(s);
        break;
      }
    }
  }
  return means;
}

int sample_label(Rng& rng, const std::vector<double>& weights) {
  const double u = rng.uniform01();
  double acc = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    acc += weights[k];
    if (u < acc) return static_cast<int>(k) + 1;
  }
  return static_cast<int>(weights.size());
}

}  // namespace

void SimConfig::validate() const {
  if (n_obs < 2) throw DomainError("SimConfig: n_obs must be at least 2");
  if (dim < 1) throw DomainError("SimConfig: dim must be positive");
  if (n_groups < 1) throw DomainError("SimConfig: n_groups must be positive");
  if (!(dof > dim - 1.0)) {
    throw DomainError("SimConfig: dof must exceed dim - 1");
  }
  if (!(phi > 0.0)) throw DomainError("SimConfig: phi must be positive");
  if (covariate_dim < 1) {
    throw DomainError("SimConfig: covariate_dim must be positive");
  }
  if (static_cast<int>(weights.size()) != n_groups) {
    throw DimensionMismatch("SimConfig: weights size must equal n_groups");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DomainError("SimConfig: weights must be >= 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw DomainError("SimConfig: weights must sum to 1 within 1e-12");
  }
}

double exp_correlation(double distance, double phi) {
  if (!(phi > 0.0)) throw DomainError("exp_correlation: phi must be positive");
  if (!(distance >= 0.0)) {
    throw DomainError("exp_correlation: distance must be nonnegative");
  }
  return std::exp(-distance / phi);
}

std::vector<Eigen::MatrixXd> sample_correlated_gaussians(
    const Eigen::MatrixXd& corr, int dim, int n_rep, std::uint64_t seed) {
  const int n_sites = static_cast<int>(corr.rows());
  if (corr.cols() != n_sites || n_sites < 1) {
    throw DimensionMismatch("sample_correlated_gaussians: corr must be square");
  }
  if (!corr.isApprox(corr.transpose(), 1e-10)) {
    throw DomainError("sample_correlated_gaussians: corr must be symmetric");
  }
  if ((corr.diagonal().array() - 1.0).abs().maxCoeff() > 1e-10) {
    throw DomainError(
        "sample_correlated_gaussians: corr must have unit diagonal");
  }
  if (dim < 1 || n_rep < 1) {
    throw DomainError("sample_correlated_gaussians: dim and n_rep positive");
  }

  const LowerTriangular factor = factor_with_jitter(corr);
  Rng rng(seed);
  std::vector<Eigen::MatrixXd> draws;
  draws.reserve(n_rep);
  for (int j = 0; j < n_rep; ++j) {
    Eigen::MatrixXd z(dim, n_sites);
    for (int c = 0; c < dim; ++c) {
      const Eigen::VectorXd g = standard_gaussians(rng, n_sites);
      z.row(c) = (factor.mat().triangularView<Eigen::Lower>() * g).transpose();
    }
    draws.push_back(std::move(z));
  }
  return draws;
}

std::vector<SpdMatrix> sample_wishart_process(const Eigen::MatrixXd& corr,
                                              int dim, int n_rep,
                                              std::uint64_t seed) {
  if (n_rep < dim) {
    throw DomainError(
        "sample_wishart_process: n_rep must be at least dim for almost-sure "
        "positive definiteness");
  }
  const std::vector<Eigen::MatrixXd> z =
      sample_correlated_gaussians(corr, dim, n_rep, seed);
  const int n_sites = static_cast<int>(corr.rows());
  std::vector<SpdMatrix> process;
  process.reserve(n_sites);
  for (int t = 0; t < n_sites; ++t) {
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(dim, dim);
    for (int j = 0; j < n_rep; ++j) {
      u.selfadjointView<Eigen::Lower>().rankUpdate(z[j].col(t));
    }
    u = u.selfadjointView<Eigen::Lower>();
    process.emplace_back(u / static_cast<double>(n_rep));
  }
  return process;
}

Eigen::MatrixXd scaled_distances(const std::vector<CovariateVector>& covs) {
  const int n = static_cast<int>(covs.size());
  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n, n);
  double max_dist = 0.0;
  for (int t = 0; t < n; ++t) {
    for (int s = t + 1; s < n; ++s) {
      const double d = euclidean_distance(covs[t], covs[s]);
      dist(t, s) = dist(s, t) = d;
      max_dist = std::max(max_dist, d);
    }
  }
  if (max_dist > 0.0) dist /= max_dist;
  return dist;
}

Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& distances,
                                   double phi,
                                   const CorrelationKernel& kernel) {
  const int n = static_cast<int>(distances.rows());
  Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(n, n);
  for (int t = 0; t < n; ++t) {
    for (int s = t + 1; s < n; ++s) {
      corr(t, s) = corr(s, t) = kernel(distances(t, s), phi);
    }
  }
  return corr;
}

std::vector<SpdMatrix> draw_group_means(const SimConfig& cfg) {
  cfg.validate();
  return draw_means_impl(Rng(cfg.seed).derive(kMeanStream), cfg.dim,
                         cfg.n_groups);
}

SimOutput simulate(const SimConfig& cfg) {
  return simulate(cfg, draw_group_means(cfg), exp_correlation);
}

SimOutput simulate(const SimConfig& cfg, std::vector<SpdMatrix> group_means,
                   const CorrelationKernel& kernel) {
  cfg.validate();
  check_integer_replicates(cfg.dof, "simulate");
  if (cfg.dof < cfg.dim) {
    throw DomainError("simulate: dof must be at least dim for sampling");
  }
  if (static_cast<int>(group_means.size()) != cfg.n_groups) {
    throw DimensionMismatch("simulate: group_means size must equal n_groups");
  }
  for (const SpdMatrix& s : group_means) {
    if (s.dim() != cfg.dim) {
      throw DimensionMismatch("simulate: group mean dimension mismatch");
    }
  }

  const Rng root(cfg.seed);
  SimOutput out;
  out.group_means = std::move(group_means);

  Rng cov_rng = root.derive(kCovariateStream);
  out.covariates.reserve(cfg.n_obs);
  for (int t = 0; t < cfg.n_obs; ++t) {
    Eigen::VectorXd x(cfg.covariate_dim);
    for (int i = 0; i < cfg.covariate_dim; ++i) x(i) = cov_rng.uniform01();
    out.covariates.push_back(CovariateVector{std::move(x)});
  }

  Rng label_rng = root.derive(kLabelStream);
  out.labels.reserve(cfg.n_obs);
  for (int t = 0; t < cfg.n_obs; ++t) {
    out.labels.push_back(sample_label(label_rng, cfg.weights));
  }

  const Eigen::MatrixXd dist = scaled_distances(out.covariates);
  const Eigen::MatrixXd corr = correlation_matrix(dist, cfg.phi, kernel);
  out.residuals = sample_wishart_process(
      corr, cfg.dim, static_cast<int>(cfg.dof),
      root.derive(kResidualStream).seed());

  std::vector<LowerTriangular> factors;
  factors.reserve(cfg.n_groups);
  for (const SpdMatrix& s : out.group_means) factors.push_back(cholesky(s));

  out.matrices.reserve(cfg.n_obs);
  for (int t = 0; t < cfg.n_obs; ++t) {
    const Eigen::MatrixXd& l = factors[out.labels[t] - 1].mat();
    out.matrices.emplace_back(l * out.residuals[t].mat() * l.transpose());
  }
  return out;
}

std::vector<SpdMatrix> trained_means(const SimConfig& cfg, int n_train,
                                     std::uint64_t seed) {
  cfg.validate();
  check_integer_replicates(cfg.dof, "trained_means");
  if (n_train < 1) throw DomainError("trained_means: n_train must be >= 1");
  if (cfg.dof < cfg.dim) {
    throw DomainError("trained_means: dof must be at least dim for sampling");
  }

  const std::vector<SpdMatrix> means = draw_group_means(cfg);
  Rng rng(seed);
  std::vector<SpdMatrix> trained;
  trained.reserve(cfg.n_groups);
  for (int k = 0; k < cfg.n_groups; ++k) {
    const Eigen::MatrixXd l = cholesky(means[k]).mat();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(cfg.dim, cfg.dim);
    for (int i = 0; i < n_train; ++i) {
      const Eigen::MatrixXd u =
          wishart_identity_mean(rng, cfg.dim, static_cast<int>(cfg.dof));
      acc += l * u * l.transpose();
    }
    trained.emplace_back(acc / static_cast<double>(n_train));
  }
  return trained;
}

}  // namespace cwish
