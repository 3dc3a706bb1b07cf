#pragma once
// Shared generators for the test suite: random SPD matrices and small
// simulated datasets, all deterministic under explicit seeds.
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cwish/em.hpp"
#include "cwish/rng.hpp"
#include "cwish/sim.hpp"
#include "cwish/spd.hpp"

namespace cwish::test {

/// Well-conditioned random SPD matrix: G G^T / n + 0.1 I from a Gaussian
/// p x (p + 3) block.
inline SpdMatrix random_spd(Rng& rng, int p, double scale = 1.0) {
  const int n = p + 3;
  Eigen::MatrixXd g(p, n);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < n; ++j) g(i, j) = rng.gaussian();
  }
  Eigen::MatrixXd m = g * g.transpose() / n;
  m.diagonal().array() += 0.1;
  return SpdMatrix(scale * m);
}

/// Random covariate vectors uniform on [0,1]^d.
inline std::vector<CovariateVector> random_covariates(Rng& rng, int n,
                                                      int d) {
  std::vector<CovariateVector> covs;
  covs.reserve(n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd v(d);
    for (int j = 0; j < d; ++j) v(j) = rng.uniform01();
    covs.push_back(CovariateVector{std::move(v)});
  }
  return covs;
}

/// Small simulated dataset plus its true group means, sized for fast tests.
struct SmallStudy {
  Dataset data;
  std::vector<SpdMatrix> means;
};

inline SmallStudy small_study(int n_obs = 12, int dim = 2, int n_groups = 2,
                              double dof = 4.0, std::uint64_t seed = 7) {
  SimConfig cfg;
  cfg.n_obs = n_obs;
  cfg.dim = dim;
  cfg.n_groups = n_groups;
  cfg.dof = dof;
  cfg.phi = 1.0;
  cfg.weights.assign(n_groups, 1.0 / n_groups);
  cfg.covariate_dim = 3;
  cfg.seed = seed;
  SimOutput sim = simulate(cfg);
  SmallStudy study;
  study.data.matrices = std::move(sim.matrices);
  study.data.covariates = std::move(sim.covariates);
  study.data.labels = std::move(sim.labels);
  study.means = std::move(sim.group_means);
  return study;
}

}  // namespace cwish::test
