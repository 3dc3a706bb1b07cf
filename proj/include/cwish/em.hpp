#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cwish/density.hpp"
#include "cwish/special.hpp"
#include "cwish/spd.hpp"

namespace cwish {

/// Observed data for fitting: matrices with their covariates, plus optional
/// ground-truth labels carried through for evaluation only.
struct Dataset {
  std::vector<SpdMatrix> matrices;
  std::vector<CovariateVector> covariates;
  std::vector<int> labels;  // may be empty; never used by the fit

  int size() const { return static_cast<int>(matrices.size()); }
};

/// The fitted parameter vector: degrees of freedom, group weights, and the
/// correlation range.
struct ModelParams {
  double dof = 0.0;
  std::vector<double> weights;
  double phi = 0.0;

  /// Throws unless dof > dim - 1, phi > 0 and weights is a nonnegative
  /// simplex vector (sum 1 within 1e-12).
  void validate(int dim) const;
};

/// Retained observation pairs with their normalized likelihood weights.
struct PairWeightPlan {
  struct Pair {
    int t;        // first index, 0-based, t < s
    int s;        // second index
    double p_ts;  // likelihood weight, positive, all weights sum to 1
  };

  std::vector<Pair> pairs;
  double lambda = 1.0;  // decay of the distance weighting
  double u = 1.0;       // retention fraction
  std::uint64_t seed = 0;
};

/// Pair retention and weighting: keeps exactly floor(u * T(T-1)/2) of the
/// T(T-1)/2 index pairs, drawn uniformly under `seed`, then weights each
/// retained pair proportionally to exp(-distance / lambda) on the max-scaled
/// covariate distances and normalizes the weights to sum one.
/// Throws EmptyPlan when the retained count is zero.
PairWeightPlan build_weight_plan(const std::vector<CovariateVector>& covariates,
                                 double lambda, double u, std::uint64_t seed);

/// Per-pair posterior responsibilities over group-label combinations:
/// blocks[q](j_t, j_s) for the q-th retained pair. Every block sums to one.
struct ResponsibilityTable {
  std::vector<Eigen::MatrixXd> blocks;
  int n_groups = 0;
};

/// Everything a fit produces. `classifier` rows sum to one; `labels` are its
/// row-wise argmax (1-based, ties to the smallest group).
struct FitResult {
  ModelParams params;
  ResponsibilityTable responsibilities;
  Eigen::MatrixXd classifier;  // T x K
  std::vector<int> labels;
  std::vector<double> composite_loglik_trace;
  bool converged = false;
  int iterations = 0;
};

/// Outcome of one quasi-Newton step on (phi, dof). When the line search
/// cannot improve the objective the current point comes back unchanged with
/// `line_search_failed` set; the EM driver continues (ascent preserved).
struct PhiStep {
  double phi = 0.0;
  double dof = 0.0;
  bool line_search_failed = false;
};

/// Cached spectral data for every (retained pair) x (group, group)
/// combination. Building it runs the zonal-coefficient recursion once per
/// combination — the dominant cost of a fit — after which evaluating all
/// pairwise log densities at any (phi, dof) is a cheap shared pass. The
/// expensive loops parallelize over pairs when OpenMP is enabled; per-slot
/// writes plus ordered downstream reductions make every result identical
/// for any worker count.
class PairwiseKernel {
 public:
  /// `pairs` lists the retained (t, s) index pairs (weights are not baked
  /// in, so one kernel serves every lambda over the same retained set).
  PairwiseKernel(const Dataset& data, const std::vector<SpdMatrix>& means,
                 const std::vector<std::pair<int, int>>& pairs,
                 const HypergeomConfig& cfg);

  int n_pairs() const { return static_cast<int>(pairs_.size()); }
  int n_obs() const { return n_obs_; }
  int n_groups() const { return n_groups_; }
  int dim() const { return dim_; }
  const std::vector<std::pair<int, int>>& pairs() const { return pairs_; }
  const HypergeomConfig& config() const { return cfg_; }

  /// Flat combo index of (pair q, j_t, j_s).
  int combo(int q, int jt, int js) const {
    return (q * n_groups_ + jt) * n_groups_ + js;
  }

  /// log f(a_t, a_s | S_{j_t}, S_{j_s}, phi, dof) for every combination.
  /// Non-converged series entries are reported as -inf in `log_f` with
  /// `converged[combo] = 0` so callers can tell truncation from genuine
  /// underflow. OpenMP-parallel over pairs.
  void eval(double phi, double dof, std::vector<double>& log_f,
            std::vector<unsigned char>& converged) const;

  /// Single-threaded reference implementation of eval(); kept for
  /// equivalence tests and benchmarking.
  void eval_serial(double phi, double dof, std::vector<double>& log_f,
                   std::vector<unsigned char>& converged) const;

 private:
  void eval_pair(int q, double phi, double dof,
                 const std::vector<double>& poch, std::vector<double>& log_f,
                 std::vector<unsigned char>& converged) const;

  int dim_ = 0;
  int n_obs_ = 0;
  int n_groups_ = 0;
  HypergeomConfig cfg_;
  const ZonalTable* table_ = nullptr;
  std::vector<std::pair<int, int>> pairs_;
  std::vector<double> pair_dist_;   // max-scaled covariate distance per pair
  std::vector<double> ld_obs_;      // log|A_t| per observation
  std::vector<double> ld_mean_;     // log|S_k| per group
  std::vector<double> tr_white_;    // tr(S_k^{-1} A_t), t-major
  std::vector<double> q_store_;     // zonal coefficients, combo-major
  std::vector<double> log_cx_;      // per-combo eigenvalue scale (log)
};

/// E-step (responsibilities) at the given parameters. Throws
/// NumericalUnderflow only when every one of a pair's K^2 log terms is -inf.
ResponsibilityTable e_step(const Dataset& data,
                           const std::vector<SpdMatrix>& means,
                           const ModelParams& params,
                           const PairWeightPlan& plan,
                           const HypergeomConfig& cfg);

/// Closed-form weight update: omega_k is the responsibility mass of group k
/// in the second-index margin, averaged over retained pairs.
std::vector<double> m_step_weights(const ResponsibilityTable& resp);

/// The conditional objective the (phi, dof) step maximizes: the
/// responsibility-weighted, plan-weighted sum of pairwise log densities.
/// Combinations with responsibility below 1e-14 are skipped; a candidate
/// whose series fails to converge on any active combination scores -inf.
double phi_objective(const PairwiseKernel& kernel,
                     const ResponsibilityTable& resp,
                     const PairWeightPlan& plan, double phi, double dof);

/// One quasi-Newton ascent step on (phi, dof): limited-memory secant
/// directions with a backtracking line search, central-difference gradients
/// (step 1e-5) on the unconstrained coordinates (log phi, log(dof - dim + 1)).
/// Never returns a point whose weighted objective is below the current one
/// by more than 1e-9.
PhiStep m_step_phi(const Dataset& data, const std::vector<SpdMatrix>& means,
                   const ResponsibilityTable& resp, const PairWeightPlan& plan,
                   double phi, double dof, const HypergeomConfig& cfg);

/// Same step against a prebuilt kernel (pairs must match the plan).
PhiStep m_step_phi(const PairwiseKernel& kernel,
                   const ResponsibilityTable& resp, const PairWeightPlan& plan,
                   double phi, double dof);

/// Full composite-likelihood EM: alternates the E-step, the weight update
/// and the (phi, dof) step until the relative change of the observed
/// composite log-likelihood drops below `tol` or `max_iter` is reached.
/// The trace holds the observed composite log-likelihood of each iteration;
/// the classifier and labels are computed at the final estimates.
FitResult fit(const Dataset& data, const std::vector<SpdMatrix>& means,
              const ModelParams& init, const PairWeightPlan& plan,
              const HypergeomConfig& cfg = HypergeomConfig{},
              int max_iter = 200, double tol = 1e-6);

/// Same fit against a prebuilt kernel, so a grid of plans over one retained
/// pair set can share the cached spectral data.
FitResult fit(const PairwiseKernel& kernel, const ModelParams& init,
              const PairWeightPlan& plan, int max_iter = 200,
              double tol = 1e-6);

/// Group membership scores G (rows sum to one) and argmax labels at fixed
/// parameters. Observations with no retained partner fall back to the
/// fitted weights as their score row.
std::pair<Eigen::MatrixXd, std::vector<int>> classify(
    const Dataset& data, const std::vector<SpdMatrix>& means,
    const ModelParams& params, const PairWeightPlan& plan,
    const HypergeomConfig& cfg);

/// Default initialization: uniform weights, phi = median pairwise scaled
/// covariate distance (0.5 if degenerate), dof = dim + 2.
ModelParams default_init(const Dataset& data, int n_groups);

}  // namespace cwish
