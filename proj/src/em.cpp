#include "cwish/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cwish/errors.hpp"
#include "cwish/rng.hpp"
#include "cwish/sim.hpp"

namespace cwish {

namespace {

constexpr double kRhoCeiling = 1.0 - 1e-6;
constexpr double kRespFloor = 1e-14;   // responsibilities below this do not
                                       // constrain the (phi, dof) step
constexpr double kAscentSlack = 1e-9;
constexpr double kRejected = 1e30;     // minimizer value for infeasible points
const double kNegInf = -std::numeric_limits<double>::infinity();

void validate_dataset(const Dataset& data, const char* where) {
  const int n = data.size();
  if (n < 2) throw DomainError(std::string(where) + ": need at least 2 observations");
  if (static_cast<int>(data.covariates.size()) != n) {
    throw DimensionMismatch(std::string(where) +
                            ": matrices/covariates counts differ");
  }
  const int p = data.matrices[0].dim();
  const int d = data.covariates[0].dim();
  for (int t = 0; t < n; ++t) {
    if (data.matrices[t].dim() != p || data.covariates[t].dim() != d) {
      throw DimensionMismatch(std::string(where) +
                              ": inhomogeneous observation dimensions");
    }
  }
}

void validate_means(const std::vector<SpdMatrix>& means, int dim,
                    const char* where) {
  if (means.empty()) {
    throw DomainError(std::string(where) + ": need at least one group mean");
  }
  for (const SpdMatrix& m : means) {
    if (m.dim() != dim) {
      throw DimensionMismatch(std::string(where) +
                              ": group mean dimension mismatch");
    }
  }
}

void validate_plan(const PairWeightPlan& plan, int n_obs, const char* where) {
  if (plan.pairs.empty()) {
    throw EmptyPlan(std::string(where) + ": plan retains no pairs");
  }
  double total = 0.0;
  for (const auto& pr : plan.pairs) {
    if (pr.t < 0 || pr.s <= pr.t || pr.s >= n_obs) {
      throw DomainError(std::string(where) +
                        ": plan pair indices out of range or not t < s");
    }
    if (!(pr.p_ts > 0.0)) {
      throw DomainError(std::string(where) + ": plan weights must be positive");
    }
    total += pr.p_ts;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw DomainError(std::string(where) +
                      ": plan weights must sum to 1 within 1e-12");
  }
}

void check_plan_matches_kernel(const PairwiseKernel& kernel,
                               const PairWeightPlan& plan, const char* where) {
  validate_plan(plan, kernel.n_obs(), where);
  if (static_cast<int>(plan.pairs.size()) != kernel.n_pairs()) {
    throw DimensionMismatch(std::string(where) +
                            ": plan and kernel pair counts differ");
  }
  for (int q = 0; q < kernel.n_pairs(); ++q) {
    if (plan.pairs[q].t != kernel.pairs()[q].first ||
        plan.pairs[q].s != kernel.pairs()[q].second) {
      throw DomainError(std::string(where) +
                        ": plan pairs do not match the kernel's pair set");
    }
  }
}

std::vector<double> log_weights(const std::vector<double>& w) {
  std::vector<double> lw(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    lw[k] = w[k] > 0.0 ? std::log(w[k]) : kNegInf;
  }
  return lw;
}

// Responsibilities and the observed composite log-likelihood share the same
// per-pair log-sum-exp pass; `resp` may be null when only the value is
// wanted. Reductions run in plan order, serially, so results do not depend
// on how eval() was parallelized.
double blocks_from_log_densities(const PairwiseKernel& kernel,
                                 const PairWeightPlan& plan,
                                 const std::vector<double>& log_f,
                                 const std::vector<double>& lw,
                                 ResponsibilityTable* resp) {
  const int K = kernel.n_groups();
  double total = 0.0;
  if (resp != nullptr) {
    resp->n_groups = K;
    resp->blocks.assign(kernel.n_pairs(), Eigen::MatrixXd(K, K));
  }
  Eigen::MatrixXd level(K, K);
  for (int q = 0; q < kernel.n_pairs(); ++q) {
    const double p_ts = plan.pairs[q].p_ts;
    double peak = kNegInf;
    for (int jt = 0; jt < K; ++jt) {
      for (int js = 0; js < K; ++js) {
        const double l =
            p_ts * (log_f[kernel.combo(q, jt, js)] + lw[jt] + lw[js]);
        level(jt, js) = l;
        peak = std::max(peak, l);
      }
    }
    if (peak == kNegInf) {
      throw NumericalUnderflow(
          "e_step: all group combinations vanished for pair (" +
          std::to_string(plan.pairs[q].t) + ", " +
          std::to_string(plan.pairs[q].s) + ")");
    }
    double sum = 0.0;
    for (int jt = 0; jt < K; ++jt) {
      for (int js = 0; js < K; ++js) sum += std::exp(level(jt, js) - peak);
    }
    total += peak + std::log(sum);
    if (resp != nullptr) {
      resp->blocks[q] = ((level.array() - peak).exp() / sum).matrix();
    }
  }
  return total;
}

}  // namespace

void ModelParams::validate(int dim) const {
  if (!(dof > dim - 1.0)) {
    throw DomainError("ModelParams: dof must exceed dim - 1");
  }
  if (!(phi > 0.0)) throw DomainError("ModelParams: phi must be positive");
  if (weights.empty()) throw DomainError("ModelParams: weights empty");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DomainError("ModelParams: weights must be >= 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw DomainError("ModelParams: weights must sum to 1 within 1e-12");
  }
}

PairWeightPlan build_weight_plan(const std::vector<CovariateVector>& covariates,
                                 double lambda, double u, std::uint64_t seed) {
  const int n = static_cast<int>(covariates.size());
  if (n < 2) throw DomainError("build_weight_plan: need at least 2 covariates");
  if (!(lambda > 0.0)) throw DomainError("build_weight_plan: lambda > 0 required");
  if (!(u > 0.0 && u <= 1.0)) {
    throw DomainError("build_weight_plan: u must lie in (0, 1]");
  }
  const std::int64_t n_all = static_cast<std::int64_t>(n) * (n - 1) / 2;
  const auto n_keep = static_cast<std::int64_t>(
      std::floor(u * static_cast<double>(n_all)));
  if (n_keep == 0) {
    throw EmptyPlan("build_weight_plan: floor(u * T(T-1)/2) is zero");
  }

  // uniform retention: partial Fisher-Yates over all pair indices
  std::vector<std::int64_t> idx(n_all);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::int64_t i = 0; i < n_keep; ++i) {
    const std::int64_t j = i + static_cast<std::int64_t>(
        rng.index(static_cast<std::uint64_t>(n_all - i)));
    std::swap(idx[i], idx[j]);
  }
  std::sort(idx.begin(), idx.begin() + n_keep);

  const Eigen::MatrixXd dist = scaled_distances(covariates);
  PairWeightPlan plan;
  plan.lambda = lambda;
  plan.u = u;
  plan.seed = seed;
  plan.pairs.reserve(n_keep);
  double total = 0.0;
  for (std::int64_t i = 0; i < n_keep; ++i) {
    // invert the lexicographic pair index (t < s)
    std::int64_t r = idx[i];
    int t = 0;
    while (r >= n - 1 - t) {
      r -= n - 1 - t;
      ++t;
    }
    const int s = t + 1 + static_cast<int>(r);
    const double w = std::exp(-dist(t, s) / lambda);
    plan.pairs.push_back({t, s, w});
    total += w;
  }
  for (auto& pr : plan.pairs) pr.p_ts /= total;
  return plan;
}

PairwiseKernel::PairwiseKernel(const Dataset& data,
                               const std::vector<SpdMatrix>& means,
                               const std::vector<std::pair<int, int>>& pairs,
                               const HypergeomConfig& cfg)
    : cfg_(cfg) {
  validate_dataset(data, "PairwiseKernel");
  dim_ = data.matrices[0].dim();
  n_obs_ = data.size();
  validate_means(means, dim_, "PairwiseKernel");
  n_groups_ = static_cast<int>(means.size());
  if (pairs.empty()) throw EmptyPlan("PairwiseKernel: empty pair set");
  for (const auto& [t, s] : pairs) {
    if (t < 0 || s <= t || s >= n_obs_) {
      throw DomainError("PairwiseKernel: pair indices out of range");
    }
  }
  pairs_ = pairs;
  table_ = &ZonalTable::get(dim_, cfg_.max_weight);

  const int T = n_obs_;
  const int K = n_groups_;

  ld_obs_.resize(T);
  for (int t = 0; t < T; ++t) ld_obs_[t] = log_det(data.matrices[t]);
  ld_mean_.resize(K);
  std::vector<LowerTriangular> factors;
  factors.reserve(K);
  for (int k = 0; k < K; ++k) {
    factors.push_back(cholesky(means[k]));
    ld_mean_[k] = 2.0 * factors[k].log_diag_sum();
  }

  // whitened observations and their symmetric square roots, (t, k)-major
  std::vector<Eigen::MatrixXd> white(static_cast<std::size_t>(T) * K);
  std::vector<Eigen::MatrixXd> white_sqrt(static_cast<std::size_t>(T) * K);
  tr_white_.resize(static_cast<std::size_t>(T) * K);
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < K; ++k) {
      WhitenedObs obs = whiten(data.matrices[t].mat(), factors[k]);
      tr_white_[t * K + k] = obs.trace;
      white_sqrt[t * K + k] = spd_sqrt_raw(obs.u);
      white[t * K + k] = std::move(obs.u);
    }
  }

  const Eigen::MatrixXd dist = scaled_distances(data.covariates);
  pair_dist_.resize(pairs_.size());
  for (std::size_t q = 0; q < pairs_.size(); ++q) {
    pair_dist_[q] = dist(pairs_[q].first, pairs_[q].second);
  }

  // the expensive pass: zonal coefficients for every combination
  const std::int64_t n_combo =
      static_cast<std::int64_t>(pairs_.size()) * K * K;
  const int npart = table_->partition_count();
  q_store_.resize(n_combo * npart);
  log_cx_.resize(n_combo);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::int64_t c = 0; c < n_combo; ++c) {
    const int q = static_cast<int>(c / (K * K));
    const int jt = static_cast<int>((c / K) % K);
    const int js = static_cast<int>(c % K);
    const int t = pairs_[q].first;
    const int s = pairs_[q].second;
    const Eigen::VectorXd eigs =
        coupling_eigs(white[t * K + jt], white_sqrt[s * K + js]);
    log_cx_[c] = table_->series_coefficients(eigs.data(),
                                             &q_store_[c * npart]);
  }
}

void PairwiseKernel::eval_pair(int q, double phi, double dof,
                               const std::vector<double>& poch,
                               std::vector<double>& log_f,
                               std::vector<unsigned char>& conv) const {
  const int npart = table_->partition_count();
  const double rho = std::min(std::exp(-pair_dist_[q] / phi), kRhoCeiling);
  const double log_scale = log_coupling_scale(dof, rho);
  for (int jt = 0; jt < n_groups_; ++jt) {
    for (int js = 0; js < n_groups_; ++js) {
      const int c = combo(q, jt, js);
      bool ok = false;
      const double hyp = table_->eval_with_pochhammer(
          &q_store_[static_cast<std::int64_t>(c) * npart], poch,
          log_scale + log_cx_[c], cfg_, &ok);
      if (!ok || !std::isfinite(hyp)) {
        log_f[c] = kNegInf;
        conv[c] = 0;
        continue;
      }
      const double ld_ratio = ld_obs_[pairs_[q].first] +
                              ld_obs_[pairs_[q].second] - ld_mean_[jt] -
                              ld_mean_[js];
      const double tr_sum = tr_white_[pairs_[q].first * n_groups_ + jt] +
                            tr_white_[pairs_[q].second * n_groups_ + js];
      log_f[c] = hyp + bivariate_log_terms(dim_, dof, rho, ld_ratio, tr_sum,
                                           ld_mean_[jt] + ld_mean_[js]);
      conv[c] = 1;
    }
  }
}

void PairwiseKernel::eval(double phi, double dof, std::vector<double>& log_f,
                          std::vector<unsigned char>& conv) const {
  const std::size_t n_combo =
      static_cast<std::size_t>(n_pairs()) * n_groups_ * n_groups_;
  log_f.resize(n_combo);
  conv.resize(n_combo);
  std::vector<double> poch;
  table_->inverse_pochhammer(0.5 * dof, poch);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int q = 0; q < n_pairs(); ++q) {
    eval_pair(q, phi, dof, poch, log_f, conv);
  }
}

void PairwiseKernel::eval_serial(double phi, double dof,
                                 std::vector<double>& log_f,
                                 std::vector<unsigned char>& conv) const {
  const std::size_t n_combo =
      static_cast<std::size_t>(n_pairs()) * n_groups_ * n_groups_;
  log_f.resize(n_combo);
  conv.resize(n_combo);
  std::vector<double> poch;
  table_->inverse_pochhammer(0.5 * dof, poch);
  for (int q = 0; q < n_pairs(); ++q) {
    eval_pair(q, phi, dof, poch, log_f, conv);
  }
}

ResponsibilityTable e_step(const Dataset& data,
                           const std::vector<SpdMatrix>& means,
                           const ModelParams& params,
                           const PairWeightPlan& plan,
                           const HypergeomConfig& cfg) {
  validate_dataset(data, "e_step");
  params.validate(data.matrices[0].dim());
  if (params.weights.size() != means.size()) {
    throw DimensionMismatch("e_step: weights/means counts differ");
  }
  validate_plan(plan, data.size(), "e_step");
  std::vector<std::pair<int, int>> idx;
  idx.reserve(plan.pairs.size());
  for (const auto& pr : plan.pairs) idx.emplace_back(pr.t, pr.s);
  const PairwiseKernel kernel(data, means, idx, cfg);
  std::vector<double> log_f;
  std::vector<unsigned char> conv;
  kernel.eval(params.phi, params.dof, log_f, conv);
  ResponsibilityTable resp;
  blocks_from_log_densities(kernel, plan, log_f, log_weights(params.weights),
                            &resp);
  return resp;
}

std::vector<double> m_step_weights(const ResponsibilityTable& resp) {
  if (resp.n_groups < 1 || resp.blocks.empty()) {
    throw DomainError("m_step_weights: empty responsibility table");
  }
  const int K = resp.n_groups;
  std::vector<double> omega(K, 0.0);
  double total = 0.0;
  for (const Eigen::MatrixXd& block : resp.blocks) {
    for (int jt = 0; jt < K; ++jt) {
      for (int js = 0; js < K; ++js) {
        omega[js] += block(jt, js);
        total += block(jt, js);
      }
    }
  }
  for (double& w : omega) w /= total;
  return omega;
}

double phi_objective(const PairwiseKernel& kernel,
                     const ResponsibilityTable& resp,
                     const PairWeightPlan& plan, double phi, double dof) {
  std::vector<double> log_f;
  std::vector<unsigned char> conv;
  kernel.eval(phi, dof, log_f, conv);
  const int K = kernel.n_groups();
  double value = 0.0;
  for (int q = 0; q < kernel.n_pairs(); ++q) {
    const double p_ts = plan.pairs[q].p_ts;
    for (int jt = 0; jt < K; ++jt) {
      for (int js = 0; js < K; ++js) {
        const double r = resp.blocks[q](jt, js);
        if (r <= kRespFloor) continue;
        const int c = kernel.combo(q, jt, js);
        if (!conv[c]) return kNegInf;  // truncation failed on an active term
        value += p_ts * r * log_f[c];
      }
    }
  }
  return value;
}

namespace {

// Minimize f over R^2 by limited-memory secant directions with a
// backtracking (sufficient-decrease) line search. Deterministic; never
// returns a point worse than the start.
struct TinyLbfgs {
  static constexpr int kHistory = 5;
  static constexpr int kMaxIter = 12;
  static constexpr double kGradStep = 1e-5;
  static constexpr double kArmijo = 1e-4;

  template <typename F>
  static Eigen::Vector2d gradient(const F& f, const Eigen::Vector2d& x) {
    Eigen::Vector2d g;
    for (int i = 0; i < 2; ++i) {
      Eigen::Vector2d hi = x, lo = x;
      hi(i) += kGradStep;
      lo(i) -= kGradStep;
      g(i) = (f(hi) - f(lo)) / (2.0 * kGradStep);
    }
    return g;
  }

  // returns (x, value, made_progress)
  template <typename F>
  static std::tuple<Eigen::Vector2d, double, bool> minimize(
      const F& f, Eigen::Vector2d x, double fx) {
    std::vector<Eigen::Vector2d> s_hist, y_hist;
    Eigen::Vector2d g = gradient(f, x);
    bool progressed = false;
    for (int iter = 0; iter < kMaxIter; ++iter) {
      if (g.template lpNorm<Eigen::Infinity>() < 1e-7) break;
      // two-loop recursion over the stored curvature pairs
      Eigen::Vector2d d = -g;
      const int m = static_cast<int>(s_hist.size());
      std::vector<double> alpha(m);
      for (int i = m - 1; i >= 0; --i) {
        const double rho_i = 1.0 / y_hist[i].dot(s_hist[i]);
        alpha[i] = rho_i * s_hist[i].dot(d);
        d -= alpha[i] * y_hist[i];
      }
      if (m > 0) {
        const double gamma =
            s_hist[m - 1].dot(y_hist[m - 1]) / y_hist[m - 1].squaredNorm();
        d *= gamma;
      }
      for (int i = 0; i < m; ++i) {
        const double rho_i = 1.0 / y_hist[i].dot(s_hist[i]);
        const double beta = rho_i * y_hist[i].dot(d);
        d += (alpha[i] - beta) * s_hist[i];
      }
      double slope = g.dot(d);
      if (!(slope < 0.0)) {  // fall back to steepest descent
        d = -g;
        slope = g.dot(d);
      }
      // backtracking line search
      double step = 1.0;
      double f_new = kRejected;
      Eigen::Vector2d x_new;
      bool accepted = false;
      for (int half = 0; half < 30; ++half) {
        x_new = x + step * d;
        f_new = f(x_new);
        if (f_new <= fx + kArmijo * step * slope) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
      const Eigen::Vector2d g_new = gradient(f, x_new);
      const Eigen::Vector2d s_vec = x_new - x;
      const Eigen::Vector2d y_vec = g_new - g;
      if (y_vec.dot(s_vec) > 1e-12 * s_vec.norm() * y_vec.norm()) {
        s_hist.push_back(s_vec);
        y_hist.push_back(y_vec);
        if (static_cast<int>(s_hist.size()) > kHistory) {
          s_hist.erase(s_hist.begin());
          y_hist.erase(y_hist.begin());
        }
      }
      const double improvement = fx - f_new;
      x = x_new;
      fx = f_new;
      g = g_new;
      progressed = true;
      if (improvement <= 1e-12 * (1.0 + std::abs(fx))) break;
    }
    return {x, fx, progressed};
  }
};

}  // namespace

PhiStep m_step_phi(const PairwiseKernel& kernel,
                   const ResponsibilityTable& resp, const PairWeightPlan& plan,
                   double phi, double dof) {
  check_plan_matches_kernel(kernel, plan, "m_step_phi");
  const int p = kernel.dim();
  if (!(phi > 0.0) || !(dof > p - 1.0)) {
    throw DomainError("m_step_phi: infeasible current point");
  }
  const double shift = p - 1.0;
  const auto objective = [&](const Eigen::Vector2d& x) -> double {
    // generous box in transformed coordinates keeps the series arithmetic
    // finite; the optimum never sits near these walls
    if (x.template lpNorm<Eigen::Infinity>() > 20.0) return kRejected;
    const double value = phi_objective(kernel, resp, plan, std::exp(x(0)),
                                       shift + std::exp(x(1)));
    return std::isfinite(value) ? -value : kRejected;
  };

  const Eigen::Vector2d x0(std::log(phi), std::log(dof - shift));
  const double f0 = objective(x0);
  auto [x, fx, progressed] = TinyLbfgs::minimize(objective, x0, f0);
  if (!progressed || fx > f0 + kAscentSlack) {
    return {phi, dof, true};
  }
  return {std::exp(x(0)), shift + std::exp(x(1)), false};
}

PhiStep m_step_phi(const Dataset& data, const std::vector<SpdMatrix>& means,
                   const ResponsibilityTable& resp, const PairWeightPlan& plan,
                   double phi, double dof, const HypergeomConfig& cfg) {
  validate_dataset(data, "m_step_phi");
  validate_plan(plan, data.size(), "m_step_phi");
  std::vector<std::pair<int, int>> idx;
  idx.reserve(plan.pairs.size());
  for (const auto& pr : plan.pairs) idx.emplace_back(pr.t, pr.s);
  const PairwiseKernel kernel(data, means, idx, cfg);
  return m_step_phi(kernel, resp, plan, phi, dof);
}

namespace {

// Plan-weighted responsibility margins: each block's mass enters once for
// the pair's first observation (row index) and once for its second (column
// index), scaled by the pair's plan weight. Sums to 2.
std::vector<double> surrogate_weight_margins(const ResponsibilityTable& resp,
                                             const PairWeightPlan& plan) {
  const int K = resp.n_groups;
  std::vector<double> margins(K, 0.0);
  for (std::size_t q = 0; q < resp.blocks.size(); ++q) {
    const double p_ts = plan.pairs[q].p_ts;
    for (int jt = 0; jt < K; ++jt) {
      for (int js = 0; js < K; ++js) {
        const double r = p_ts * resp.blocks[q](jt, js);
        margins[jt] += r;
        margins[js] += r;
      }
    }
  }
  return margins;
}

// weight term of the per-iteration surrogate: sum_k margins_k log w_k
double weight_surrogate(const std::vector<double>& margins,
                        const std::vector<double>& w) {
  double value = 0.0;
  for (std::size_t k = 0; k < margins.size(); ++k) {
    if (margins[k] > 0.0) {
      value += margins[k] * (w[k] > 0.0 ? std::log(w[k]) : kNegInf);
    }
  }
  return value;
}

std::pair<Eigen::MatrixXd, std::vector<int>> classify_from(
    const PairwiseKernel& kernel, const PairWeightPlan& plan,
    const std::vector<double>& log_f, const std::vector<double>& weights) {
  const int T = kernel.n_obs();
  const int K = kernel.n_groups();
  const std::vector<double> lw = log_weights(weights);

  // collect each observation's log-space score terms, then normalize per row
  std::vector<std::vector<std::pair<int, double>>> terms(T);
  for (int q = 0; q < kernel.n_pairs(); ++q) {
    const double p_ts = plan.pairs[q].p_ts;
    const int t = plan.pairs[q].t;
    const int s = plan.pairs[q].s;
    for (int k = 0; k < K; ++k) {
      for (int j = 0; j < K; ++j) {
        terms[t].emplace_back(
            k, p_ts * (log_f[kernel.combo(q, k, j)] + lw[j] + lw[k]));
        terms[s].emplace_back(
            k, p_ts * (log_f[kernel.combo(q, j, k)] + lw[j] + lw[k]));
      }
    }
  }

  Eigen::MatrixXd scores(T, K);
  std::vector<int> labels(T);
  for (int t = 0; t < T; ++t) {
    double peak = kNegInf;
    for (const auto& [k, v] : terms[t]) peak = std::max(peak, v);
    if (!std::isfinite(peak)) {
      // no retained partner (or no informative term): fall back to the
      // fitted group weights
      for (int k = 0; k < K; ++k) scores(t, k) = weights[k];
    } else {
      for (int k = 0; k < K; ++k) scores(t, k) = 0.0;
      for (const auto& [k, v] : terms[t]) scores(t, k) += std::exp(v - peak);
    }
    const double row_sum = scores.row(t).sum();
    scores.row(t) /= row_sum;
    int best = 0;
    for (int k = 1; k < K; ++k) {
      if (scores(t, k) > scores(t, best)) best = k;
    }
    labels[t] = best + 1;
  }
  return {scores, labels};
}

FitResult fit_impl(const PairwiseKernel& kernel, const ModelParams& init,
                   const PairWeightPlan& plan, int max_iter, double tol) {
  check_plan_matches_kernel(kernel, plan, "fit");
  init.validate(kernel.dim());
  if (static_cast<int>(init.weights.size()) != kernel.n_groups()) {
    throw DimensionMismatch("fit: init weights size must match group count");
  }
  if (max_iter < 1) throw DomainError("fit: max_iter must be >= 1");
  if (!(tol > 0.0)) throw DomainError("fit: tol must be positive");

  FitResult result;
  result.params = init;
  std::vector<double> log_f;
  std::vector<unsigned char> conv;
  double prev = 0.0;

  for (int iter = 0; iter < max_iter; ++iter) {
    kernel.eval(result.params.phi, result.params.dof, log_f, conv);
    const double value = blocks_from_log_densities(
        kernel, plan, log_f, log_weights(result.params.weights),
        &result.responsibilities);
    result.composite_loglik_trace.push_back(value);
    if (iter > 0 &&
        std::abs(value - prev) <= tol * std::max(1.0, std::abs(prev))) {
      result.converged = true;
      break;
    }
    prev = value;
    // The closed-form column-margin update does not always increase the
    // surrogate's weight term when plan weights are uneven or blocks are
    // asymmetric, which would let the objective slip below the previous
    // iterate. Guard it: fall back to the term's exact maximizer (the
    // normalized plan-weighted margins) so every iteration stays an ascent
    // step.
    std::vector<double> cand = m_step_weights(result.responsibilities);
    const std::vector<double> margins =
        surrogate_weight_margins(result.responsibilities, plan);
    if (weight_surrogate(margins, cand) <
        weight_surrogate(margins, result.params.weights)) {
      double total = 0.0;
      for (double m : margins) total += m;
      for (std::size_t k = 0; k < cand.size(); ++k) cand[k] = margins[k] / total;
    }
    result.params.weights = std::move(cand);
    const PhiStep step =
        m_step_phi(kernel, result.responsibilities, plan, result.params.phi,
                   result.params.dof);
    result.params.phi = step.phi;
    result.params.dof = step.dof;
  }
  result.iterations =
      static_cast<int>(result.composite_loglik_trace.size());

  if (!result.converged) {
    // the loop exhausted max_iter after a parameter update: refresh the
    // cached densities and responsibilities at the final estimates
    kernel.eval(result.params.phi, result.params.dof, log_f, conv);
    blocks_from_log_densities(kernel, plan, log_f,
                              log_weights(result.params.weights),
                              &result.responsibilities);
  }
  std::tie(result.classifier, result.labels) =
      classify_from(kernel, plan, log_f, result.params.weights);
  return result;
}

}  // namespace

FitResult fit(const PairwiseKernel& kernel, const ModelParams& init,
              const PairWeightPlan& plan, int max_iter, double tol) {
  return fit_impl(kernel, init, plan, max_iter, tol);
}

FitResult fit(const Dataset& data, const std::vector<SpdMatrix>& means,
              const ModelParams& init, const PairWeightPlan& plan,
              const HypergeomConfig& cfg, int max_iter, double tol) {
  validate_dataset(data, "fit");
  validate_plan(plan, data.size(), "fit");
  std::vector<std::pair<int, int>> idx;
  idx.reserve(plan.pairs.size());
  for (const auto& pr : plan.pairs) idx.emplace_back(pr.t, pr.s);
  const PairwiseKernel kernel(data, means, idx, cfg);
  return fit_impl(kernel, init, plan, max_iter, tol);
}

std::pair<Eigen::MatrixXd, std::vector<int>> classify(
    const Dataset& data, const std::vector<SpdMatrix>& means,
    const ModelParams& params, const PairWeightPlan& plan,
    const HypergeomConfig& cfg) {
  validate_dataset(data, "classify");
  params.validate(data.matrices[0].dim());
  if (params.weights.size() != means.size()) {
    throw DimensionMismatch("classify: weights/means counts differ");
  }
  validate_plan(plan, data.size(), "classify");
  std::vector<std::pair<int, int>> idx;
  idx.reserve(plan.pairs.size());
  for (const auto& pr : plan.pairs) idx.emplace_back(pr.t, pr.s);
  const PairwiseKernel kernel(data, means, idx, cfg);
  std::vector<double> log_f;
  std::vector<unsigned char> conv;
  kernel.eval(params.phi, params.dof, log_f, conv);
  return classify_from(kernel, plan, log_f, params.weights);
}

ModelParams default_init(const Dataset& data, int n_groups) {
  validate_dataset(data, "default_init");
  if (n_groups < 1) throw DomainError("default_init: n_groups must be >= 1");
  ModelParams params;
  params.weights.assign(n_groups, 1.0 / n_groups);
  params.dof = data.matrices[0].dim() + 2.0;
  const Eigen::MatrixXd dist = scaled_distances(data.covariates);
  std::vector<double> offdiag;
  offdiag.reserve(static_cast<std::size_t>(data.size()) * (data.size() - 1) / 2);
  for (int t = 0; t < data.size(); ++t) {
    for (int s = t + 1; s < data.size(); ++s) offdiag.push_back(dist(t, s));
  }
  std::sort(offdiag.begin(), offdiag.end());
  const double median = offdiag[offdiag.size() / 2];
  params.phi = median > 0.0 ? median : 0.5;
  return params;
}

}  // namespace cwish
