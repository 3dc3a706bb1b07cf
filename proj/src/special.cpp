#include "cwish/special.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace cwish {

double log_multigamma(int p, double a) {
  if (p < 1) throw DomainError("log_multigamma: p must be positive");
  if (!(a > 0.5 * (p - 1))) {
    throw DomainError("log_multigamma: a = " + std::to_string(a) +
                      " must exceed (p-1)/2 = " + std::to_string(0.5 * (p - 1)));
  }
  double v = 0.25 * p * (p - 1) * std::log(M_PI);
  for (int j = 0; j < p; ++j) v += std::lgamma(a - 0.5 * j);
  return v;
}

double scalar_hyp0f1(double a, double z) {
  if (!(a > 0)) throw DomainError("scalar_hyp0f1: a must be positive");
  double term = 1.0;
  double sum = 1.0;
  for (int k = 0; k < 100000; ++k) {
    term *= z / ((a + k) * (k + 1));
    sum += term;
    if (std::abs(term) <= 1e-14 * std::abs(sum) && k > 2) return sum;
  }
  throw ConvergenceFailure("scalar_hyp0f1: series did not settle");
}

namespace {

// leg length of cell (i,j) in lambda: rows below i reaching past column j
int leg(const std::vector<int>& lam, int i, int j) {
  int l = 0;
  for (size_t r = i + 1; r < lam.size(); ++r)
    if (lam[r] >= j + 1) ++l;
  return l;
}

// Jack P-normalization cell weight at alpha = 2
double bcell(const std::vector<int>& lam, int i, int j) {
  const double arm = lam[i] - (j + 1);
  const double l = leg(lam, i, j);
  return (2 * arm + l + 1) / (2 * arm + l + 2);
}

// c'_kappa(2) = prod over cells of (2*arm + leg + 2)
double cprime(const std::vector<int>& kap) {
  double v = 1.0;
  for (size_t i = 0; i < kap.size(); ++i)
    for (int j = 0; j < kap[i]; ++j)
      v *= 2.0 * (kap[i] - (j + 1)) + leg(kap, i, j) + 2.0;
  return v;
}

void enumerate_rec(std::vector<int>& prefix, int rem, int maxpart, int maxlen,
                   std::vector<Partition>& out) {
  if (rem == 0) {
    Partition p;
    p.parts = prefix;
    for (int v : prefix) p.weight += v;
    out.push_back(std::move(p));
    return;
  }
  if (static_cast<int>(prefix.size()) == maxlen) return;
  for (int part = std::min(rem, maxpart); part >= 1; --part) {
    prefix.push_back(part);
    enumerate_rec(prefix, rem - part, part, maxlen, out);
    prefix.pop_back();
  }
}

}  // namespace

ZonalTable::ZonalTable(int p, int max_weight) : p_(p), max_weight_(max_weight) {
  if (p < 1 || max_weight < 0) {
    throw DomainError("ZonalTable: need p >= 1 and max_weight >= 0");
  }
  // partitions grouped by weight (ascending), each group in the recursive
  // first-part-descending order
  for (int w = 0; w <= max_weight; ++w) {
    std::vector<int> prefix;
    enumerate_rec(prefix, w, w, p, partitions_);
  }
  const int n = static_cast<int>(partitions_.size());
  weights_.resize(n);
  factor_.resize(n);
  std::map<std::vector<int>, std::int32_t> index;
  for (int i = 0; i < n; ++i) {
    weights_[i] = partitions_[i].weight;
    factor_[i] = std::ldexp(1.0, partitions_[i].weight) / cprime(partitions_[i].parts);
    index[partitions_[i].parts] = i;
  }

  // generalized Pochhammer chain: remove the last box of the last row;
  // (a)_kappa = (a)_parent * (a + c) with c = (col-1) - row/2 (rows 0-based)
  poch_parent_.assign(n, 0);
  poch_term_.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto& kap = partitions_[i].parts;
    if (kap.empty()) continue;
    const int row = static_cast<int>(kap.size()) - 1;
    const int col = kap[row];
    std::vector<int> parent = kap;
    if (--parent[row] == 0) parent.pop_back();
    poch_parent_[i] = index.at(parent);
    poch_term_[i] = (col - 1) - 0.5 * row;
  }

  // branching edges: P_kappa(x_1..x_n) = sum over horizontal strips kappa/mu
  // of psi_{kappa/mu} P_mu(x_1..x_{n-1}) x_n^{|kappa|-|mu|}
  edges_.resize(p);
  std::vector<char> stripcol(max_weight + 1);
  for (int level = 1; level <= p; ++level) {
    auto& out = edges_[level - 1];
    for (int ki = 0; ki < n; ++ki) {
      const auto& kap = partitions_[ki].parts;
      if (static_cast<int>(kap.size()) > level) continue;
      // enumerate mu with kappa_{i+1} <= mu_i <= kappa_i, len(mu) < level
      std::vector<int> mu(kap.size());
      const int rows = static_cast<int>(kap.size());
      auto emit = [&]() {
        std::vector<int> trimmed;
        for (int v : mu)
          if (v > 0) trimmed.push_back(v);
        if (static_cast<int>(trimmed.size()) > level - 1) return;
        const std::int32_t mi = index.at(trimmed);
        std::fill(stripcol.begin(), stripcol.end(), 0);
        for (int i = 0; i < rows; ++i)
          for (int j = mu[i]; j < kap[i]; ++j) stripcol[j] = 1;
        double psi = 1.0;
        // cells of mu in rows meeting the strip but columns missing it
        for (size_t i = 0; i < trimmed.size(); ++i) {
          if (trimmed[i] >= kap[i]) continue;
          for (int j = 0; j < trimmed[i]; ++j) {
            if (stripcol[j]) continue;
            psi *= bcell(trimmed, static_cast<int>(i), j) /
                   bcell(kap, static_cast<int>(i), j);
          }
        }
        out.push_back({ki, mi, partitions_[ki].weight - partitions_[mi].weight,
                       psi});
      };
      if (rows == 0) {
        emit();
        continue;
      }
      // depth-first over interlaced rows
      int i = 0;
      mu[0] = kap[0];
      while (i >= 0) {
        if (i == rows - 1) {
          emit();
        } else {
          ++i;
          mu[i] = std::min(kap[i], mu[i - 1]);
          continue;
        }
        while (i >= 0) {
          const int lo = (i + 1 < rows) ? kap[i + 1] : 0;
          if (mu[i] > lo) {
            --mu[i];
            break;
          }
          --i;
        }
      }
    }
    std::sort(out.begin(), out.end(),
              [](const Edge& a, const Edge& b) { return a.target < b.target; });
  }
}

const ZonalTable& ZonalTable::get(int p, int max_weight) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::unique_ptr<ZonalTable>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{p, max_weight}];
  if (!slot) slot.reset(new ZonalTable(p, max_weight));
  return *slot;
}

double ZonalTable::series_coefficients(const double* eigs,
                                       double* q_out) const {
  const int n = partition_count();
  double cx = 0.0;
  for (int i = 0; i < p_; ++i) {
    if (!(eigs[i] >= 0.0)) {
      throw DomainError("zonal series: eigenvalues must be nonnegative");
    }
    cx = std::max(cx, eigs[i]);
  }
  if (cx <= 0.0) cx = 1.0;  // all-zero argument: only the empty partition
  std::vector<double> cur(n, 0.0), nxt(n);
  std::vector<double> pw(max_weight_ + 1);
  cur[0] = 1.0;
  for (int level = 1; level <= p_; ++level) {
    const double xn = eigs[level - 1] / cx;
    pw[0] = 1.0;
    for (int k = 1; k <= max_weight_; ++k) pw[k] = pw[k - 1] * xn;
    std::fill(nxt.begin(), nxt.end(), 0.0);
    for (const Edge& e : edges_[level - 1]) {
      nxt[e.target] += e.psi * cur[e.source] * pw[e.degree];
    }
    cur.swap(nxt);
  }
  for (int i = 0; i < n; ++i) q_out[i] = factor_[i] * cur[i];
  return std::log(cx);
}

void ZonalTable::inverse_pochhammer(double a, std::vector<double>& u) const {
  const int n = partition_count();
  u.resize(n);
  u[0] = 1.0;
  // parents precede children (lower weight, and the table groups by weight)
  for (int i = 1; i < n; ++i) {
    u[i] = u[poch_parent_[i]] / (a + poch_term_[i]);
  }
}

double ZonalTable::eval_from_coefficients(const double* q, double a,
                                          double log_z,
                                          const HypergeomConfig& cfg,
                                          bool* converged) const {
  std::vector<double> u;
  inverse_pochhammer(a, u);
  return eval_with_pochhammer(q, u, log_z, cfg, converged);
}

double ZonalTable::eval_with_pochhammer(const double* q,
                                        const std::vector<double>& u,
                                        double log_z,
                                        const HypergeomConfig& cfg,
                                        bool* converged) const {
  const int cap = std::min(cfg.max_weight, max_weight_);
  // per-weight partial sums S_k = sum_{|kappa|=k} q_kappa / (a)_kappa;
  // partitions are grouped by weight so each group is a contiguous range
  std::vector<double> logterm(cap + 1, -INFINITY);
  int idx = 0;
  const int n = partition_count();
  double running_max = -INFINITY;
  int last = cap;
  for (int k = 0; k <= cap; ++k) {
    double s = 0.0;
    while (idx < n && weights_[idx] == k) {
      s += q[idx] * u[idx];
      ++idx;
    }
    // k = 0 contributes log(s) alone even when log_z = -inf (zero argument)
    if (s > 0.0) logterm[k] = std::log(s) + (k > 0 ? k * log_z : 0.0);
    running_max = std::max(running_max, logterm[k]);
    // adaptive early stop: two consecutive weights below tolerance
    if (k >= 4 && logterm[k] < running_max + std::log(cfg.relative_tol) &&
        logterm[k - 1] < running_max + std::log(cfg.relative_tol)) {
      last = k;
      break;
    }
    last = k;
  }
  double total = 0.0;
  for (int k = 0; k <= last; ++k) total += std::exp(logterm[k] - running_max);
  const double log_f = running_max + std::log(total);
  // converged when the final weight's share of the sum is below tolerance
  *converged = !(std::exp(logterm[last] - log_f) > cfg.relative_tol);
  return log_f;
}

double log_hyp0f1_eigs(double a, const double* eigs, int p,
                       const HypergeomConfig& cfg) {
  if (!(a > 0.5 * (p - 1))) {
    throw DomainError("log_hyp0f1: a must exceed (p-1)/2");
  }
  const ZonalTable& table = ZonalTable::get(p, cfg.max_weight);
  std::vector<double> q(table.partition_count());
  const double log_scale = table.series_coefficients(eigs, q.data());
  bool converged = false;
  const double v =
      table.eval_from_coefficients(q.data(), a, log_scale, cfg, &converged);
  if (!converged) {
    throw TruncationNotConverged(
        "log_hyp0f1: series not converged at max_weight " +
        std::to_string(cfg.max_weight) + "; argument too large");
  }
  return v;
}

double log_hyp0f1_matrix(double a, const Eigen::MatrixXd& arg,
                         const HypergeomConfig& cfg) {
  if (arg.rows() != arg.cols() || arg.rows() == 0) {
    throw DimensionMismatch("log_hyp0f1_matrix: argument must be square");
  }
  const int p = static_cast<int>(arg.rows());
  const double scale = std::max(arg.cwiseAbs().maxCoeff(), 1.0);
  std::vector<double> eigs(p);
  if ((arg - arg.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(arg);
    if (solver.info() != Eigen::Success) {
      throw ConvergenceFailure("log_hyp0f1_matrix: eigensolver failed");
    }
    for (int i = 0; i < p; ++i) eigs[i] = std::max(solver.eigenvalues()(i), 0.0);
  } else {
    // non-symmetric but similar to a symmetric PSD product: eigenvalues are
    // real and nonnegative up to rounding dust
    Eigen::EigenSolver<Eigen::MatrixXd> solver(arg);
    if (solver.info() != Eigen::Success) {
      throw ConvergenceFailure("log_hyp0f1_matrix: eigensolver failed");
    }
    for (int i = 0; i < p; ++i) {
      const auto ev = solver.eigenvalues()(i);
      if (std::abs(ev.imag()) > 1e-8 * scale || ev.real() < -1e-8 * scale) {
        throw DomainError(
            "log_hyp0f1_matrix: argument has complex or negative eigenvalues");
      }
      eigs[i] = std::max(ev.real(), 0.0);
    }
  }
  return log_hyp0f1_eigs(a, eigs.data(), p, cfg);
}

}  // namespace cwish
