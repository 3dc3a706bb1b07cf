#include "cwish/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cwish/errors.hpp"
#include "cwish/rng.hpp"

namespace cwish {

namespace {

constexpr double kGmmRidge = 1e-6;

std::vector<int> distinct_indices(Rng& rng, int n, int k) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.index(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

struct KmeansRun {
  std::vector<int> labels;  // 0-based
  double wcss = std::numeric_limits<double>::infinity();
};

KmeansRun lloyd(const std::vector<Eigen::VectorXd>& x, int k, Rng rng) {
  const int n = static_cast<int>(x.size());
  const int d = static_cast<int>(x[0].size());
  std::vector<Eigen::VectorXd> centers;
  centers.reserve(k);
  for (int idx : distinct_indices(rng, n, k)) centers.push_back(x[idx]);

  std::vector<int> labels(n, -1);
  for (int round = 0; round < 200; ++round) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (x[i] - centers[0]).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double dist = (x[i] - centers[c]).squaredNorm();
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    if (!changed && round > 0) break;
    // recompute centroids; re-seed any emptied cluster at the point
    // farthest from its current centroid
    std::vector<Eigen::VectorXd> sums(k, Eigen::VectorXd::Zero(d));
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      sums[labels[i]] += x[i];
      ++counts[labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centers[c] = sums[c] / counts[c];
        continue;
      }
      int farthest = 0;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        const double dist = (x[i] - centers[labels[i]]).squaredNorm();
        if (dist > far_d) {
          far_d = dist;
          farthest = i;
        }
      }
      centers[c] = x[farthest];
      labels[farthest] = c;
    }
  }
  KmeansRun run;
  run.labels = labels;
  run.wcss = 0.0;
  for (int i = 0; i < n; ++i) {
    run.wcss += (x[i] - centers[labels[i]]).squaredNorm();
  }
  return run;
}

double log_gaussian(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                    const Eigen::LLT<Eigen::MatrixXd>& chol) {
  const int d = static_cast<int>(x.size());
  const Eigen::VectorXd half = chol.matrixL().solve(x - mean);
  double log_det = 0.0;
  for (int i = 0; i < d; ++i) {
    log_det += std::log(chol.matrixL()(i, i));
  }
  return -0.5 * half.squaredNorm() - log_det -
         0.5 * d * std::log(2.0 * M_PI);
}

Eigen::MatrixXd pooled_covariance(const std::vector<Eigen::VectorXd>& x) {
  const int n = static_cast<int>(x.size());
  const int d = static_cast<int>(x[0].size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& v : x) mean += v;
  mean /= n;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& v : x) cov += (v - mean) * (v - mean).transpose();
  cov /= std::max(1, n - 1);
  cov.diagonal().array() += kGmmRidge;
  return cov;
}

struct GmmRun {
  std::vector<int> labels;  // 0-based
  double loglik = -std::numeric_limits<double>::infinity();
};

GmmRun gmm_em(const std::vector<Eigen::VectorXd>& x, int k, Rng rng) {
  const int n = static_cast<int>(x.size());
  const int d = static_cast<int>(x[0].size());
  const Eigen::MatrixXd pooled = pooled_covariance(x);

  std::vector<Eigen::VectorXd> means;
  means.reserve(k);
  for (int idx : distinct_indices(rng, n, k)) means.push_back(x[idx]);
  std::vector<Eigen::MatrixXd> covs(k, pooled);
  std::vector<double> weights(k, 1.0 / k);

  Eigen::MatrixXd resp(n, k);
  double prev = -std::numeric_limits<double>::infinity();
  for (int round = 0; round < 200; ++round) {
    // E-step in log space
    std::vector<Eigen::LLT<Eigen::MatrixXd>> chols;
    chols.reserve(k);
    for (int c = 0; c < k; ++c) {
      Eigen::LLT<Eigen::MatrixXd> llt(covs[c]);
      if (llt.info() != Eigen::Success) {
        covs[c] = pooled;
        llt.compute(covs[c]);
      }
      chols.push_back(std::move(llt));
    }
    double loglik = 0.0;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd level(k);
      for (int c = 0; c < k; ++c) {
        level(c) = std::log(std::max(weights[c], 1e-300)) +
                   log_gaussian(x[i], means[c], chols[c]);
      }
      const double peak = level.maxCoeff();
      const double sum = (level.array() - peak).exp().sum();
      resp.row(i) = ((level.array() - peak).exp() / sum).matrix();
      loglik += peak + std::log(sum);
    }
    // M-step with ridge regularization
    for (int c = 0; c < k; ++c) {
      const double mass = resp.col(c).sum();
      weights[c] = mass / n;
      if (mass < 1e-10) {  // degenerate component: reset
        means[c] = x[static_cast<int>(rng.index(n))];
        covs[c] = pooled;
        continue;
      }
      Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
      for (int i = 0; i < n; ++i) mu += resp(i, c) * x[i];
      mu /= mass;
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
      for (int i = 0; i < n; ++i) {
        cov += resp(i, c) * (x[i] - mu) * (x[i] - mu).transpose();
      }
      cov /= mass;
      cov.diagonal().array() += kGmmRidge;
      means[c] = mu;
      covs[c] = cov;
    }
    if (std::abs(loglik - prev) <= 1e-8 * (1.0 + std::abs(loglik))) {
      prev = loglik;
      break;
    }
    prev = loglik;
  }

  GmmRun run;
  run.loglik = prev;
  run.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int c = 1; c < k; ++c) {
      if (resp(i, c) > resp(i, best)) best = c;
    }
    run.labels[i] = best;
  }
  return run;
}

}  // namespace

Partitioning log_euclidean_classify(const std::vector<SpdMatrix>& data,
                                    const std::vector<SpdMatrix>& means) {
  if (data.empty() || means.empty()) {
    throw DomainError("log_euclidean_classify: empty inputs");
  }
  std::vector<Eigen::MatrixXd> mean_logs;
  mean_logs.reserve(means.size());
  for (const auto& m : means) {
    if (m.dim() != data[0].dim()) {
      throw DimensionMismatch("log_euclidean_classify: dimension mismatch");
    }
    mean_logs.push_back(matrix_log(m));
  }
  Partitioning labels;
  labels.reserve(data.size());
  for (const auto& a : data) {
    const Eigen::MatrixXd a_log = matrix_log(a);
    int best = 0;
    double best_d = frobenius_sq(a_log, mean_logs[0]);
    for (std::size_t k = 1; k < mean_logs.size(); ++k) {
      const double dist = frobenius_sq(a_log, mean_logs[k]);
      if (dist < best_d) {
        best_d = dist;
        best = static_cast<int>(k);
      }
    }
    labels.push_back(best + 1);
  }
  return labels;
}

std::vector<Eigen::VectorXd> eigenvalue_features(
    const std::vector<SpdMatrix>& data) {
  std::vector<Eigen::VectorXd> features;
  features.reserve(data.size());
  for (const auto& m : data) features.push_back(eigensystem(m).first);
  return features;
}

Partitioning kmeans_eigen(const std::vector<SpdMatrix>& data, int n_clusters,
                          std::uint64_t seed, int restarts) {
  const int n = static_cast<int>(data.size());
  if (n_clusters < 1 || n_clusters > n) {
    throw DomainError("kmeans_eigen: need 1 <= n_clusters <= data size");
  }
  if (restarts < 1) throw DomainError("kmeans_eigen: restarts must be >= 1");
  const std::vector<Eigen::VectorXd> x = eigenvalue_features(data);
  const Rng root(seed);
  KmeansRun best;
  for (int r = 0; r < restarts; ++r) {
    KmeansRun run = lloyd(x, n_clusters, root.derive(r));
    if (run.wcss < best.wcss) best = std::move(run);
  }
  Partitioning labels(n);
  for (int i = 0; i < n; ++i) labels[i] = best.labels[i] + 1;
  return labels;
}

Partitioning gmm_eigen(const std::vector<SpdMatrix>& data, int n_clusters,
                       std::uint64_t seed, int restarts) {
  const int n = static_cast<int>(data.size());
  if (n_clusters < 1 || n_clusters > n) {
    throw DomainError("gmm_eigen: need 1 <= n_clusters <= data size");
  }
  if (restarts < 1) throw DomainError("gmm_eigen: restarts must be >= 1");
  const std::vector<Eigen::VectorXd> x = eigenvalue_features(data);
  const Rng root(seed);
  GmmRun best;
  for (int r = 0; r < restarts; ++r) {
    GmmRun run = gmm_em(x, n_clusters, root.derive(r));
    if (run.loglik > best.loglik) best = std::move(run);
  }
  Partitioning labels(n);
  for (int i = 0; i < n; ++i) labels[i] = best.labels[i] + 1;
  return labels;
}

double rand_index(const Partitioning& a, const Partitioning& b) {
  if (a.size() != b.size()) {
    throw LengthMismatch("rand_index: partitions have different lengths");
  }
  const int n = static_cast<int>(a.size());
  if (n < 2) throw DomainError("rand_index: need at least 2 observations");
  std::int64_t agree = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const bool together_a = a[i] == a[j];
      const bool together_b = b[i] == b[j];
      if (together_a == together_b) ++agree;
    }
  }
  return static_cast<double>(agree) /
         (static_cast<double>(n) * (n - 1) / 2.0);
}

}  // namespace cwish
