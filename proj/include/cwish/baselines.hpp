#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cwish/spd.hpp"

namespace cwish {

/// A clustering of T observations; labels are positive integers but need
/// not be contiguous.
using Partitioning = std::vector<int>;

/// Nearest-mean classification under the log-Euclidean metric:
/// label_t = argmin_k ||matrix_log(A_t) - matrix_log(S_k)||_F, ties to the
/// smallest k. Labels are 1-based.
Partitioning log_euclidean_classify(const std::vector<SpdMatrix>& data,
                                    const std::vector<SpdMatrix>& means);

/// Descending eigenvalue vector of each matrix — the feature map shared by
/// the clustering baselines.
std::vector<Eigen::VectorXd> eigenvalue_features(
    const std::vector<SpdMatrix>& data);

/// Lloyd's K-means on eigenvalue vectors; best of `restarts` seeded random
/// initializations by within-cluster sum of squares. An emptied cluster is
/// re-seeded at the point farthest from its centroid. Deterministic under
/// `seed`.
Partitioning kmeans_eigen(const std::vector<SpdMatrix>& data, int n_clusters,
                          std::uint64_t seed, int restarts = 10);

/// Full-covariance Gaussian mixture on eigenvalue vectors (EM, 1e-6 * I
/// ridge on every component covariance, MAP labels, best of `restarts` by
/// log-likelihood). A component that degenerates is reset to the
/// regularized pooled covariance. Deterministic under `seed`.
Partitioning gmm_eigen(const std::vector<SpdMatrix>& data, int n_clusters,
                       std::uint64_t seed, int restarts = 10);

/// Plain Rand index: the fraction of the T(T-1)/2 observation pairs on
/// which the two partitions agree (both together or both apart).
/// Symmetric and invariant to relabeling. Throws LengthMismatch.
double rand_index(const Partitioning& a, const Partitioning& b);

}  // namespace cwish
