#include <cmath>
#include <vector>

#include <doctest.h>

#include "cwish/baselines.hpp"
#include "cwish/errors.hpp"
#include "cwish/rng.hpp"
#include "helpers.hpp"

using namespace cwish;

namespace {

SpdMatrix diag2(double a, double b) {
  Eigen::MatrixXd m(2, 2);
  m << a, 0.0, 0.0, b;
  return SpdMatrix(m);
}

// Two tight clusters of SPD matrices whose eigenvalue vectors are far apart:
// scaled identity perturbations around diag(1, 0.5) and diag(60, 30).
struct TwoClusters {
  std::vector<SpdMatrix> data;
  Partitioning truth;
};

TwoClusters separated_clusters(int per_cluster, std::uint64_t seed) {
  Rng rng(seed);
  TwoClusters out;
  for (int c = 0; c < 2; ++c) {
    const double scale = c == 0 ? 1.0 : 60.0;
    for (int i = 0; i < per_cluster; ++i) {
      Eigen::MatrixXd m(2, 2);
      const double wiggle = 0.05 * rng.gaussian();
      const double off = 0.02 * rng.gaussian();
      m << scale * (1.0 + wiggle), scale * off, scale * off,
          0.5 * scale * (1.0 + 0.05 * rng.gaussian());
      out.data.emplace_back((m + m.transpose()) / 2.0);
      out.truth.push_back(c + 1);
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("log-Euclidean classifier is exact at the means and breaks ties low") {
  Rng rng(51);
  std::vector<SpdMatrix> means;
  for (int k = 0; k < 3; ++k) means.push_back(test::random_spd(rng, 3, 1.0 + k));
  const Partitioning at_means = log_euclidean_classify(means, means);
  CHECK(at_means == Partitioning{1, 2, 3});

  // log C = (log A + log B)/2 makes C equidistant from A and B
  const SpdMatrix a = diag2(1.0, 1.0);
  const SpdMatrix b = diag2(std::exp(2.0), std::exp(2.0));
  const SpdMatrix c = diag2(std::exp(1.0), std::exp(1.0));
  const Partitioning tie = log_euclidean_classify({c}, {a, b});
  CHECK(tie == Partitioning{1});

  CHECK_THROWS_AS(log_euclidean_classify({}, means), DomainError);
  CHECK_THROWS_AS(log_euclidean_classify({diag2(1, 1)}, means),
                  DimensionMismatch);
}

TEST_CASE("log-Euclidean classifier separates tight clusters") {
  const TwoClusters tc = separated_clusters(8, 52);
  const std::vector<SpdMatrix> means = {diag2(1.0, 0.5), diag2(60.0, 30.0)};
  const Partitioning got = log_euclidean_classify(tc.data, means);
  CHECK(rand_index(got, tc.truth) == 1.0);
}

TEST_CASE("eigenvalue features are the descending spectra") {
  const double theta = 0.7;
  Eigen::MatrixXd rot(2, 2);
  rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  Eigen::MatrixXd m = rot * Eigen::Vector2d(0.25, 3.0).asDiagonal() *
                      rot.transpose();
  const auto feats = eigenvalue_features({SpdMatrix(m), diag2(2.0, 5.0)});
  REQUIRE(feats.size() == 2);
  CHECK(feats[0](0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(feats[0](1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(feats[1](0) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(feats[1](1) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("k-means recovers separated clusters deterministically") {
  const TwoClusters tc = separated_clusters(10, 53);
  const Partitioning got = kmeans_eigen(tc.data, 2, 7, 5);
  REQUIRE(got.size() == tc.data.size());
  CHECK(rand_index(got, tc.truth) == 1.0);
  CHECK(kmeans_eigen(tc.data, 2, 7, 5) == got);

  CHECK_THROWS_AS(kmeans_eigen(tc.data, 0, 7), DomainError);
  CHECK_THROWS_AS(kmeans_eigen(tc.data, 21, 7), DomainError);
  CHECK_THROWS_AS(kmeans_eigen(tc.data, 2, 7, 0), DomainError);
}

TEST_CASE("gmm recovers separated clusters deterministically") {
  const TwoClusters tc = separated_clusters(10, 54);
  const Partitioning got = gmm_eigen(tc.data, 2, 9, 5);
  REQUIRE(got.size() == tc.data.size());
  CHECK(rand_index(got, tc.truth) == 1.0);
  CHECK(gmm_eigen(tc.data, 2, 9, 5) == got);

  CHECK_THROWS_AS(gmm_eigen(tc.data, 0, 9), DomainError);
  CHECK_THROWS_AS(gmm_eigen(tc.data, 21, 9), DomainError);
}

TEST_CASE("single-cluster fits label everything together") {
  const TwoClusters tc = separated_clusters(4, 55);
  CHECK(kmeans_eigen(tc.data, 1, 3) == Partitioning(8, 1));
  CHECK(gmm_eigen(tc.data, 1, 3) == Partitioning(8, 1));
}

TEST_CASE("rand index counts agreeing pairs") {
  // pairs of (1,1,2,2) vs (1,2,1,2): only {1,4} and {2,3} agree -> 2/6
  CHECK(rand_index({1, 1, 2, 2}, {1, 2, 1, 2}) ==
        doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(rand_index({1, 1, 2}, {5, 5, 9}) == 1.0);  // relabel-invariant
  CHECK(rand_index({1, 1}, {1, 2}) == 0.0);
  CHECK(rand_index({2, 7, 7, 2, 1}, {2, 7, 7, 2, 1}) == 1.0);
  // symmetry on a random pair of partitions
  Rng rng(56);
  Partitioning a, b;
  for (int i = 0; i < 40; ++i) {
    a.push_back(1 + static_cast<int>(rng.index(3)));
    b.push_back(1 + static_cast<int>(rng.index(4)));
  }
  CHECK(rand_index(a, b) == rand_index(b, a));

  CHECK_THROWS_AS(rand_index({1, 2}, {1, 2, 3}), LengthMismatch);
  CHECK_THROWS_AS(rand_index({1}, {1}), DomainError);
}

}  // TEST_SUITE
