#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "tcdesc/error.hpp"
#include "tcdesc/knn.hpp"

namespace tcdesc {
namespace {

TEST(PairwiseDistances, IdenticalOrthogonalAntipodal) {
  const DenseMatrix x{{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}};
  const DistanceMatrix d = pairwise_distances(x, x);
  EXPECT_EQ(d(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(d(0, 1), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(d(0, 2), 2.0);
}

TEST(PairwiseDistances, IdenticalRandomUnitVectorsGiveZero) {
  std::mt19937_64 rng(1);
  const DenseMatrix x = oracle::random_unit_rows(50, 32, rng);
  const DistanceMatrix d = pairwise_distances(x, x);
  for (std::size_t i = 0; i < x.rows(); ++i) EXPECT_EQ(d(i, i), 0.0);
}

TEST(PairwiseDistances, NonUnitRowIsNamed) {
  const DenseMatrix x{{1.0, 0.0}, {0.5, 0.5}};
  try {
    pairwise_distances(x, x);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidInput);
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
  }
}

TEST(PairwiseDistances, SymmetricZeroDiagonalAndMatchesDirectDistance) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const DenseMatrix x = oracle::random_unit_rows(12, 6, rng);
    const DistanceMatrix d = pairwise_distances(x, x);
    for (std::size_t i = 0; i < 12; ++i) {
      EXPECT_EQ(d(i, i), 0.0);
      for (std::size_t j = 0; j < 12; ++j) {
        EXPECT_EQ(d(i, j), d(j, i));
        const std::vector<double> xi(x.row(i).begin(), x.row(i).end());
        const std::vector<double> xj(x.row(j).begin(), x.row(j).end());
        EXPECT_NEAR(d(i, j), oracle::direct_distance(xi, xj), 1e-7);
      }
    }
  }
}

TEST(TopK, CollinearNearestFirst) {
  // Points on a great circle at angles 0, 0.3, 1.0.
  const DenseMatrix x{{1.0, 0.0},
                      {std::cos(0.3), std::sin(0.3)},
                      {std::cos(1.0), std::sin(1.0)}};
  const auto sets = top_k_within(x, 1);
  EXPECT_EQ(sets[0].neighbor_indices, std::vector<std::size_t>{1});
}

TEST(TopK, TiesBrokenByLowerIndex) {
  DenseMatrix x(5, 3);
  for (std::size_t i = 0; i < 5; ++i) x(i, 0) = 1.0;
  const auto sets = top_k_within(x, 2);
  EXPECT_EQ(sets[0].neighbor_indices, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(sets[3].neighbor_indices, (std::vector<std::size_t>{0, 1}));
}

TEST(TopK, KOutOfRange) {
  std::mt19937_64 rng(3);
  const DenseMatrix x = oracle::random_unit_rows(4, 3, rng);
  for (const std::size_t k : {std::size_t{0}, std::size_t{4}, std::size_t{10}}) {
    try {
      top_k_within(x, k);
      FAIL() << "expected an error for k=" << k;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
    }
  }
}

TEST(TopK, MatchesFullSortAndInvariants) {
  std::mt19937_64 rng(4);
  const DenseMatrix x = oracle::random_unit_rows(16, 8, rng);
  const auto sets = top_k_within(x, 5);
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_EQ(sets[i].anchor_index, i);
    EXPECT_EQ(sets[i].neighbor_indices, oracle::brute_force_knn(x, i, 5));
    EXPECT_TRUE(std::is_sorted(sets[i].neighbor_distances.begin(),
                               sets[i].neighbor_distances.end()));
    EXPECT_EQ(std::find(sets[i].neighbor_indices.begin(),
                        sets[i].neighbor_indices.end(), i),
              sets[i].neighbor_indices.end());
  }
}

TEST(TopK, WorkersDoNotChangeResult) {
  std::mt19937_64 rng(5);
  const DenseMatrix x = oracle::random_unit_rows(40, 8, rng);
  const auto one = top_k_within(x, 6, 1);
  const auto four = top_k_within(x, 6, 4);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    EXPECT_EQ(one[i].neighbor_indices, four[i].neighbor_indices);
    EXPECT_EQ(one[i].neighbor_distances, four[i].neighbor_distances);
  }
}

TEST(TopKProperty, InvariantToAppendingFarPoints) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 10;
    const std::size_t k = 3;
    // Cluster near the north pole, then append points far in the south.
    DenseMatrix x(n + 4, 4);
    std::normal_distribution<double> jitter(0.0, 0.05);
    for (std::size_t i = 0; i < n + 4; ++i) {
      const double pole = i < n ? 1.0 : -1.0;
      double sq = 0.0;
      for (std::size_t d = 0; d < 4; ++d) {
        x(i, d) = (d == 0 ? pole : 0.0) + jitter(rng);
        sq += x(i, d) * x(i, d);
      }
      for (std::size_t d = 0; d < 4; ++d) x(i, d) /= std::sqrt(sq);
    }
    DenseMatrix head(n, 4);
    std::copy(x.data().begin(), x.data().begin() + n * 4, head.data().begin());
    const auto small = top_k_within(head, k);
    const auto big = top_k_within(x, k);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(small[i].neighbor_indices, big[i].neighbor_indices);
    }
  }
}

TEST(TopKProperty, PermutationEquivariance) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 12;
    const DenseMatrix x = oracle::random_unit_rows(n, 5, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    // Row perm[i] of y is row i of x.
    DenseMatrix y(n, 5);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(x.row(i).begin(), x.row(i).end(), y.row(perm[i]).begin());
    }
    const auto sx = top_k_within(x, 4);
    const auto sy = top_k_within(y, 4);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::size_t> mapped;
      for (const auto j : sx[i].neighbor_indices) mapped.push_back(perm[j]);
      EXPECT_EQ(sy[perm[i]].neighbor_indices, mapped);
    }
  }
}

}  // namespace
}  // namespace tcdesc
