#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "tcdesc/error.hpp"
#include "tcdesc/linalg.hpp"

namespace tcdesc {
namespace {

TEST(Gram, SingleRow) {
  const DenseMatrix s = gram(DenseMatrix{{1.0, 0.0}});
  ASSERT_EQ(s.rows(), 1u);
  EXPECT_EQ(s(0, 0), 1.0);
}

TEST(Gram, OrthonormalRowsGiveIdentity) {
  EXPECT_EQ(gram(DenseMatrix{{1.0, 0.0}, {0.0, 1.0}}), DenseMatrix::identity(2));
}

TEST(Gram, MatchesDoubleLoopAndIsExactlySymmetric) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    DenseMatrix diffs(4, 3);
    for (double& v : diffs.data()) v = normal(rng);
    const DenseMatrix s = gram(diffs);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        double ref = 0.0;
        for (std::size_t d = 0; d < 3; ++d) ref += diffs(i, d) * diffs(j, d);
        EXPECT_NEAR(s(i, j), ref, 1e-14);
        EXPECT_EQ(s(i, j), s(j, i));
      }
    }
  }
}

TEST(Gram, RejectsNonFinite) {
  DenseMatrix diffs{{1.0, std::numeric_limits<double>::quiet_NaN()}};
  try {
    gram(diffs);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidInput);
  }
}

TEST(SolveSpd, IdentitySystem) {
  const auto r = solve_spd_regularized(DenseMatrix::identity(2), std::vector{1.0, 1.0}, 0.0);
  EXPECT_DOUBLE_EQ(r.solution[0], 1.0);
  EXPECT_DOUBLE_EQ(r.solution[1], 1.0);
  EXPECT_FALSE(r.conditioning_applied);
  EXPECT_EQ(r.regularizer_eps, 0.0);
}

TEST(SolveSpd, Diagonal) {
  const auto r = solve_spd_regularized(DenseMatrix{{2.0, 0.0}, {0.0, 2.0}},
                                       std::vector{1.0, 1.0}, 0.0);
  EXPECT_DOUBLE_EQ(r.solution[0], 0.5);
  EXPECT_DOUBLE_EQ(r.solution[1], 0.5);
}

TEST(SolveSpd, RankOneRegularizedMatchesExplicitInverse) {
  const DenseMatrix s{{1.0, 1.0}, {1.0, 1.0}};
  const double eps = 1e-3;
  const auto r = solve_spd_regularized(s, std::vector{1.0, 1.0}, eps);
  EXPECT_TRUE(r.conditioning_applied);
  // Explicit 2x2 inverse of S + eps*(trace/2)*I.
  const double mu = eps * 2.0 / 2.0;
  const double a = 1.0 + mu, b = 1.0, d = 1.0 + mu;
  const double det = a * d - b * b;
  const double x0 = (d * 1.0 - b * 1.0) / det;
  const double x1 = (-b * 1.0 + a * 1.0) / det;
  EXPECT_NEAR(r.solution[0], x0, 1e-9);
  EXPECT_NEAR(r.solution[1], x1, 1e-9);
}

TEST(SolveSpd, SingularWithoutEpsRetriesWithConditioning) {
  const DenseMatrix s{{1.0, 1.0}, {1.0, 1.0}};
  const auto r = solve_spd_regularized(s, std::vector{1.0, 1.0}, 0.0);
  EXPECT_TRUE(r.conditioning_applied);
  EXPECT_GT(r.regularizer_eps, 0.0);
  for (const double x : r.solution) EXPECT_TRUE(std::isfinite(x));
}

TEST(SolveSpd, ZeroMatrixUsesAbsoluteShift) {
  const auto r = solve_spd_regularized(DenseMatrix(2, 2), std::vector{1.0, 2.0}, 0.5);
  EXPECT_DOUBLE_EQ(r.solution[0], 2.0);
  EXPECT_DOUBLE_EQ(r.solution[1], 4.0);
}

TEST(SolveSpd, IndefiniteMatrixIsSingularError) {
  const DenseMatrix s{{-1.0, 0.0}, {0.0, -1.0}};
  try {
    solve_spd_regularized(s, std::vector{1.0, 1.0}, 0.0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSingularSystem);
  }
}

TEST(SolveSpd, WellConditionedMatchesDenseInverse) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  for (std::size_t k = 1; k <= 32; k += 3) {
    DenseMatrix z(k, k + 4);
    for (double& v : z.data()) v = normal(rng);
    DenseMatrix s = gram(z);
    std::vector<double> rhs(k);
    for (double& v : rhs) v = normal(rng);
    const auto r = solve_spd_regularized(s, rhs, 0.0);
    const DenseMatrix inv = oracle::dense_inverse(s);
    for (std::size_t i = 0; i < k; ++i) {
      double ref = 0.0;
      for (std::size_t j = 0; j < k; ++j) ref += inv(i, j) * rhs[j];
      EXPECT_NEAR(r.solution[i], ref, 1e-10 * std::max(1.0, std::abs(ref))) << "k=" << k;
    }
  }
}

TEST(SolveSpd, InvariantToJointScaling) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 100; ++trial) {
    DenseMatrix z(5, 3);  // rank deficient on purpose
    for (double& v : z.data()) v = normal(rng);
    const DenseMatrix s = gram(z);
    std::vector<double> rhs(5);
    for (double& v : rhs) v = normal(rng);
    const double c = scale(rng);
    DenseMatrix cs = s;
    for (double& v : cs.data()) v *= c;
    std::vector<double> crhs = rhs;
    for (double& v : crhs) v *= c;
    const auto a = solve_spd_regularized(s, rhs, 1e-3);
    const auto b = solve_spd_regularized(cs, crhs, 1e-3);
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_NEAR(a.solution[i], b.solution[i],
                  1e-9 * std::max(1.0, std::abs(a.solution[i])));
    }
  }
}

TEST(L2Norm, Basics) {
  EXPECT_EQ(l2_norm(std::vector{3.0, 4.0}), 5.0);
  EXPECT_EQ(l2_norm(std::vector{0.0, 0.0, 0.0}), 0.0);
}

TEST(L2Norm, MatchesCompensatedSum) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(1 + trial);
    for (double& x : v) x = normal(rng);
    const double ref = oracle::compensated_norm(v);
    EXPECT_NEAR(l2_norm(v), ref, 1e-13 * ref);
  }
}

}  // namespace
}  // namespace tcdesc
