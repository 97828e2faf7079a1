#include <gtest/gtest.h>

#include "blocklr/admm.hpp"
#include "blocklr/core.hpp"
#include "test_util.hpp"

namespace blocklr {
namespace {

using testing::gaussian;
using testing::random_symmetric;

TEST(SymMatrix, SymmetrizesWithinTolerance) {
  Mat<double> a = random_symmetric(5, 1);
  a(0, 1) += 1e-14;
  const SymMatrixd s(a);
  EXPECT_DOUBLE_EQ(s(0, 1), s(1, 0));
}

TEST(SymMatrix, RejectsAsymmetricInput) {
  Mat<double> a = random_symmetric(4, 2);
  a(2, 3) += 1e-3;
  EXPECT_THROW(SymMatrixd{a}, DomainError);
  EXPECT_THROW(SymMatrixd{Mat<double>::Zero(2, 3)}, DimensionMismatch);
}

TEST(BlockMatrix, BlockViewsAndShape) {
  Mat<double> a(2, 6);
  a << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
  const BlockMatrixd x(a, 2);
  EXPECT_EQ(x.blocks(), 3);
  EXPECT_EQ(x.shape(), "2x(2*3)");
  EXPECT_EQ(x.block(1)(1, 0), 9);
  EXPECT_THROW(BlockMatrixd(a, 4), DimensionMismatch);
  EXPECT_THROW(BlockMatrixd(2, 0, 3), DomainError);
}

TEST(BlockMatrix, ArithmeticChecksShapes) {
  const BlockMatrixd a(Mat<double>::Ones(2, 4), 2);
  const BlockMatrixd b(Mat<double>::Ones(2, 4), 1);
  EXPECT_THROW(a + b, DimensionMismatch);
  const BlockMatrixd c = 2.0 * a - a;
  EXPECT_DOUBLE_EQ(c.matrix().sum(), 8.0);
}

// Projection onto a closed convex set C is characterized by
// <A - P, Q - P> <= 0 for every Q in C.
TEST(PsdProject, VariationalInequalityAgainstRandomPsd) {
  for (int trial = 0; trial < 20; ++trial) {
    const SymMatrixd a(random_symmetric(7, 100 + trial));
    const Mat<double> p = psd_project(a).matrix();
    EXPECT_GE(min_eigenvalue(p), -1e-12);
    for (int q_seed = 0; q_seed < 10; ++q_seed) {
      const Mat<double> g = gaussian(7, 3, 1000 * trial + q_seed);
      const Mat<double> q = g * g.transpose();
      EXPECT_LE(((a.matrix() - p).cwiseProduct(q - p)).sum(), 1e-10);
    }
  }
}

TEST(PsdProject, MoreauDecomposition) {
  const SymMatrixd a(random_symmetric(9, 7));
  const Mat<double> p = psd_project(a).matrix();
  const Mat<double> n = p - a.matrix();  // projection onto the negative part
  EXPECT_GE(min_eigenvalue(n), -1e-10);
  EXPECT_NEAR(p.cwiseProduct(n).sum(), 0.0, 1e-10);
}

TEST(PsdProject, FixesPsdAndZeroesNsd) {
  const Mat<double> g = gaussian(6, 6, 3);
  const SymMatrixd psd(g * g.transpose());
  EXPECT_LE((psd_project(psd).matrix() - psd.matrix()).norm(), 1e-10 * psd.matrix().norm());
  const SymMatrixd nsd(-psd.matrix());
  EXPECT_EQ(psd_project(nsd).matrix().norm(), 0.0);
}

TEST(TraceBallProject, VariationalInequalityAgainstRandomFeasible) {
  for (int trial = 0; trial < 20; ++trial) {
    const Mat<double> s = random_symmetric(6, 200 + trial);
    const SymMatrixd a(s + 3.0 * Mat<double>::Identity(6, 6));
    const double beta = 5.0;
    const Mat<double> p = trace_ball_project(a, beta).matrix();
    EXPECT_LE(p.trace(), beta + 1e-12);
    for (int q_seed = 0; q_seed < 10; ++q_seed) {
      Mat<double> q = random_symmetric(6, 5000 + 37 * trial + q_seed);
      const double excess = std::max(q.trace() - beta, 0.0);
      q.diagonal().array() -= excess / 6.0 + 0.1;
      ASSERT_LE(q.trace(), beta);
      EXPECT_LE(((a.matrix() - p).cwiseProduct(q - p)).sum(), 1e-10);
    }
  }
}

TEST(TraceBallProject, InsideBallIsIdentityAndNegativeBetaThrows) {
  const SymMatrixd a(Mat<double>::Identity(3, 3));
  EXPECT_EQ(trace_ball_project(a, 3.0).matrix(), a.matrix());
  EXPECT_THROW(trace_ball_project(a, -1.0), DomainError);
}

TEST(ThinSvd, ReconstructsAndTruncates) {
  const Mat<double> a = gaussian(7, 5, 11);
  const auto svd = thin_svd(a);
  EXPECT_LE((svd.truncated(5) - a).norm(), 1e-12 * a.norm());
  const Mat<double> t2 = svd.truncated(2);
  // Eckart-Young: error equals the tail of the spectrum.
  EXPECT_NEAR((a - t2).squaredNorm(), svd.singular_values.tail(3).squaredNorm(), 1e-10);
  Mat<double> bad = a;
  bad(0, 0) = std::nan("");
  EXPECT_THROW(thin_svd(bad), DomainError);
}

TEST(TruncateRank, KeepsBlockLayout) {
  const BlockMatrixd x(gaussian(4, 6, 12), 3);
  const BlockMatrixd t = truncate_rank(x, 1);
  EXPECT_TRUE(t.same_shape(x));
  EXPECT_LE(thin_svd(t.matrix()).singular_values(1), 1e-12);
}

TEST(BalanceStep, RelativeAndRawModes) {
  AdmmSettings s;
  ResidualStatus res{10.0, 1.0, 1.0, 1.0};
  EXPECT_DOUBLE_EQ(balance_step(1.0, res, s), 1.0);  // ratio 10 is not > 10
  res.primal = 20.0;
  EXPECT_DOUBLE_EQ(balance_step(1.0, res, s), 2.0);
  res = {1.0, 20.0, 1.0, 1.0};
  EXPECT_DOUBLE_EQ(balance_step(1.0, res, s), 0.5);
  // Relative mode compares r / primal_tol with s / dual_tol.
  res = {20.0, 1.0, 10.0, 0.01};
  EXPECT_DOUBLE_EQ(balance_step(1.0, res, s), 0.5);
  s.balance_relative = false;
  EXPECT_DOUBLE_EQ(balance_step(1.0, res, s), 2.0);
}

TEST(AdmmSettings, Validation) {
  AdmmSettings s;
  s.rho0 = 0;
  EXPECT_THROW(s.validate(), DomainError);
  s = {};
  s.balance_tau = 1.0;
  EXPECT_THROW(s.validate(), DomainError);
  s = {};
  s.balance_every = 0;
  EXPECT_THROW(s.validate(), DomainError);
}

TEST(AdmmSettings, BalancingScheduleStopsAtLimit) {
  AdmmSettings s;
  s.balance_every = 5;
  s.balance_until = 20;
  EXPECT_FALSE(s.balances_at(4));
  EXPECT_TRUE(s.balances_at(5));
  EXPECT_TRUE(s.balances_at(20));
  EXPECT_FALSE(s.balances_at(25));
}

TEST(PsdProject, SmallExamples) {
  Mat<double> a(2, 2);
  a << 1, 0, 0, -1;
  Mat<double> expected(2, 2);
  expected << 1, 0, 0, 0;
  EXPECT_LE((psd_project(SymMatrixd(a)).matrix() - expected).norm(), 1e-14);
  a << 0, 1, 1, 0;
  expected << 0.5, 0.5, 0.5, 0.5;
  EXPECT_LE((psd_project(SymMatrixd(a)).matrix() - expected).norm(), 1e-14);
  EXPECT_NEAR(min_eigenvalue(a), -1.0, 1e-14);
}

TEST(StackCertificate, Layout) {
  const Mat<double> w1 = Mat<double>::Identity(2, 2);
  const Mat<double> x = gaussian(2, 3, 4);
  const Mat<double> w2 = 2.0 * Mat<double>::Identity(3, 3);
  const Mat<double> s = stack_certificate(w1, x, w2);
  EXPECT_EQ(s.topRightCorner(2, 3), x);
  EXPECT_EQ(s.bottomLeftCorner(3, 2), x.transpose());
  EXPECT_EQ(s(4, 4), 2.0);
}

}  // namespace
}  // namespace blocklr
