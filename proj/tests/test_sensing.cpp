#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "blocklr/sensing.hpp"
#include "test_util.hpp"

namespace blocklr {
namespace {

using testing::gaussian;
using testing::random_low_rank;

TEST(ProblemDims, Validation) {
  EXPECT_NO_THROW((ProblemDims{4, 2, 3, 5, 2}.validate()));
  EXPECT_THROW((ProblemDims{4, 2, 3, 0, 2}.validate()), DomainError);
  EXPECT_THROW((ProblemDims{2, 1, 1, 5, 3}.validate()), DomainError);
}

TEST(GroundTruth, RankOneAndOrthonormal) {
  const ProblemDims dims{12, 3, 4, 1, 1};
  const auto gt = gen_ground_truth(dims, 42);
  const auto sv = thin_svd(gt.X.matrix()).singular_values;
  EXPECT_LE(sv(1), 1e-10 * sv(0));
  EXPECT_LE((gt.U.transpose() * gt.U - Mat<double>::Identity(1, 1)).norm(), 1e-10);
}

TEST(GroundTruth, FactorsAssembleAndAreDeterministic) {
  const ProblemDims dims{10, 2, 5, 1, 3};
  const auto a = gen_ground_truth(dims, 42);
  const auto b = gen_ground_truth(dims, 42);
  EXPECT_EQ(a.X.matrix(), b.X.matrix());
  EXPECT_LE((a.U.transpose() * a.U - Mat<double>::Identity(3, 3)).norm(), 1e-10);
  for (Index k = 0; k < dims.K; ++k) {
    EXPECT_LE((a.X.block(k) - a.U * a.V[k].transpose()).norm(), 1e-14);
  }
  EXPECT_NE(gen_ground_truth(dims, 43).X.matrix(), a.X.matrix());
}

TEST(Ensemble, EntryMomentsAndDeterminism) {
  const ProblemDims dims{10, 10, 10, 10, 1};
  const auto ens = gen_ensemble(dims, 5);
  double sum = 0, sq = 0;
  Index count = 0;
  for (Index k = 0; k < dims.K; ++k) {
    sum += ens.vectorized(k).sum();
    sq += ens.vectorized(k).squaredNorm();
    count += ens.vectorized(k).size();
  }
  ASSERT_EQ(count, 10000);
  const double mean = sum / double(count);
  EXPECT_LE(std::abs(mean), 4.0 / std::sqrt(double(count)));
  EXPECT_NEAR(sq / double(count) - mean * mean, 1.0, 0.1);
  const auto again = gen_ensemble(dims, 5);
  for (Index k = 0; k < dims.K; ++k) EXPECT_EQ(again.vectorized(k), ens.vectorized(k));
}

TEST(Ensemble, MatrixViewMatchesVectorizedColumn) {
  const ProblemDims dims{3, 2, 2, 4, 1};
  const auto ens = gen_ensemble(dims, 6);
  const Mat<double> b = ens.B(2, 1);
  EXPECT_EQ(b(1, 1), ens.vectorized(1)(1 + 3 * 1, 2));
}

// Independent two-loop oracle: y = sum_ij B_ij X_ij.
double inner(const Mat<double>& b, const Mat<double>& x) {
  double s = 0;
  for (Index i = 0; i < b.rows(); ++i)
    for (Index j = 0; j < b.cols(); ++j) s += b(i, j) * x(i, j);
  return s;
}

TEST(Measure, MatchesEntrywiseInnerProducts) {
  const ProblemDims dims{4, 3, 3, 6, 2};
  const auto ens = gen_ensemble(dims, 7);
  const BlockMatrixd x = random_low_rank(4, 3, 3, 2, 8);
  const auto ms = measure(x, ens, 0.0, 0);
  for (Index l = 0; l < dims.L; ++l)
    for (Index k = 0; k < dims.K; ++k)
      EXPECT_NEAR(ms.y(l, k), inner(ens.B(l, k), x.block(k)), 1e-12);
}

TEST(Measure, Examples) {
  const ProblemDims dims{4, 2, 3, 5, 1};
  const auto ens = gen_ensemble(dims, 9);
  EXPECT_EQ(measure(BlockMatrixd(4, 2, 3), ens, 0.0, 0).y.norm(), 0.0);

  BlockMatrixd single(4, 2, 3);
  single.block(1) = gaussian(4, 2, 10);
  const auto ms = measure(single, ens, 0.0, 0);
  EXPECT_EQ(ms.y.col(0).norm(), 0.0);
  EXPECT_EQ(ms.y.col(2).norm(), 0.0);

  BlockMatrixd self(4, 2, 3);
  for (Index k = 0; k < 3; ++k) self.block(k) = ens.B(0, k) / ens.B(0, k).norm();
  const auto ys = measure(self, ens, 0.0, 0);
  for (Index k = 0; k < 3; ++k) EXPECT_NEAR(ys.y(0, k), ens.B(0, k).norm(), 1e-12);
}

TEST(Measure, NoiseLevelAndValidation) {
  const ProblemDims dims{2, 2, 20, 500, 1};
  const auto ens = gen_ensemble(dims, 11);
  const BlockMatrixd x(2, 2, 20);
  const auto ms = measure(x, ens, 0.5, 12);
  const double sd = std::sqrt(ms.y.squaredNorm() / double(ms.y.size()));
  EXPECT_NEAR(sd, 0.5, 0.5 * 0.05);
  EXPECT_THROW(measure(x, ens, -1.0, 0), DomainError);
  EXPECT_THROW(measure(BlockMatrixd(2, 2, 3), ens, 0.0, 0), DimensionMismatch);
}

TEST(SigmaForSnr, Examples) {
  BlockMatrixd x(1, 1, 4);
  x.matrix().setConstant(1.0);  // ||X||_F^2 = K
  EXPECT_NEAR(sigma_for_snr_db(x, 0.0), 1.0, 1e-15);
  EXPECT_NEAR(sigma_for_snr_db(x, 20.0), 0.1, 1e-15);
  EXPECT_LT(sigma_for_snr_db(x, 300.0), 1e-14);
  const BlockMatrixd y = random_low_rank(3, 2, 4, 1, 13);
  EXPECT_NEAR(snr_linear(y, sigma_for_snr_db(y, 13.0)), std::pow(10.0, 1.3), 1e-9);
  EXPECT_THROW(sigma_for_snr_db(BlockMatrixd(1, 1, 2), 10.0), UndefinedValue);
}

TEST(Backproject, MatchesTwoLoopOracle) {
  const ProblemDims dims{3, 2, 4, 7, 1};
  const auto ens = gen_ensemble(dims, 14);
  const auto ms = measure(random_low_rank(3, 2, 4, 1, 15), ens, 0.1, 16);
  const BlockMatrixd x0 = backproject(ens, ms);
  for (Index k = 0; k < dims.K; ++k) {
    Mat<double> acc = Mat<double>::Zero(3, 2);
    for (Index l = 0; l < dims.L; ++l) acc += ms.y(l, k) * Mat<double>(ens.B(l, k));
    EXPECT_LE((x0.block(k) - acc / double(dims.L)).norm(), 1e-12);
  }
  MeasurementSet<double> zero{Mat<double>::Zero(7, 4), 0.0, 0};
  EXPECT_EQ(backproject(ens, zero).norm(), 0.0);
}

TEST(Backproject, UnbiasedOverEnsembles) {
  const ProblemDims dims{10, 2, 5, 50, 2};
  const auto gt = gen_ground_truth(dims, 17);
  Mat<double> mean = Mat<double>::Zero(10, 10);
  for (int e = 0; e < 200; ++e) {
    const auto ens = gen_ensemble(dims, derive_seed(18, std::uint64_t(e)));
    mean += backproject(ens, measure(gt.X, ens, 0.0, 0)).matrix();
  }
  mean /= 200.0;
  EXPECT_LE((mean - gt.X.matrix()).norm(), 0.1 * gt.X.norm());
}

TEST(Backproject, ErrorShrinksWithMoreMeasurements) {
  auto median_error = [](Index L) {
    std::vector<double> errs;
    for (int t = 0; t < 20; ++t) {
      const ProblemDims dims{8, 2, 4, L, 1};
      const auto gt = gen_ground_truth(dims, 19 + t);
      const auto ens = gen_ensemble(dims, 1000 + t);
      errs.push_back((backproject(ens, measure(gt.X, ens, 0.0, 0)) - gt.X).norm());
    }
    std::nth_element(errs.begin(), errs.begin() + 10, errs.end());
    return errs[10];
  };
  EXPECT_LT(median_error(40), median_error(20));
}

TEST(EstimateAlphaBeta, Examples) {
  const BlockMatrixd x = random_low_rank(5, 2, 3, 2, 20);
  const auto ab = estimate_alpha_beta(x, 2);
  EXPECT_NEAR(ab.alpha, inf_frob_norm(x), 1e-10 * ab.alpha);
  EXPECT_NEAR(ab.beta, dollar_norm(x).value, 1e-4 * ab.beta);

  const auto zero = estimate_alpha_beta(BlockMatrixd(5, 2, 3), 2);
  EXPECT_EQ(zero.alpha, 0.0);
  EXPECT_EQ(zero.beta, 0.0);

  for (int s = 0; s < 5; ++s) {
    const BlockMatrixd noisy(gaussian(6, 8, 21 + s), 2);
    const auto e = estimate_alpha_beta(noisy, 2);
    EXPECT_LE(e.beta, std::sqrt(2.0) * e.alpha * (1 + 1e-3));
  }
  EXPECT_THROW(estimate_alpha_beta(x, 0), DomainError);
}

}  // namespace
}  // namespace blocklr
