#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "blocklr/baselines.hpp"
#include "blocklr/experiments.hpp"
#include "test_util.hpp"

namespace blocklr {
namespace {

using testing::gaussian;
using testing::random_low_rank;

TEST(SpectralColumnSpace, ExactLowRankInput) {
  const BlockMatrixd x = random_low_rank(9, 2, 4, 2, 1);
  const Mat<double> u = spectral_column_space(x, 2);
  EXPECT_LE(gram_deviation(u), 1e-12);
  const Mat<double> col = thin_svd(x.matrix()).U.leftCols(2);
  EXPECT_LE(subspace_angle(col, u), 1e-8);
  // Residual of X after projecting onto span(U) vanishes.
  EXPECT_LE((x.matrix() - u * (u.transpose() * x.matrix())).norm(), 1e-10 * x.norm());
  EXPECT_THROW(spectral_column_space(x, 0), DomainError);
  EXPECT_THROW(spectral_column_space(x, 10), DomainError);
}

TEST(SpectralColumnSpace, RecoversTrueFactorFromNoiselessTruth) {
  const ProblemDims dims{12, 3, 5, 1, 3};
  const auto gt = gen_ground_truth(dims, 2);
  EXPECT_LE(subspace_angle(gt.U, spectral_column_space(gt.X, 3)), 1e-8);
}

TEST(SpectralColumnSpace, AngleGrowsWithNoise) {
  const ProblemDims dims{12, 2, 6, 20, 1};
  std::vector<double> medians;
  for (double snr_db : {30.0, 10.0, 0.0}) {
    std::vector<double> angles;
    for (int s = 0; s < 10; ++s) {
      const auto gt = gen_ground_truth(dims, 10 + s);
      const auto ens = gen_ensemble(dims, 20 + s);
      const auto ms = measure(gt.X, ens, sigma_for_snr_db(gt.X, snr_db), 30 + s);
      angles.push_back(subspace_angle(gt.U, spectral_column_space(backproject(ens, ms), 1)));
    }
    medians.push_back(median_of(angles));
  }
  EXPECT_LT(medians[0], medians[1]);
  EXPECT_LT(medians[1], medians[2]);
}

TEST(SpectralInit, ReassemblesAndIsBalanced) {
  const BlockMatrixd x0(gaussian(7, 12, 3), 3);
  const auto init = spectral_init(x0, 2);
  const BlockMatrixd truncated = truncate_rank(x0, 2);
  EXPECT_LE((init.assemble() - truncated).norm(), 1e-10 * (1 + truncated.norm()));
  double v_sq = 0;
  for (const auto& v : init.V) v_sq += v.squaredNorm();
  EXPECT_NEAR(init.U.squaredNorm(), v_sq, 1e-10 * (1 + v_sq));
  EXPECT_EQ(init.V.size(), 4u);
}

TEST(SpectralInit, ZeroInputGivesZeroFactors) {
  const auto init = spectral_init(BlockMatrixd(5, 2, 3), 2);
  EXPECT_EQ(init.U.norm(), 0.0);
  for (const auto& v : init.V) EXPECT_EQ(v.norm(), 0.0);
}

FactoredIterate<double> random_iterate(Index m, Index n, Index k, Index r, Rng& rng) {
  FactoredIterate<double> it;
  it.U = testing::gaussian(m, r, rng);
  for (Index i = 0; i < k; ++i) it.V.push_back(testing::gaussian(n, r, rng));
  return it;
}

TEST(FactoredObjective, GradientMatchesCentralDifferences) {
  const ProblemDims dims{5, 2, 3, 8, 2};
  const auto gt = gen_ground_truth(dims, 40);
  const auto ens = gen_ensemble(dims, 41);
  const auto ms = measure(gt.X, ens, 0.1, 42);
  const FactoredObjective<double> obj{ens, ms};
  Rng rng(43);
  const double h = 1e-6;
  for (int p = 0; p < 5; ++p) {
    auto it = random_iterate(5, 2, 3, 2, rng);
    FactoredIterate<double> grad;
    obj.value_and_gradient(it, grad);
    // Collect analytic and numeric gradients entry by entry.
    std::vector<double> analytic, numeric;
    auto probe = [&](double& entry, double g) {
      const double saved = entry;
      entry = saved + h;
      const double fp = obj.value(it);
      entry = saved - h;
      const double fm = obj.value(it);
      entry = saved;
      analytic.push_back(g);
      numeric.push_back((fp - fm) / (2 * h));
    };
    for (Index j = 0; j < it.U.size(); ++j) probe(it.U.data()[j], grad.U.data()[j]);
    for (Index k = 0; k < 3; ++k)
      for (Index j = 0; j < it.V[k].size(); ++j) probe(it.V[k].data()[j], grad.V[k].data()[j]);
    const Eigen::Map<const Vec<double>> a(analytic.data(), Index(analytic.size()));
    const Eigen::Map<const Vec<double>> n(numeric.data(), Index(numeric.size()));
    EXPECT_LE((a - n).norm(), 1e-5 * a.norm()) << "point " << p;
  }
}

TEST(GdRefine, ExactFactorsAreAFixedPoint) {
  const ProblemDims dims{8, 2, 4, 12, 2};
  const auto gt = gen_ground_truth(dims, 50);
  const auto ens = gen_ensemble(dims, 51);
  const auto ms = measure(gt.X, ens, 0.0, 0);
  FactoredIterate<double> init{gt.U, gt.V};
  FactoredIterate<double> grad;
  const FactoredObjective<double> obj{ens, ms};
  obj.value_and_gradient(init, grad);
  EXPECT_LE(std::sqrt(grad.squared_norm()), 1e-10 * (1 + gt.X.norm()));
  const auto res = gd_refine(ens, ms, init);
  EXPECT_TRUE(res.converged);
  EXPECT_EQ(res.iters, 0);
  EXPECT_EQ(res.iterate.U, gt.U);
}

TEST(GdRefine, ObjectiveNeverIncreases) {
  for (int s = 0; s < 5; ++s) {
    const ProblemDims dims{10, 2, 5, 16, 2};
    const auto gt = gen_ground_truth(dims, 60 + s);
    const auto ens = gen_ensemble(dims, 70 + s);
    const auto ms = measure(gt.X, ens, sigma_for_snr_db(gt.X, 15.0), 80 + s);
    GdConfig cfg;
    cfg.max_iter = 300;
    const auto res = gd_refine(ens, ms, spectral_init(backproject(ens, ms), 2), cfg);
    ASSERT_GE(res.objective_history.size(), 2u);
    for (std::size_t i = 1; i < res.objective_history.size(); ++i) {
      EXPECT_LE(res.objective_history[i], res.objective_history[i - 1]);
    }
    EXPECT_LT(res.objective_history.back(), res.objective_history.front());
  }
}

TEST(GdRefine, ImprovesOnSpectralInNoiselessCase) {
  const ProblemDims dims{10, 2, 8, 30, 1};
  const auto gt = gen_ground_truth(dims, 90);
  const auto ens = gen_ensemble(dims, 91);
  const auto ms = measure(gt.X, ens, 0.0, 0);
  const auto init = spectral_init(backproject(ens, ms), 1);
  const auto res = gd_refine(ens, ms, init);
  const double before = (init.assemble() - gt.X).norm();
  const double after = (res.iterate.assemble() - gt.X).norm();
  EXPECT_LT(after, 0.1 * before);
}

TEST(GdRefine, RejectsMismatchedFactors) {
  const ProblemDims dims{4, 2, 3, 5, 1};
  const auto ens = gen_ensemble(dims, 1);
  const auto ms = measure(BlockMatrixd(4, 2, 3), ens, 0.0, 0);
  FactoredIterate<double> bad;
  bad.U = Mat<double>::Zero(5, 1);
  bad.V.assign(3, Mat<double>::Zero(2, 1));
  EXPECT_THROW(gd_refine(ens, ms, bad), DimensionMismatch);
  GdConfig cfg;
  cfg.armijo_c = 1.5;
  EXPECT_THROW(cfg.validate(), DomainError);
}

TEST(GdRefine, StalledCarriesLastIterate) {
  // 60 shrinks by 0.9 only reduce the step ~500x, far from acceptable.
  const ProblemDims dims{4, 2, 3, 6, 1};
  const auto gt = gen_ground_truth(dims, 100);
  const auto ens = gen_ensemble(dims, 101);
  const auto ms = measure(gt.X, ens, 0.5, 102);
  GdConfig cfg;
  cfg.init_step = 1e300;
  cfg.armijo_shrink = 0.9;
  try {
    gd_refine(ens, ms, spectral_init(backproject(ens, ms), 1), cfg);
    FAIL() << "expected GdStalled";
  } catch (const GdStalled<double>& e) {
    EXPECT_EQ(e.last().iters, 0);
    EXPECT_EQ(e.last().objective_history.size(), 1u);
  }
}

}  // namespace
}  // namespace blocklr
