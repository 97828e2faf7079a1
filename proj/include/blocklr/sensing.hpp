#pragma once

// Block-wise Gaussian sensing: y_{l,k} = <B_{l,k}, X_k> + w_{l,k}.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "blocklr/core.hpp"
#include "blocklr/norms.hpp"
#include "blocklr/rng.hpp"

namespace blocklr {

struct ProblemDims {
  Index M = 1;  // rows
  Index N = 1;  // columns per block
  Index K = 1;  // blocks
  Index L = 1;  // measurements per block
  Index r = 1;  // rank

  void validate() const {
    if (M < 1 || N < 1 || K < 1 || L < 1 || r < 1) {
      throw DomainError("problem dimensions must be positive");
    }
    if (r > std::min(M, N * K)) {
      throw DomainError("rank " + std::to_string(r) + " exceeds min(M, N*K)");
    }
  }

  std::string str() const {
    return "M=" + std::to_string(M) + " N=" + std::to_string(N) + " K=" +
           std::to_string(K) + " L=" + std::to_string(L) + " r=" + std::to_string(r);
  }
};

template <typename Scalar>
struct GroundTruth {
  Mat<Scalar> U;               // M x r, orthonormal columns
  std::vector<Mat<Scalar>> V;  // K matrices N x r
  BlockMatrix<Scalar> X;       // X_k = U V_k^T
};

/// X = U [V_1; ...; V_K]^T with U Haar-distributed on the Stiefel manifold and
/// V_k i.i.d. standard Gaussian.
template <typename Scalar = double>
GroundTruth<Scalar> gen_ground_truth(const ProblemDims& dims, std::uint64_t seed) {
  dims.validate();
  Rng rng(seed);
  Mat<Scalar> g(dims.M, dims.r);
  for (Index j = 0; j < g.cols(); ++j)
    for (Index i = 0; i < g.rows(); ++i) g(i, j) = Scalar(rng.normal());
  Eigen::HouseholderQR<Mat<Scalar>> qr(g);
  Mat<Scalar> u = qr.householderQ() * Mat<Scalar>::Identity(dims.M, dims.r);
  // Sign convention R_ii > 0 makes the Q factor Haar distributed.
  const Mat<Scalar> r_factor = qr.matrixQR().topRows(dims.r).template triangularView<Eigen::Upper>();
  for (Index j = 0; j < dims.r; ++j) {
    if (r_factor(j, j) < Scalar(0)) u.col(j) *= Scalar(-1);
  }

  GroundTruth<Scalar> out;
  out.U = std::move(u);
  out.X = BlockMatrix<Scalar>(dims.M, dims.N, dims.K);
  out.V.reserve(dims.K);
  for (Index k = 0; k < dims.K; ++k) {
    Mat<Scalar> v(dims.N, dims.r);
    for (Index j = 0; j < v.cols(); ++j)
      for (Index i = 0; i < v.rows(); ++i) v(i, j) = Scalar(rng.normal());
    out.X.block(k) = out.U * v.transpose();
    out.V.push_back(std::move(v));
  }
  return out;
}

/// The L*K sensing matrices. Block k is stored as an (M*N) x L matrix whose
/// column l is vec(B_{l,k}) (column-major), i.e. the transpose of the stacked
/// operator whose rows are the vectorized sensing matrices.
template <typename Scalar>
class SensingEnsemble {
 public:
  SensingEnsemble(const ProblemDims& dims, std::uint64_t seed,
                  std::vector<Mat<Scalar>> vectorized)
      : dims_(dims), seed_(seed), vectorized_(std::move(vectorized)) {}

  const ProblemDims& dims() const { return dims_; }
  std::uint64_t seed() const { return seed_; }

  Eigen::Map<const Mat<Scalar>> B(Index l, Index k) const {
    return {vectorized_[k].col(l).data(), dims_.M, dims_.N};
  }

  /// (M*N) x L; column l = vec(B_{l,k}).
  const Mat<Scalar>& vectorized(Index k) const { return vectorized_[k]; }

 private:
  ProblemDims dims_;
  std::uint64_t seed_;
  std::vector<Mat<Scalar>> vectorized_;
};

/// B_{l,k} with i.i.d. N(0, 1) entries; draws in order l, then k, then
/// column-major entries.
template <typename Scalar = double>
SensingEnsemble<Scalar> gen_ensemble(const ProblemDims& dims, std::uint64_t seed) {
  dims.validate();
  Rng rng(seed);
  const Index mn = dims.M * dims.N;
  std::vector<Mat<Scalar>> blocks(dims.K, Mat<Scalar>(mn, dims.L));
  for (Index l = 0; l < dims.L; ++l)
    for (Index k = 0; k < dims.K; ++k)
      for (Index i = 0; i < mn; ++i) blocks[k](i, l) = Scalar(rng.normal());
  return SensingEnsemble<Scalar>(dims, seed, std::move(blocks));
}

template <typename Scalar>
struct MeasurementSet {
  Mat<Scalar> y;  // L x K
  Scalar sigma = 0;
  std::uint64_t seed = 0;

  Index measurements() const { return y.rows(); }
  Index blocks() const { return y.cols(); }
};

template <typename Scalar>
void require_matching(const BlockMatrix<Scalar>& x, const SensingEnsemble<Scalar>& ens) {
  const auto& d = ens.dims();
  if (x.rows() != d.M || x.block_cols() != d.N || x.blocks() != d.K) {
    throw DimensionMismatch("matrix " + x.shape() + " does not match ensemble " +
                            std::to_string(d.M) + "x(" + std::to_string(d.N) + "*" +
                            std::to_string(d.K) + ")");
  }
}

template <typename Scalar>
void require_matching(const SensingEnsemble<Scalar>& ens, const MeasurementSet<Scalar>& ms) {
  const auto& d = ens.dims();
  if (ms.y.rows() != d.L || ms.y.cols() != d.K) {
    throw DimensionMismatch("measurements " + shape_string(ms.y.rows(), ms.y.cols()) +
                            " do not match ensemble L x K = " + shape_string(d.L, d.K));
  }
}

/// y_{l,k} = <B_{l,k}, X_k> + sigma * w_{l,k}, w i.i.d. N(0, 1) drawn in order l, k.
template <typename Scalar>
MeasurementSet<Scalar> measure(const BlockMatrix<Scalar>& x, const SensingEnsemble<Scalar>& ens,
                               Scalar sigma, std::uint64_t noise_seed) {
  require_matching(x, ens);
  if (!(sigma >= Scalar(0))) throw DomainError("measure: sigma must be >= 0");
  const auto& d = ens.dims();
  MeasurementSet<Scalar> ms;
  ms.sigma = sigma;
  ms.seed = noise_seed;
  ms.y.resize(d.L, d.K);
  for (Index k = 0; k < d.K; ++k) {
    const Mat<Scalar> xk = x.block(k);
    const Eigen::Map<const Vec<Scalar>> vec_xk(xk.data(), xk.size());
    ms.y.col(k) = ens.vectorized(k).transpose() * vec_xk;
  }
  if (sigma > Scalar(0)) {
    Rng rng(noise_seed);
    for (Index l = 0; l < d.L; ++l)
      for (Index k = 0; k < d.K; ++k) ms.y(l, k) += sigma * Scalar(rng.normal());
  }
  return ms;
}

/// Noise level giving snr_linear(X, sigma) = 10^(snr_db / 10).
template <typename Scalar>
Scalar sigma_for_snr_db(const BlockMatrix<Scalar>& x, Scalar snr_db) {
  const Scalar norm = x.norm();
  if (!(norm > Scalar(0))) throw UndefinedValue("sigma_for_snr_db: zero signal");
  return norm / std::sqrt(Scalar(x.blocks()) * std::pow(Scalar(10), snr_db / Scalar(10)));
}

/// X0 with X0_k = (1/L) sum_l y_{l,k} B_{l,k}.
template <typename Scalar>
BlockMatrix<Scalar> backproject(const SensingEnsemble<Scalar>& ens,
                                const MeasurementSet<Scalar>& ms) {
  require_matching(ens, ms);
  const auto& d = ens.dims();
  BlockMatrix<Scalar> out(d.M, d.N, d.K);
  for (Index k = 0; k < d.K; ++k) {
    const Vec<Scalar> v = ens.vectorized(k) * ms.y.col(k) / Scalar(d.L);
    out.block(k) = Eigen::Map<const Mat<Scalar>>(v.data(), d.M, d.N);
  }
  return out;
}

template <typename Scalar>
struct NormEstimates {
  Scalar alpha = 0;
  Scalar beta = 0;
};

/// Norms of the rank-r truncation of X0.
template <typename Scalar>
NormEstimates<Scalar> estimate_alpha_beta(const BlockMatrix<Scalar>& x0, Index r,
                                          const DollarNormSolverConfig& cfg = {}) {
  if (r < 1 || r > std::min(x0.rows(), x0.cols())) {
    throw DomainError("estimate_alpha_beta: rank " + std::to_string(r) + " out of range");
  }
  const BlockMatrix<Scalar> truncated = truncate_rank(x0, r);
  return {inf_frob_norm(truncated), dollar_norm(truncated, cfg).value};
}

}  // namespace blocklr
