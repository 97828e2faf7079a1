#pragma once

// Constrained least-squares estimator
//
//   minimize   sum_{l,k} (y_{l,k} - <B_{l,k}, X_k>)^2
//   subject to ||X||_{inf,F} <= alpha,  ||X||_$ <= beta,
//
// solved by ADMM on the lifted form with a PSD copy Z of the stacked variable
// [[W1, X], [X^T, W2]] and dual Psi. The X-update decouples into one
// norm-constrained least-squares problem per block.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "blocklr/admm.hpp"
#include "blocklr/core.hpp"
#include "blocklr/norms.hpp"
#include "blocklr/sensing.hpp"

namespace blocklr {

struct EstimatorConfig : AdmmSettings {
  double alpha = 1.0;
  double beta = 1.0;
  double lambda_bisect_tol = 1e-8;
  /// Rank of the truncated backprojection used as warm start; 0 = no truncation.
  Index init_rank = 0;

  void validate() const {
    AdmmSettings::validate();
    if (!(alpha > 0) || !(beta > 0)) throw DomainError("estimator: alpha and beta must be positive");
    if (!(lambda_bisect_tol > 0)) throw DomainError("lambda_bisect_tol must be positive");
    if (init_rank < 0) throw DomainError("init_rank must be >= 0");
  }
};

/// Thin SVD of the L x (M*N) operator whose rows are vec(B_{l,k})^T, per block.
template <typename Scalar>
struct BlockLsFactor {
  Mat<Scalar> left;             // L x p
  Vec<Scalar> singular_values;  // p
  Mat<Scalar> right;            // (M*N) x p
  Index rows = 0;               // M
  Index cols = 0;               // N
};

template <typename Scalar>
class BlockLsCache {
 public:
  explicit BlockLsCache(const SensingEnsemble<Scalar>& ens) {
    const auto& d = ens.dims();
    factors_.reserve(d.K);
    for (Index k = 0; k < d.K; ++k) {
      auto svd = thin_svd(ens.vectorized(k).transpose());
      factors_.push_back({std::move(svd.U), std::move(svd.singular_values),
                          std::move(svd.V), d.M, d.N});
    }
  }

  const BlockLsFactor<Scalar>& operator[](Index k) const { return factors_[k]; }
  Index size() const { return Index(factors_.size()); }

 private:
  std::vector<BlockLsFactor<Scalar>> factors_;
};

template <typename Scalar>
struct BlockLsSolution {
  Mat<Scalar> X;  // M x N
  Scalar lambda = 0;
};

/// Minimizes ||y - B vec(X)||^2 - <Psi12, X> + (rho/2)||Z12 - X||_F^2 over
/// ||X||_F <= alpha. For multiplier lambda the minimizer is
///   vec X(lambda) = (2 B^T B + (rho + lambda) I)^{-1} (2 B^T y + vec Psi12 + rho vec Z12),
/// applied through the thin SVD B = P S Q^T; ||X(lambda)||_F decreases in
/// lambda, so lambda* is located by bisection.
template <typename Scalar, typename DerivedY, typename DerivedPsi, typename DerivedZ>
BlockLsSolution<Scalar> block_ls_solve(const BlockLsFactor<Scalar>& f,
                                       const Eigen::MatrixBase<DerivedY>& y,
                                       const Eigen::MatrixBase<DerivedPsi>& psi12,
                                       const Eigen::MatrixBase<DerivedZ>& z12, Scalar rho,
                                       Scalar alpha, Scalar tol) {
  if (!(alpha > Scalar(0))) throw DomainError("block_ls_solve: alpha must be positive");
  if (!(rho > Scalar(0))) throw DomainError("block_ls_solve: rho must be positive");
  const Index mn = f.rows * f.cols;
  if (y.size() != f.left.rows() || psi12.rows() != f.rows || psi12.cols() != f.cols ||
      z12.rows() != f.rows || z12.cols() != f.cols) {
    throw DimensionMismatch("block_ls_solve: inputs do not match the cached block");
  }

  Vec<Scalar> rhs(mn);
  {
    const Mat<Scalar> psi = psi12, z = z12;
    rhs = Eigen::Map<const Vec<Scalar>>(psi.data(), mn) +
          rho * Eigen::Map<const Vec<Scalar>>(z.data(), mn);
  }
  const Vec<Scalar> sy = f.singular_values.cwiseProduct(f.left.transpose() * y);
  rhs.noalias() += Scalar(2) * (f.right * sy);

  const Vec<Scalar> coeff = f.right.transpose() * rhs;
  const Vec<Scalar> perp = rhs - f.right * coeff;
  const Scalar perp_sq = perp.squaredNorm();
  const Vec<Scalar> curvature = Scalar(2) * f.singular_values.array().square();

  auto norm_at = [&](Scalar lambda) {
    const Scalar shift = rho + lambda;
    const Scalar in_range =
        (coeff.array() / (curvature.array() + shift)).matrix().squaredNorm();
    return std::sqrt(in_range + perp_sq / (shift * shift));
  };

  Scalar lambda = 0;
  if (norm_at(Scalar(0)) > alpha) {
    Scalar lo = 0;
    Scalar hi = std::max(Scalar(0), rhs.norm() / alpha - rho);
    int doublings = 0;
    while (norm_at(hi) > alpha) {
      if (++doublings > 60) {
        throw NumericalFailure("block_ls_solve: cannot bracket the multiplier", mn);
      }
      hi = hi > Scalar(0) ? Scalar(2) * hi : Scalar(1);
    }
    lambda = hi;
    for (int i = 0; i < 500; ++i) {
      const Scalar mid = Scalar(0.5) * (lo + hi);
      if (!(lo < mid && mid < hi)) break;
      const Scalar gap = norm_at(mid) - alpha;
      if (std::abs(gap) <= tol * alpha) {
        lambda = mid;
        break;
      }
      if (gap > Scalar(0)) {
        lo = mid;
      } else {
        hi = mid;
      }
      lambda = hi;
    }
  }

  const Scalar shift = rho + lambda;
  const Vec<Scalar> x = f.right * (coeff.array() / (curvature.array() + shift)).matrix() +
                        perp / shift;
  return {Eigen::Map<const Mat<Scalar>>(x.data(), f.rows, f.cols), lambda};
}

template <typename Scalar>
struct FeasibilityReport {
  Scalar inf_frob = 0;          // ||X_hat||_{inf,F}
  Scalar certificate_min_eig = 0;  // min eigenvalue of [[W1, X_hat], [X_hat^T, W2]]
  Scalar trace_slack_w1 = 0;    // beta - tr W1
  Scalar trace_slack_w2 = 0;    // min_k (beta - tr W2_k)
};

template <typename Scalar>
struct EstimateResult {
  BlockMatrix<Scalar> X_hat;
  Scalar objective = 0;
  int iters = 0;
  double primal_residual = 0;
  double dual_residual = 0;
  double primal_tol = 0;
  double dual_tol = 0;
  double rho = 0;
  FeasibilityReport<Scalar> feasibility;
};

/// Thrown when the estimator ADMM reaches max_iter; carries the last iterate.
template <typename Scalar>
class EstimateNotConverged : public NonConvergence {
 public:
  explicit EstimateNotConverged(EstimateResult<Scalar> partial)
      : NonConvergence("estimate", partial.iters, partial.primal_residual,
                       partial.dual_residual),
        partial_(std::move(partial)) {}

  const EstimateResult<Scalar>& partial() const { return partial_; }

 private:
  EstimateResult<Scalar> partial_;
};

/// sum_{l,k} (y_{l,k} - <B_{l,k}, X_k>)^2.
template <typename Scalar>
Scalar data_fit(const SensingEnsemble<Scalar>& ens, const MeasurementSet<Scalar>& ms,
                const BlockMatrix<Scalar>& x) {
  require_matching(x, ens);
  require_matching(ens, ms);
  Scalar total = 0;
  for (Index k = 0; k < x.blocks(); ++k) {
    const Mat<Scalar> xk = x.block(k);
    const Eigen::Map<const Vec<Scalar>> v(xk.data(), xk.size());
    total += (ms.y.col(k) - ens.vectorized(k).transpose() * v).squaredNorm();
  }
  return total;
}

namespace detail {

template <typename Scalar>
FeasibilityReport<Scalar> feasibility_of(const Mat<Scalar>& stacked, Index m, Index n,
                                         Index k_blocks, Scalar beta) {
  FeasibilityReport<Scalar> rep;
  const BlockMatrix<Scalar> x(stacked.topRightCorner(m, n * k_blocks), n);
  rep.inf_frob = inf_frob_norm(x);
  rep.certificate_min_eig = min_eigenvalue<Scalar>(stacked);
  rep.trace_slack_w1 = beta - stacked.topLeftCorner(m, m).trace();
  rep.trace_slack_w2 = beta;
  for (Index k = 0; k < k_blocks; ++k) {
    rep.trace_slack_w2 = std::min<Scalar>(
        rep.trace_slack_w2, beta - stacked.block(m + k * n, m + k * n, n, n).trace());
  }
  return rep;
}

}  // namespace detail

template <typename Scalar>
EstimateResult<Scalar> estimate(const SensingEnsemble<Scalar>& ens,
                                const MeasurementSet<Scalar>& ms, const EstimatorConfig& cfg) {
  cfg.validate();
  require_matching(ens, ms);
  const auto& d = ens.dims();
  const Index m = d.M, n = d.N, k_blocks = d.K, c = n * k_blocks, dim = m + c;
  const Scalar alpha = Scalar(cfg.alpha), beta = Scalar(cfg.beta);

  const BlockLsCache<Scalar> cache(ens);

  // Warm start: backprojection, optionally rank-truncated, pulled into the
  // alpha-ball block by block.
  BlockMatrix<Scalar> x = backproject(ens, ms);
  if (cfg.init_rank > 0) x = truncate_rank(x, std::min(cfg.init_rank, std::min(m, c)));
  for (Index k = 0; k < k_blocks; ++k) {
    const Scalar bn = x.block(k).norm();
    if (bn > alpha) x.block(k) *= alpha / bn;
  }
  Mat<Scalar> stacked(dim, dim);
  stacked.setZero();
  stacked.topLeftCorner(m, m).diagonal().setConstant(beta / Scalar(m));
  stacked.bottomRightCorner(c, c).diagonal().setConstant(beta / Scalar(n));
  stacked.topRightCorner(m, c) = x.matrix();
  stacked.bottomLeftCorner(c, m) = x.matrix().transpose();
  Mat<Scalar> psd_copy = psd_project(SymMatrix<Scalar>(stacked)).matrix();
  Mat<Scalar> dual = Mat<Scalar>::Zero(dim, dim);
  Mat<Scalar> stacked_prev = stacked;

  double rho = cfg.rho0;
  ResidualStatus res;
  int it = 0;
  auto snapshot = [&]() {
    EstimateResult<Scalar> out;
    out.X_hat = x;
    out.objective = data_fit(ens, ms, x);
    out.iters = it;
    out.primal_residual = res.primal;
    out.dual_residual = res.dual;
    out.primal_tol = res.primal_tol;
    out.dual_tol = res.dual_tol;
    out.rho = rho;
    out.feasibility = detail::feasibility_of<Scalar>(stacked, m, n, k_blocks, beta);
    return out;
  };

  for (it = 1; it <= cfg.max_iter; ++it) {
    for (Index k = 0; k < k_blocks; ++k) {
      x.block(k) = block_ls_solve<Scalar>(cache[k], ms.y.col(k),
                                          dual.block(0, m + k * n, m, n),
                                          psd_copy.block(0, m + k * n, m, n), Scalar(rho),
                                          alpha, Scalar(cfg.lambda_bisect_tol))
                       .X;
    }
    const Mat<Scalar> target = psd_copy + dual / Scalar(rho);
    stacked_prev = stacked;
    update_trace_blocks<Scalar>(target, m, n, k_blocks, beta, stacked);
    stacked.topRightCorner(m, c) = x.matrix();
    stacked.bottomLeftCorner(c, m) = x.matrix().transpose();

    psd_copy = psd_project(SymMatrix<Scalar>(stacked - dual / Scalar(rho))).matrix();
    dual += Scalar(rho) * (psd_copy - stacked);

    res = admm_residuals<Scalar>(psd_copy, stacked, stacked_prev, dual, rho, cfg);
    if (res.converged()) return snapshot();
    if (cfg.balances_at(it)) rho = balance_step(rho, res, cfg);
  }
  it = cfg.max_iter;
  throw EstimateNotConverged<Scalar>(snapshot());
}

}  // namespace blocklr
