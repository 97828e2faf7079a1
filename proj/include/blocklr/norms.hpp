#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "blocklr/admm.hpp"
#include "blocklr/core.hpp"

namespace blocklr {

/// max_k ||X_k||_F.
template <typename Scalar>
Scalar inf_frob_norm(const BlockMatrix<Scalar>& x) {
  Scalar best = 0;
  for (Index k = 0; k < x.blocks(); ++k) best = std::max(best, x.block(k).norm());
  return best;
}

/// sqrt(K) ||X||_{inf,F} / ||X||_F, in [1, sqrt(K)].
template <typename Scalar>
Scalar spikiness(const BlockMatrix<Scalar>& x) {
  const Scalar total = x.norm();
  if (!(total > Scalar(0))) throw UndefinedValue("spikiness of a zero matrix");
  return std::sqrt(Scalar(x.blocks())) * inf_frob_norm(x) / total;
}

/// ||X||_F^2 / (K sigma^2).
template <typename Scalar>
Scalar snr_linear(const BlockMatrix<Scalar>& x, Scalar sigma) {
  if (!(sigma > Scalar(0))) throw DomainError("snr_linear: sigma must be positive");
  return x.matrix().squaredNorm() / (Scalar(x.blocks()) * sigma * sigma);
}

struct DollarNormSolverConfig : AdmmSettings {
  double beta_bisect_tol = 1e-10;

  // Tighter than the estimator: the certificate's PSD defect scales with the
  // primal residual and is checked against an absolute slack.
  DollarNormSolverConfig() {
    eps_abs = 1e-8;
    eps_rel = 1e-7;
  }

  void validate() const {
    AdmmSettings::validate();
    if (!(beta_bisect_tol > 0)) throw DomainError("beta_bisect_tol must be positive");
  }
};

/// The scalar subproblem of the trace-budget update:
///   f(b) = b + rho (tr A - b)_+^2 / (2M) + sum_k rho (tr B_k - b)_+^2 / (2N).
struct TraceBudget {
  double trace_a = 0;
  std::vector<double> trace_b;
  double rho = 1;
  double rows = 1;        // M
  double block_cols = 1;  // N

  double derivative(double b) const {
    double d = 1.0 - rho / rows * std::max(trace_a - b, 0.0);
    for (double t : trace_b) d -= rho / block_cols * std::max(t - b, 0.0);
    return d;
  }

  /// Minimizer over b >= 0 by bisection on the (nondecreasing) derivative.
  double minimize(double tol) const {
    if (derivative(0.0) >= 0.0) return 0.0;
    double lo = 0.0;
    double hi = trace_a;
    for (double t : trace_b) hi = std::max(hi, t);
    double mid = 0.5 * (lo + hi);
    for (int i = 0; i < 400; ++i) {
      mid = 0.5 * (lo + hi);
      if (!(lo < mid && mid < hi)) break;  // interval exhausted in floating point
      const double d = derivative(mid);
      if (std::abs(d) <= tol) break;
      if (d < 0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return mid;
  }
};

template <typename Scalar>
struct DollarNormResult {
  Scalar value = 0;
  SymMatrix<Scalar> W1;
  SymMatrix<Scalar> W2;
  int iters = 0;
  // Residuals and their stopping thresholds, measured on the internally
  // rescaled problem (input divided by its max-block-Frobenius norm).
  double primal_residual = 0;
  double dual_residual = 0;
  double primal_tol = 0;
  double dual_tol = 0;
  double rho = 0;
};

/// ||X||_$ = min beta s.t. tr W1 <= beta, tr W2_k <= beta, [[W1, X], [X^T, W2]] PSD,
/// solved by ADMM over the stacked variable S and a PSD copy E with dual Phi.
///
/// The norm is absolutely homogeneous, so the iteration runs on X / ||X||_{inf,F}
/// and the value and certificates are scaled back. This keeps the relative
/// stopping rule independent of the magnitude of X.
template <typename Scalar>
DollarNormResult<Scalar> dollar_norm(const BlockMatrix<Scalar>& x,
                                     const DollarNormSolverConfig& cfg = {}) {
  cfg.validate();
  if (!x.matrix().allFinite()) throw DomainError("dollar_norm: non-finite input");
  const Index m = x.rows(), n = x.block_cols(), k_blocks = x.blocks();
  const Index c = n * k_blocks;
  const Index dim = m + c;

  DollarNormResult<Scalar> out;
  const Scalar scale = inf_frob_norm(x);
  if (scale == Scalar(0)) {
    out.W1 = SymMatrix<Scalar>(Mat<Scalar>::Zero(m, m));
    out.W2 = SymMatrix<Scalar>(Mat<Scalar>::Zero(c, c));
    out.rho = cfg.rho0;
    return out;
  }

  Mat<Scalar> psd_copy = Mat<Scalar>::Zero(dim, dim);
  Mat<Scalar> dual = Mat<Scalar>::Zero(dim, dim);
  Mat<Scalar> stacked = Mat<Scalar>::Zero(dim, dim);
  stacked.topRightCorner(m, c) = x.matrix() / scale;
  stacked.bottomLeftCorner(c, m) = stacked.topRightCorner(m, c).transpose();
  Mat<Scalar> stacked_prev = stacked;

  TraceBudget budget;
  budget.trace_b.resize(k_blocks);
  budget.rows = double(m);
  budget.block_cols = double(n);

  double rho = cfg.rho0;
  Scalar beta = 0;
  ResidualStatus res;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    const Mat<Scalar> target = psd_copy + dual / Scalar(rho);
    budget.rho = rho;
    budget.trace_a = double(target.topLeftCorner(m, m).trace());
    for (Index k = 0; k < k_blocks; ++k) {
      budget.trace_b[k] = double(target.block(m + k * n, m + k * n, n, n).trace());
    }
    beta = Scalar(budget.minimize(cfg.beta_bisect_tol));

    stacked_prev = stacked;
    update_trace_blocks<Scalar>(target, m, n, k_blocks, beta, stacked);

    psd_copy = psd_project(SymMatrix<Scalar>(stacked - dual / Scalar(rho))).matrix();
    dual += Scalar(rho) * (psd_copy - stacked);

    res = admm_residuals<Scalar>(psd_copy, stacked, stacked_prev, dual, rho, cfg);
    if (res.converged()) {
      out.value = scale * beta;
      out.W1 = SymMatrix<Scalar>(scale * stacked.topLeftCorner(m, m));
      out.W2 = SymMatrix<Scalar>(scale * stacked.bottomRightCorner(c, c));
      out.iters = it;
      out.primal_residual = res.primal;
      out.dual_residual = res.dual;
      out.primal_tol = res.primal_tol;
      out.dual_tol = res.dual_tol;
      out.rho = rho;
      return out;
    }
    if (cfg.balances_at(it)) rho = balance_step(rho, res, cfg);
  }
  throw NonConvergence("dollar_norm", cfg.max_iter, res.primal, res.dual);
}

}  // namespace blocklr
