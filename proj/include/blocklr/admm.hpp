#pragma once

// Pieces shared by the two ADMM solvers. Both split a symmetric stacked
// variable S = [[W1, X], [X^T, W2]] from a PSD copy of it, so their step-size
// control, stopping rule and W-block updates are identical.

#include <cmath>
#include <limits>
#include <string>

#include "blocklr/core.hpp"

namespace blocklr {

struct AdmmSettings {
  double rho0 = 1.0;
  double eps_abs = 1e-7;
  double eps_rel = 1e-6;
  int max_iter = 5000;
  double balance_mu = 10.0;
  double balance_tau = 2.0;
  /// Compare r/primal_tol with s/dual_tol instead of r with s.
  bool balance_relative = true;
  /// rho may change only every balance_every iterations and is frozen after
  /// balance_until. Switching on every iteration can bounce rho between two
  /// values near the optimum and undo convergence.
  int balance_every = 10;
  int balance_until = std::numeric_limits<int>::max();

  bool balances_at(int it) const { return it <= balance_until && it % balance_every == 0; }

  void validate() const {
    if (!(rho0 > 0) || !(eps_abs > 0) || !(eps_rel > 0)) {
      throw DomainError("ADMM settings: rho0, eps_abs and eps_rel must be positive");
    }
    if (max_iter < 1) throw DomainError("ADMM settings: max_iter must be >= 1");
    if (!(balance_mu > 1) || !(balance_tau > 1)) {
      throw DomainError("ADMM settings: balance_mu and balance_tau must exceed 1");
    }
    if (balance_every < 1 || balance_until < 0) {
      throw DomainError("ADMM settings: balance_every must be >= 1 and balance_until >= 0");
    }
  }
};

struct ResidualStatus {
  double primal = 0;
  double dual = 0;
  double primal_tol = 0;
  double dual_tol = 0;

  bool converged() const { return primal <= primal_tol && dual <= dual_tol; }
};

/// r = psd_copy - stacked, s = rho * (change in stacked).
template <typename Scalar>
ResidualStatus admm_residuals(const Mat<Scalar>& psd_copy, const Mat<Scalar>& stacked,
                              const Mat<Scalar>& stacked_prev, const Mat<Scalar>& dual,
                              double rho, const AdmmSettings& s) {
  const double root_dim = std::sqrt(double(stacked.rows()));
  ResidualStatus out;
  out.primal = double((psd_copy - stacked).norm());
  out.dual = rho * double((stacked - stacked_prev).norm());
  out.primal_tol = root_dim * s.eps_abs +
                   s.eps_rel * std::max(double(psd_copy.norm()), double(stacked.norm()));
  out.dual_tol = root_dim * s.eps_abs + s.eps_rel * double(dual.norm());
  return out;
}

/// Residual balancing. The dual variable enters the Lagrangian unscaled, so it
/// is left untouched when rho changes.
inline double balance_step(double rho, const ResidualStatus& res, const AdmmSettings& s) {
  double r = res.primal, d = res.dual;
  if (s.balance_relative) {
    r /= res.primal_tol;
    d /= res.dual_tol;
  }
  if (d == 0) return rho;
  if (r > s.balance_mu * d) return rho * s.balance_tau;
  if (d > s.balance_mu * r) return rho / s.balance_tau;
  return rho;
}

/// Overwrites the W1 and W2 blocks of `stacked` with the trace-ball projections
/// of `target` (diagonal blocks) and copies the off-diagonal W2 blocks.
template <typename Scalar>
void update_trace_blocks(const Mat<Scalar>& target, Index rows, Index block_cols,
                         Index blocks, Scalar beta, Mat<Scalar>& stacked) {
  const Index m = rows, n = block_cols;
  stacked.topLeftCorner(m, m) =
      trace_ball_project(SymMatrix<Scalar>(target.topLeftCorner(m, m)), beta).matrix();
  stacked.bottomRightCorner(n * blocks, n * blocks) =
      target.bottomRightCorner(n * blocks, n * blocks);
  for (Index k = 0; k < blocks; ++k) {
    auto diag = stacked.block(m + k * n, m + k * n, n, n);
    diag = trace_ball_project(SymMatrix<Scalar>(Mat<Scalar>(diag)), beta).matrix();
  }
}

/// [[W1, X], [X^T, W2]].
template <typename Scalar>
Mat<Scalar> stack_certificate(const Mat<Scalar>& w1, const Mat<Scalar>& x,
                              const Mat<Scalar>& w2) {
  const Index m = w1.rows(), c = w2.rows();
  Mat<Scalar> s(m + c, m + c);
  s.topLeftCorner(m, m) = w1;
  s.topRightCorner(m, c) = x;
  s.bottomLeftCorner(c, m) = x.transpose();
  s.bottomRightCorner(c, c) = w2;
  return s;
}

/// Minimum eigenvalue of a (nearly) symmetric matrix.
template <typename Scalar>
Scalar min_eigenvalue(const Mat<Scalar>& s) {
  const Mat<Scalar> sym = Scalar(0.5) * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw NumericalFailure("eigenvalue computation failed", s.rows());
  }
  return es.eigenvalues()(0);
}

}  // namespace blocklr
