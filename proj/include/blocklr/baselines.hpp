#pragma once

// Comparison methods: the spectral column-space estimate (top left singular
// vectors of the backprojection) and factored gradient descent started from
// the balanced spectral factorization.

#include <cmath>
#include <utility>
#include <vector>

#include "blocklr/core.hpp"
#include "blocklr/sensing.hpp"

namespace blocklr {

template <typename Scalar>
struct FactoredIterate {
  Mat<Scalar> U;               // M x r
  std::vector<Mat<Scalar>> V;  // K matrices N x r

  BlockMatrix<Scalar> assemble() const {
    const Index n = V.front().rows();
    BlockMatrix<Scalar> x(U.rows(), n, Index(V.size()));
    for (Index k = 0; k < x.blocks(); ++k) x.block(k) = U * V[k].transpose();
    return x;
  }

  Scalar squared_norm() const {
    Scalar total = U.squaredNorm();
    for (const auto& v : V) total += v.squaredNorm();
    return total;
  }
};

template <typename Scalar>
Mat<Scalar> spectral_column_space(const BlockMatrix<Scalar>& x0, Index r) {
  if (r < 1 || r > std::min(x0.rows(), x0.cols())) {
    throw DomainError("spectral_column_space: rank out of range");
  }
  return thin_svd(x0.matrix()).U.leftCols(r);
}

/// U = U_r S_r^{1/2}, V_k = (V_r)_k S_r^{1/2} from the rank-r SVD of X0.
template <typename Scalar>
FactoredIterate<Scalar> spectral_init(const BlockMatrix<Scalar>& x0, Index r) {
  if (r < 1 || r > std::min(x0.rows(), x0.cols())) {
    throw DomainError("spectral_init: rank out of range");
  }
  const auto svd = thin_svd(x0.matrix());
  const Vec<Scalar> root = svd.singular_values.head(r).cwiseSqrt();
  FactoredIterate<Scalar> out;
  out.U = svd.U.leftCols(r) * root.asDiagonal();
  const Mat<Scalar> v = svd.V.leftCols(r) * root.asDiagonal();
  const Index n = x0.block_cols();
  for (Index k = 0; k < x0.blocks(); ++k) out.V.push_back(v.middleRows(k * n, n));
  return out;
}

struct GdConfig {
  int max_iter = 2000;
  double armijo_c = 1e-4;
  double armijo_shrink = 0.5;
  double init_step = 0;  // 0 selects 1 / (L (1 + sigma_1(X0))^2)
  double grad_tol = 1e-8;

  void validate() const {
    if (max_iter < 1) throw DomainError("gd: max_iter must be >= 1");
    if (!(armijo_c > 0 && armijo_c < 1)) throw DomainError("gd: armijo_c must be in (0,1)");
    if (!(armijo_shrink > 0 && armijo_shrink < 1)) {
      throw DomainError("gd: armijo_shrink must be in (0,1)");
    }
    if (!(init_step >= 0)) throw DomainError("gd: init_step must be >= 0");
    if (!(grad_tol > 0)) throw DomainError("gd: grad_tol must be positive");
  }
};

inline double default_gd_step(Index measurements, double top_singular_value) {
  const double s = 1.0 + top_singular_value;
  return 1.0 / (double(measurements) * s * s);
}

/// Objective and gradient of f(U, V) = sum_{l,k} (y_{l,k} - <B_{l,k}, U V_k^T>)^2.
template <typename Scalar>
struct FactoredObjective {
  const SensingEnsemble<Scalar>& ens;
  const MeasurementSet<Scalar>& ms;

  Scalar value(const FactoredIterate<Scalar>& it) const {
    Scalar total = 0;
    for (Index k = 0; k < Index(it.V.size()); ++k) total += residual(it, k).squaredNorm();
    return total;
  }

  /// Returns f and writes the gradient into `grad`.
  Scalar value_and_gradient(const FactoredIterate<Scalar>& it,
                            FactoredIterate<Scalar>& grad) const {
    const auto& d = ens.dims();
    grad.U = Mat<Scalar>::Zero(it.U.rows(), it.U.cols());
    grad.V.resize(it.V.size());
    Scalar total = 0;
    for (Index k = 0; k < d.K; ++k) {
      const Vec<Scalar> res = residual(it, k);
      total += res.squaredNorm();
      const Vec<Scalar> g = ens.vectorized(k) * res;
      const Eigen::Map<const Mat<Scalar>> gk(g.data(), d.M, d.N);
      grad.U.noalias() -= Scalar(2) * gk * it.V[k];
      grad.V[k] = Scalar(-2) * gk.transpose() * it.U;
    }
    return total;
  }

  Vec<Scalar> residual(const FactoredIterate<Scalar>& it, Index k) const {
    const Mat<Scalar> xk = it.U * it.V[k].transpose();
    const Eigen::Map<const Vec<Scalar>> v(xk.data(), xk.size());
    return ms.y.col(k) - ens.vectorized(k).transpose() * v;
  }
};

template <typename Scalar>
struct GdResult {
  FactoredIterate<Scalar> iterate;
  std::vector<Scalar> objective_history;  // one entry per accepted iterate
  int iters = 0;
  bool converged = false;  // gradient test met (as opposed to max_iter)
};

/// Thrown when backtracking fails to find a decrease; carries the last iterate.
template <typename Scalar>
class GdStalled : public Error {
 public:
  explicit GdStalled(GdResult<Scalar> last)
      : Error("gd_refine: line search stalled after " + std::to_string(last.iters) +
              " iterations"),
        last_(std::move(last)) {}

  const GdResult<Scalar>& last() const { return last_; }

 private:
  GdResult<Scalar> last_;
};

/// Full-gradient descent with Armijo backtracking. After an accepted step the
/// next trial step is enlarged by 1/armijo_shrink.
template <typename Scalar>
GdResult<Scalar> gd_refine(const SensingEnsemble<Scalar>& ens, const MeasurementSet<Scalar>& ms,
                           FactoredIterate<Scalar> init, const GdConfig& cfg = {}) {
  cfg.validate();
  require_matching(ens, ms);
  const auto& d = ens.dims();
  if (init.U.rows() != d.M || Index(init.V.size()) != d.K) {
    throw DimensionMismatch("gd_refine: initial factors do not match the ensemble");
  }
  for (const auto& v : init.V) {
    if (v.rows() != d.N || v.cols() != init.U.cols()) {
      throw DimensionMismatch("gd_refine: inconsistent right factor shape");
    }
  }

  double step = cfg.init_step;
  if (step == 0) {
    const double top = double(thin_svd(backproject(ens, ms).matrix()).singular_values(0));
    step = default_gd_step(d.L, top);
  }

  const FactoredObjective<Scalar> objective{ens, ms};
  GdResult<Scalar> out;
  out.iterate = std::move(init);
  FactoredIterate<Scalar> grad, trial;
  Scalar f = objective.value_and_gradient(out.iterate, grad);
  out.objective_history.push_back(f);

  for (out.iters = 0; out.iters < cfg.max_iter; ++out.iters) {
    const Scalar gsq = grad.squared_norm();
    if (std::sqrt(gsq) <= Scalar(cfg.grad_tol) * (Scalar(1) + f)) {
      out.converged = true;
      return out;
    }
    bool accepted = false;
    for (int shrinks = 0; shrinks <= 60; ++shrinks) {
      trial.U = out.iterate.U - Scalar(step) * grad.U;
      trial.V.resize(d.K);
      for (Index k = 0; k < d.K; ++k) trial.V[k] = out.iterate.V[k] - Scalar(step) * grad.V[k];
      const Scalar f_trial = objective.value(trial);
      if (f_trial <= f - Scalar(cfg.armijo_c * step) * gsq) {
        accepted = true;
        break;
      }
      step *= cfg.armijo_shrink;
    }
    if (!accepted) throw GdStalled<Scalar>(std::move(out));
    std::swap(out.iterate, trial);
    f = objective.value_and_gradient(out.iterate, grad);
    out.objective_history.push_back(f);
    step /= cfg.armijo_shrink;
  }
  const Scalar gnorm = std::sqrt(grad.squared_norm());
  out.converged = gnorm <= Scalar(cfg.grad_tol) * (Scalar(1) + f);
  return out;
}

}  // namespace blocklr
