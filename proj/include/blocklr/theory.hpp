#pragma once

// Closed-form sample-rate and minimax quantities, and the sign-matrix packing
// construction used in the lower-bound argument.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "blocklr/core.hpp"
#include "blocklr/norms.hpp"
#include "blocklr/rng.hpp"

namespace blocklr {

struct BoundInputs {
  double alpha = 1;
  double beta = 1;
  double sigma = 0;
  Index M = 1;
  Index N = 1;
  Index K = 1;
  Index L = 1;
  double C = 1;  // unspecified numerical constant of the sample-rate bound

  void validate() const {
    if (!(alpha > 0)) throw DomainError("bounds: alpha must be positive");
    if (!(beta >= alpha)) throw DomainError("bounds: beta must be >= alpha");
    if (!(sigma >= 0)) throw DomainError("bounds: sigma must be >= 0");
    if (M < 1 || N < 1 || K < 1 || L < 1) throw DomainError("bounds: dimensions must be positive");
    if (!(C > 0)) throw DomainError("bounds: C must be positive");
  }
};

/// C (beta/alpha)^2 N (N + M/K) (ln K)^3; zero at K = 1.
inline double sample_rate_threshold(const BoundInputs& b) {
  b.validate();
  if (b.K == 1) return 0.0;
  const double ratio = b.beta / b.alpha;
  const double logk = std::log(double(b.K));
  return b.C * ratio * ratio * double(b.N) * (double(b.N) + double(b.M) / double(b.K)) *
         logk * logk * logk;
}

/// (alpha^2/16) min(1, sigma/(8 sqrt2 alpha) sqrt((beta/alpha)^2 max(M,NK) / (LK))).
inline double minimax_lower_bound(const BoundInputs& b) {
  b.validate();
  const double ratio = b.beta / b.alpha;
  const double width = double(std::max(b.M, b.N * b.K));
  if (ratio * ratio * width < 48.0) {
    throw DomainError("minimax_lower_bound: requires (beta/alpha)^2 * max(M, N*K) >= 48, got " +
                      std::to_string(ratio * ratio * width));
  }
  const double inner = std::sqrt(ratio * ratio * width / (double(b.L) * double(b.K)));
  const double noise = b.sigma / (8.0 * std::numbers::sqrt2 * b.alpha) * inner;
  return b.alpha * b.alpha / 16.0 * std::min(1.0, noise);
}

/// Rows 0..B-1 hold i.i.d. +-gamma*alpha/sqrt(MN) entries (row-major draw
/// order); row m >= B copies row m mod B.
template <typename Scalar = double>
BlockMatrix<Scalar> gen_packing_matrix(Index M, Index N, Index K, Scalar alpha, Scalar gamma,
                                       Index B, std::uint64_t seed) {
  if (M < 1 || N < 1 || K < 1) throw DomainError("gen_packing_matrix: dimensions must be positive");
  if (B < 1 || B > M) throw DomainError("gen_packing_matrix: need 1 <= B <= M");
  if (!(alpha > Scalar(0))) throw DomainError("gen_packing_matrix: alpha must be positive");
  if (!(gamma > Scalar(0) && gamma <= Scalar(1))) {
    throw DomainError("gen_packing_matrix: gamma must be in (0, 1]");
  }
  const Scalar magnitude = gamma * alpha / std::sqrt(Scalar(M) * Scalar(N));
  Rng rng(seed);
  Mat<Scalar> h(M, N * K);
  for (Index i = 0; i < B; ++i)
    for (Index j = 0; j < h.cols(); ++j) h(i, j) = magnitude * Scalar(rng.sign());
  for (Index i = B; i < M; ++i) h.row(i) = h.row(i % B);
  return BlockMatrix<Scalar>(std::move(h), N);
}

struct PackingReport {
  double min_pair_distance_sq = std::numeric_limits<double>::infinity();
  double pair_threshold = 0;  // K gamma^2 alpha^2 / 2
  bool pairs_ok = true;
  double max_inf_frob_error = 0;     // max | ||H||_{inf,F} - gamma alpha |
  double max_frob_sq_error = 0;      // max | ||H||_F^2 - K gamma^2 alpha^2 |
};

template <typename Scalar>
PackingReport verify_packing(const std::vector<BlockMatrix<Scalar>>& set, Scalar alpha,
                             Scalar gamma, Index K) {
  PackingReport rep;
  const double ga = double(gamma) * double(alpha);
  rep.pair_threshold = double(K) * ga * ga / 2.0;
  for (const auto& h : set) {
    rep.max_inf_frob_error =
        std::max(rep.max_inf_frob_error, std::abs(double(inf_frob_norm(h)) - ga));
    rep.max_frob_sq_error = std::max(
        rep.max_frob_sq_error, std::abs(double(h.matrix().squaredNorm()) - double(K) * ga * ga));
  }
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (std::size_t j = i + 1; j < set.size(); ++j) {
      if (!set[i].same_shape(set[j])) throw DimensionMismatch("verify_packing: mixed shapes");
      const double d = double((set[i].matrix() - set[j].matrix()).squaredNorm());
      rep.min_pair_distance_sq = std::min(rep.min_pair_distance_sq, d);
    }
  }
  rep.pairs_ok = rep.min_pair_distance_sq > rep.pair_threshold;
  return rep;
}

}  // namespace blocklr
