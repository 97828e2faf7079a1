#pragma once

// Dense building blocks shared by every solver: block-partitioned matrices,
// symmetric matrices, and the two projections used by the ADMM updates.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "blocklr/errors.hpp"

namespace blocklr {

using Index = Eigen::Index;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline std::string shape_string(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

/// Real symmetric matrix. Construction symmetrizes via (A + A^T)/2 and rejects
/// inputs whose asymmetry exceeds 1e-12 relative to their magnitude.
template <typename Scalar>
class SymMatrix {
 public:
  static constexpr double kAsymmetryTolerance = 1e-12;

  SymMatrix() = default;

  template <typename Derived>
  explicit SymMatrix(const Eigen::MatrixBase<Derived>& a) : data_(a) {
    if (data_.rows() != data_.cols()) {
      throw DimensionMismatch("SymMatrix needs a square matrix, got " +
                              shape_string(data_.rows(), data_.cols()));
    }
    const Scalar skew = (data_ - data_.transpose()).norm();
    if (!(skew <= Scalar(kAsymmetryTolerance) * (Scalar(1) + data_.norm()))) {
      throw DomainError("SymMatrix input asymmetric: ||A - A^T||_F = " +
                        std::to_string(double(skew)));
    }
    data_ = (Scalar(0.5) * (data_ + data_.transpose())).eval();
  }

  static SymMatrix identity(Index dim) {
    return SymMatrix(Mat<Scalar>::Identity(dim, dim));
  }

  Index dim() const { return data_.rows(); }
  const Mat<Scalar>& matrix() const { return data_; }
  Scalar operator()(Index i, Index j) const { return data_(i, j); }
  Scalar trace() const { return data_.trace(); }

 private:
  Mat<Scalar> data_;
};

/// An M x (N*K) matrix viewed as K contiguous M x N blocks; block k occupies
/// columns [kN, (k+1)N).
template <typename Scalar>
class BlockMatrix {
 public:
  BlockMatrix() = default;

  BlockMatrix(Index rows, Index block_cols, Index blocks)
      : data_(Mat<Scalar>::Zero(rows, block_cols * blocks)),
        block_cols_(block_cols),
        blocks_(blocks) {
    if (rows < 1 || block_cols < 1 || blocks < 1) {
      throw DomainError("BlockMatrix dimensions must be positive");
    }
  }

  template <typename Derived>
  BlockMatrix(const Eigen::MatrixBase<Derived>& entries, Index block_cols)
      : data_(entries), block_cols_(block_cols) {
    if (block_cols < 1 || data_.cols() % block_cols != 0 || data_.cols() == 0 ||
        data_.rows() == 0) {
      throw DimensionMismatch("cannot split " +
                              shape_string(data_.rows(), data_.cols()) +
                              " into blocks of width " + std::to_string(block_cols));
    }
    blocks_ = data_.cols() / block_cols;
  }

  Index rows() const { return data_.rows(); }
  Index block_cols() const { return block_cols_; }
  Index blocks() const { return blocks_; }
  Index cols() const { return data_.cols(); }

  auto block(Index k) { return data_.middleCols(k * block_cols_, block_cols_); }
  auto block(Index k) const { return data_.middleCols(k * block_cols_, block_cols_); }

  Mat<Scalar>& matrix() { return data_; }
  const Mat<Scalar>& matrix() const { return data_; }

  Scalar norm() const { return data_.norm(); }

  bool same_shape(const BlockMatrix& other) const {
    return rows() == other.rows() && block_cols_ == other.block_cols_ &&
           blocks_ == other.blocks_;
  }

  std::string shape() const {
    return std::to_string(rows()) + "x(" + std::to_string(block_cols_) + "*" +
           std::to_string(blocks_) + ")";
  }

  friend BlockMatrix operator*(Scalar c, const BlockMatrix& x) {
    return BlockMatrix(c * x.data_, x.block_cols_);
  }
  friend BlockMatrix operator+(const BlockMatrix& a, const BlockMatrix& b) {
    require_same_shape(a, b);
    return BlockMatrix(a.data_ + b.data_, a.block_cols_);
  }
  friend BlockMatrix operator-(const BlockMatrix& a, const BlockMatrix& b) {
    require_same_shape(a, b);
    return BlockMatrix(a.data_ - b.data_, a.block_cols_);
  }

 private:
  static void require_same_shape(const BlockMatrix& a, const BlockMatrix& b) {
    if (!a.same_shape(b)) {
      throw DimensionMismatch("block matrix shapes differ: " + a.shape() + " vs " +
                              b.shape());
    }
  }

  Mat<Scalar> data_;
  Index block_cols_ = 0;
  Index blocks_ = 0;
};

using BlockMatrixd = BlockMatrix<double>;
using SymMatrixd = SymMatrix<double>;

template <typename Scalar>
struct SymEig {
  Vec<Scalar> values;   // ascending
  Mat<Scalar> vectors;  // orthonormal columns
};

template <typename Scalar>
SymEig<Scalar> sym_eig(const SymMatrix<Scalar>& a) {
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(a.matrix());
  if (es.info() != Eigen::Success) {
    throw NumericalFailure("symmetric eigendecomposition failed", a.dim());
  }
  return {es.eigenvalues(), es.eigenvectors()};
}

/// Euclidean projection onto the PSD cone: V max(Lambda, 0) V^T.
template <typename Scalar>
SymMatrix<Scalar> psd_project(const SymMatrix<Scalar>& a) {
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(a.matrix());
  if (es.info() != Eigen::Success) {
    throw NumericalFailure("PSD projection: eigendecomposition failed", a.dim());
  }
  const Vec<Scalar>& lambda = es.eigenvalues();
  Index first_positive = 0;
  while (first_positive < lambda.size() && lambda(first_positive) <= Scalar(0)) {
    ++first_positive;
  }
  const Index keep = lambda.size() - first_positive;
  if (keep == 0) return SymMatrix<Scalar>(Mat<Scalar>::Zero(a.dim(), a.dim()));
  const auto v = es.eigenvectors().rightCols(keep);
  const Mat<Scalar> scaled = v * lambda.tail(keep).cwiseSqrt().asDiagonal();
  Mat<Scalar> out = scaled * scaled.transpose();
  return SymMatrix<Scalar>(out);
}

/// Projection onto {W : trace(W) <= beta}: shifts the diagonal uniformly.
template <typename Scalar>
SymMatrix<Scalar> trace_ball_project(const SymMatrix<Scalar>& a, Scalar beta) {
  if (beta < Scalar(0)) throw DomainError("trace_ball_project: beta must be >= 0");
  const Scalar excess = std::max(a.trace() - beta, Scalar(0));
  if (excess == Scalar(0)) return a;
  Mat<Scalar> out = a.matrix();
  out.diagonal().array() -= excess / Scalar(a.dim());
  return SymMatrix<Scalar>(out);
}

template <typename Scalar>
struct ThinSvd {
  Mat<Scalar> U;
  Vec<Scalar> singular_values;  // descending
  Mat<Scalar> V;

  /// Best rank-r approximation U_r S_r V_r^T.
  Mat<Scalar> truncated(Index r) const {
    r = std::min<Index>(r, singular_values.size());
    return U.leftCols(r) * singular_values.head(r).asDiagonal() *
           V.leftCols(r).transpose();
  }
};

template <typename Derived>
ThinSvd<typename Derived::Scalar> thin_svd(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (!a.allFinite()) throw DomainError("thin_svd: non-finite entries");
  Eigen::BDCSVD<Mat<Scalar>> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw NumericalFailure("singular value decomposition failed",
                           std::max(a.rows(), a.cols()));
  }
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

/// Rank-r truncation of a block matrix (same block layout).
template <typename Scalar>
BlockMatrix<Scalar> truncate_rank(const BlockMatrix<Scalar>& x, Index r) {
  return BlockMatrix<Scalar>(thin_svd(x.matrix()).truncated(r), x.block_cols());
}

}  // namespace blocklr
