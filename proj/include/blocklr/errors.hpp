#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace blocklr {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An eigen/singular value decomposition or a scalar root search broke down.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, std::ptrdiff_t dim)
      : Error(what + " (dimension " + std::to_string(dim) + ")"), dim_(dim) {}

  std::ptrdiff_t dim() const noexcept { return dim_; }

 private:
  std::ptrdiff_t dim_;
};

/// An iterative solver hit its iteration cap before meeting its stopping rule.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, int iters, double primal_residual,
                 double dual_residual)
      : Error(what + ": no convergence after " + std::to_string(iters) +
              " iterations (primal residual " + std::to_string(primal_residual) +
              ", dual residual " + std::to_string(dual_residual) + ")"),
        iters_(iters),
        primal_(primal_residual),
        dual_(dual_residual) {}

  int iters() const noexcept { return iters_; }
  double primal_residual() const noexcept { return primal_; }
  double dual_residual() const noexcept { return dual_; }

 private:
  int iters_;
  double primal_;
  double dual_;
};

/// A quantity is undefined for the given input (e.g. spikiness of zero).
class UndefinedValue : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Input outside the domain where a formula or generator applies.
class DomainError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace blocklr
