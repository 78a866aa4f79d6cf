#pragma once

#include <span>
#include <vector>

#include "tcdesc/matrix.hpp"

namespace tcdesc {

struct SymmetricSolveResult {
  std::vector<double> solution;
  bool conditioning_applied = false;
  // The eps actually used. Larger than the requested one when the
  // factorization had to be retried.
  double regularizer_eps = 0.0;
};

/// Gram matrix of the rows of `diffs`: S = diffs * diffs^T.
/// Computes the lower triangle and mirrors it, so the result is exactly
/// symmetric.
DenseMatrix gram(const DenseMatrix& diffs);

/// Cholesky factor of S + mu*I where mu = eps * trace(S) / k (or eps when the
/// trace vanishes). When the factorization fails at the requested eps, it is
/// retried on an increasing eps ladder; the final value is kept in eps().
class SpdFactorization {
 public:
  SpdFactorization(const DenseMatrix& s, double eps);

  std::vector<double> solve(std::span<const double> rhs) const;

  std::size_t dim() const noexcept { return lower_.rows(); }
  double eps() const noexcept { return eps_; }
  // Diagonal shift actually added to S.
  double shift() const noexcept { return shift_; }
  bool trace_relative() const noexcept { return trace_relative_; }
  bool conditioning_applied() const noexcept { return conditioned_; }

 private:
  bool try_factor(const DenseMatrix& s, double shift);

  DenseMatrix lower_;
  double eps_ = 0.0;
  double shift_ = 0.0;
  bool trace_relative_ = true;
  bool conditioned_ = false;
};

/// Solves (S + eps*(trace(S)/k)*I) x = rhs. Throws kSingularSystem when no
/// eps on the retry ladder yields a positive-definite system.
SymmetricSolveResult solve_spd_regularized(const DenseMatrix& s,
                                           std::span<const double> rhs,
                                           double eps);

double l2_norm(std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace tcdesc
