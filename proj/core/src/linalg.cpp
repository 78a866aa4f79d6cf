#include "tcdesc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tcdesc/error.hpp"

namespace tcdesc {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid input";
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kInvalidBatch: return "invalid batch";
    case ErrorKind::kSingularSystem: return "singular system";
    case ErrorKind::kDegenerateFit: return "degenerate fit";
    case ErrorKind::kDegenerateDescriptor: return "degenerate descriptor";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kIo: return "i/o error";
    case ErrorKind::kDivergence: return "numerical divergence";
  }
  return "unknown error";
}

namespace {

// A pivot below this fraction of the largest diagonal entry is treated as a
// failed factorization.
constexpr double kRelativePivotFloor = 1e-13;
constexpr double kFirstRetryEps = 1e-12;
constexpr double kMaxRetryEps = 1.0;

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

}  // namespace

DenseMatrix gram(const DenseMatrix& diffs) {
  if (!all_finite(diffs.data())) {
    throw Error(ErrorKind::kInvalidInput, "gram: non-finite entry in input");
  }
  const std::size_t k = diffs.rows();
  DenseMatrix s(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = dot(diffs.row(i), diffs.row(j));
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return s;
}

SpdFactorization::SpdFactorization(const DenseMatrix& s, double eps) {
  if (s.rows() != s.cols()) {
    throw Error(ErrorKind::kInvalidInput, "spd solve: matrix is not square");
  }
  if (!(eps >= 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "spd solve: eps must be >= 0");
  }
  if (!all_finite(s.data())) {
    throw Error(ErrorKind::kInvalidInput, "spd solve: non-finite entry");
  }
  const std::size_t k = s.rows();
  double trace = 0.0;
  for (std::size_t i = 0; i < k; ++i) trace += s(i, i);
  trace_relative_ = trace > 0.0;
  const double scale = trace_relative_ ? trace / static_cast<double>(k) : 1.0;

  double attempt = eps;
  while (true) {
    if (try_factor(s, attempt * scale)) {
      eps_ = attempt;
      shift_ = attempt * scale;
      conditioned_ = attempt > 0.0;
      return;
    }
    attempt = attempt == 0.0 ? kFirstRetryEps : attempt * 10.0;
    if (attempt > kMaxRetryEps) {
      throw Error(ErrorKind::kSingularSystem,
                  "spd solve: factorization failed after regularization (k=" +
                      std::to_string(k) + ")");
    }
  }
}

bool SpdFactorization::try_factor(const DenseMatrix& s, double shift) {
  const std::size_t k = s.rows();
  lower_ = DenseMatrix(k, k);
  double max_diag = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    max_diag = std::max(max_diag, std::abs(s(i, i) + shift));
  }
  const double floor = kRelativePivotFloor * max_diag;
  for (std::size_t j = 0; j < k; ++j) {
    double pivot = s(j, j) + shift;
    for (std::size_t p = 0; p < j; ++p) pivot -= lower_(j, p) * lower_(j, p);
    if (!(pivot > floor) || pivot <= 0.0) return false;
    const double root = std::sqrt(pivot);
    lower_(j, j) = root;
    for (std::size_t i = j + 1; i < k; ++i) {
      double v = s(i, j);
      for (std::size_t p = 0; p < j; ++p) v -= lower_(i, p) * lower_(j, p);
      lower_(i, j) = v / root;
    }
  }
  return true;
}

std::vector<double> SpdFactorization::solve(std::span<const double> rhs) const {
  const std::size_t k = dim();
  if (rhs.size() != k) {
    throw Error(ErrorKind::kInvalidInput, "spd solve: rhs length mismatch");
  }
  std::vector<double> x(rhs.begin(), rhs.end());
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t p = 0; p < i; ++p) x[i] -= lower_(i, p) * x[p];
    x[i] /= lower_(i, i);
  }
  for (std::size_t i = k; i-- > 0;) {
    for (std::size_t p = i + 1; p < k; ++p) x[i] -= lower_(p, i) * x[p];
    x[i] /= lower_(i, i);
  }
  return x;
}

SymmetricSolveResult solve_spd_regularized(const DenseMatrix& s,
                                           std::span<const double> rhs,
                                           double eps) {
  const SpdFactorization factor(s, eps);
  SymmetricSolveResult result;
  result.solution = factor.solve(rhs);
  result.conditioning_applied = factor.conditioning_applied();
  result.regularizer_eps = factor.eps();
  if (!all_finite(result.solution)) {
    throw Error(ErrorKind::kSingularSystem, "spd solve: non-finite solution");
  }
  return result;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

}  // namespace tcdesc
