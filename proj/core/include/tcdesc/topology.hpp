#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tcdesc/matrix.hpp"

namespace tcdesc {

// Relative Tikhonov conditioning applied to the local Gram matrix.
inline constexpr double kDefaultLleEps = 1e-3;

struct LleWeights {
  std::size_t anchor_index = 0;
  std::vector<double> weights;  // one per neighbor, sums to 1
  double residual = 0.0;        // |anchor - sum_j w_j * neighbor_j|
  double regularizer_eps = 0.0;
  bool conditioning_applied = false;
};

// Sparse length-n vector carrying the LLE weights at the neighbors' batch
// indices. Support is kept in ascending index order.
struct TopologyVector {
  std::size_t length = 0;
  std::size_t anchor_index = 0;
  std::vector<std::size_t> support;
  std::vector<double> values;

  double at(std::size_t index) const;
  std::vector<double> dense() const;
  double sum() const;
};

/// Affine reconstruction weights of `anchor` from the rows of `neighbors`:
/// argmin |anchor - sum_j w_j n_j|^2 subject to sum_j w_j = 1, solved in
/// closed form as S^-1 1 / (1^T S^-1 1) on the conditioned local Gram matrix.
/// Weights are not sign constrained.
LleWeights fit_weights(Descriptor anchor, const DenseMatrix& neighbors,
                       double eps = kDefaultLleEps,
                       std::size_t anchor_index = 0);

/// Places weights at `neighbor_indices` in a length-n vector.
TopologyVector topology_vector(const LleWeights& weights,
                               std::span<const std::size_t> neighbor_indices,
                               std::size_t n);

/// Quarter of the l1 distance between two topology vectors, evaluated over
/// the union of their supports.
double topology_distance(const TopologyVector& a, const TopologyVector& p);

// Gradient of a scalar through one weight fit, given dL/dw.
struct LleFitGradient {
  std::vector<double> anchor;
  DenseMatrix neighbors;  // one row per neighbor
};

/// Reverse-mode derivative of fit_weights. Differentiates the closed-form
/// solve with the adjoint system on the same factorization, including the
/// trace-relative conditioning term. The regularizer eps of `fit` is held
/// constant.
LleFitGradient fit_weights_vjp(Descriptor anchor, const DenseMatrix& neighbors,
                               const LleWeights& fit,
                               std::span<const double> weight_adjoint);

}  // namespace tcdesc
