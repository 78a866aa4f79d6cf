#pragma once

// Reference implementations used only by tests. Each one takes a different
// route from the library code it checks: sorting instead of selection,
// Gauss-Jordan instead of Cholesky, gradient descent instead of the closed
// form, threshold sweeps instead of order statistics.

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "tcdesc/eval.hpp"
#include "tcdesc/loss.hpp"
#include "tcdesc/matrix.hpp"

namespace tcdesc::oracle {

DenseMatrix random_unit_rows(std::size_t n, std::size_t dim, std::mt19937_64& rng);
std::vector<double> random_unit(std::size_t dim, std::mt19937_64& rng);

// Distance via explicit |x - y| (not the dot-product identity).
double direct_distance(const std::vector<double>& x, const std::vector<double>& y);

// Same dot-product formula as the library, evaluated in a plain loop so that
// tie structure is reproduced exactly.
double dot_distance(const DenseMatrix& x, std::size_t i, const DenseMatrix& y,
                    std::size_t j);

// Full sort by (distance, index), self excluded.
std::vector<std::size_t> brute_force_knn(const DenseMatrix& x, std::size_t i,
                                         std::size_t k);

// Gauss-Jordan inverse with partial pivoting.
DenseMatrix dense_inverse(const DenseMatrix& a);

// Kahan-summed sqrt of sum of squares, accumulated back to front.
double compensated_norm(const std::vector<double>& v);

// |anchor - sum_j w_j n_j|^2
double affine_objective(const std::vector<double>& anchor,
                        const std::vector<std::vector<double>>& neighbors,
                        const std::vector<double>& w);

// Eliminates w_1 = 1 - sum_{j>1} w_j and runs steepest descent with exact line
// search on the reduced quadratic until the gradient vanishes. Returns w.
std::vector<double> projected_gradient_weights(
    const std::vector<double>& anchor,
    const std::vector<std::vector<double>>& neighbors);

// Candidate thresholds = every distance; pick the smallest with recall >= 95%.
double sweep_fpr95(const std::vector<LabeledDistance>& samples);

// Sorts the gallery per query, placing ties ahead of the true match.
double ranking_map(const DenseMatrix& queries, const DenseMatrix& gallery,
                   const std::vector<std::size_t>& truth);

// Straight-line batch loss: dense topology vectors, regularized weights from
// an explicit inverse, brute-force kNN and hardest negatives.
double reference_batch_loss(const DenseMatrix& a, const DenseMatrix& p,
                            double lambda, const LossConfig& cfg);

}  // namespace tcdesc::oracle
