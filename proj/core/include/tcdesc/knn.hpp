#pragma once

#include <cstddef>
#include <vector>

#include "tcdesc/matrix.hpp"

namespace tcdesc {

// Entry (i, j) is the Euclidean distance between row i of X and row j of Y.
using DistanceMatrix = DenseMatrix;

struct NeighborSet {
  std::size_t anchor_index = 0;
  std::vector<std::size_t> neighbor_indices;  // nearest first
  std::vector<double> neighbor_distances;     // nondecreasing
};

inline constexpr double kUnitTolerance = 1e-6;

/// Throws kInvalidInput naming the first row of `x` whose norm differs from 1
/// by more than kUnitTolerance.
void require_unit_rows(const DenseMatrix& x, const char* what);

/// Euclidean distance of two unit vectors from their dot product,
/// sqrt(2 - 2 x.y), with the dot product clamped to [-1, 1].
double unit_distance(Descriptor x, Descriptor y);

/// All cross distances between unit rows of X and Y.
DistanceMatrix pairwise_distances(const DenseMatrix& x, const DenseMatrix& y);

/// k nearest other rows of X for every row, ties broken by lower index.
/// `workers` > 1 splits anchors across threads; output does not depend on it.
std::vector<NeighborSet> top_k_within(const DenseMatrix& x, std::size_t k,
                                      std::size_t workers = 1);

}  // namespace tcdesc
