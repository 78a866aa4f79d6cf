#include "tcdesc/knn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "parallel.hpp"
#include "tcdesc/error.hpp"
#include "tcdesc/linalg.hpp"

namespace tcdesc {

namespace {

constexpr double kSquaredDistanceFloor = 1e-14;

}  // namespace

void require_unit_rows(const DenseMatrix& x, const char* what) {
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double norm = l2_norm(x.row(i));
    if (!(std::abs(norm - 1.0) <= kUnitTolerance)) {
      throw Error(ErrorKind::kInvalidInput,
                  std::string(what) + ": row " + std::to_string(i) +
                      " is not unit length (norm " + std::to_string(norm) +
                      ")");
    }
  }
}

double unit_distance(Descriptor x, Descriptor y) {
  const double c = std::clamp(dot(x, y), -1.0, 1.0);
  const double squared = 2.0 - 2.0 * c;
  // Rounding in the dot product of identical unit vectors leaves ~1e-16 here.
  return squared <= kSquaredDistanceFloor ? 0.0 : std::sqrt(squared);
}

DistanceMatrix pairwise_distances(const DenseMatrix& x, const DenseMatrix& y) {
  if (x.cols() != y.cols()) {
    throw Error(ErrorKind::kInvalidInput,
                "pairwise_distances: dimension mismatch");
  }
  require_unit_rows(x, "pairwise_distances(X)");
  require_unit_rows(y, "pairwise_distances(Y)");
  DistanceMatrix d(x.rows(), y.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < y.rows(); ++j) {
      d(i, j) = unit_distance(x.row(i), y.row(j));
    }
  }
  return d;
}

std::vector<NeighborSet> top_k_within(const DenseMatrix& x, std::size_t k,
                                      std::size_t workers) {
  const std::size_t n = x.rows();
  if (k < 1 || n < 1 || k > n - 1) {
    throw Error(ErrorKind::kInvalidArgument,
                "top_k_within: k=" + std::to_string(k) +
                    " outside [1, n-1] for n=" + std::to_string(n));
  }
  const DistanceMatrix d = pairwise_distances(x, x);
  std::vector<NeighborSet> out(n);
  detail::parallel_for(n, workers, [&](std::size_t i) {
    std::vector<std::size_t> candidates;
    candidates.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) candidates.push_back(j);
    }
    const auto closer = [&](std::size_t a, std::size_t b) {
      return d(i, a) < d(i, b) || (d(i, a) == d(i, b) && a < b);
    };
    std::partial_sort(candidates.begin(),
                      candidates.begin() + static_cast<std::ptrdiff_t>(k),
                      candidates.end(), closer);
    NeighborSet& set = out[i];
    set.anchor_index = i;
    set.neighbor_indices.assign(candidates.begin(), candidates.begin() + k);
    set.neighbor_distances.resize(k);
    for (std::size_t r = 0; r < k; ++r) {
      set.neighbor_distances[r] = d(i, set.neighbor_indices[r]);
    }
  });
  return out;
}

}  // namespace tcdesc
