#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tcdesc/matrix.hpp"

namespace tcdesc {

struct LabeledDistance {
  double distance = 0.0;
  bool is_match = false;
};

struct MetricReport {
  double fpr95 = 0.0;
  double mean_average_precision = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

/// False positive rate at the smallest distance threshold t that accepts at
/// least 95% of the matches. Samples at exactly t count as accepted.
double fpr95(std::span<const LabeledDistance> samples);

/// Mean over queries of 1/rank of the true match, ranking the gallery by
/// ascending distance. Gallery items tied with the true match rank ahead of it.
double retrieval_map(const DenseMatrix& queries, const DenseMatrix& gallery,
                     std::span<const std::size_t> ground_truth);

/// d(a_i, p_i) for every i plus `negatives_per_positive` draws of d(a_i, p_j)
/// with j != i chosen uniformly.
std::vector<LabeledDistance> verification_pairs(const DenseMatrix& anchors,
                                                const DenseMatrix& positives,
                                                std::size_t negatives_per_positive,
                                                std::mt19937_64& rng);

/// FPR95 on verification pairs and mAP with anchors querying the positives.
MetricReport evaluate_descriptors(const DenseMatrix& anchors,
                                  const DenseMatrix& positives,
                                  std::size_t negatives_per_positive,
                                  std::uint64_t seed);

}  // namespace tcdesc
