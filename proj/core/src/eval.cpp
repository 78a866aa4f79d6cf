#include "tcdesc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tcdesc/error.hpp"
#include "tcdesc/knn.hpp"

namespace tcdesc {

double fpr95(std::span<const LabeledDistance> samples) {
  std::vector<double> matches;
  std::vector<double> non_matches;
  for (const auto& s : samples) {
    if (!std::isfinite(s.distance)) {
      throw Error(ErrorKind::kInvalidInput, "fpr95: non-finite distance");
    }
    (s.is_match ? matches : non_matches).push_back(s.distance);
  }
  if (matches.empty() || non_matches.empty()) {
    throw Error(ErrorKind::kInvalidInput,
                "fpr95: need at least one match and one non-match");
  }
  std::sort(matches.begin(), matches.end());
  // Smallest count c with c / n_pos >= 0.95, in integers.
  const std::size_t needed = (95 * matches.size() + 99) / 100;
  const double threshold = matches[needed - 1];
  const auto accepted = std::count_if(
      non_matches.begin(), non_matches.end(),
      [threshold](double d) { return d <= threshold; });
  return static_cast<double>(accepted) / static_cast<double>(non_matches.size());
}

double retrieval_map(const DenseMatrix& queries, const DenseMatrix& gallery,
                     std::span<const std::size_t> ground_truth) {
  if (queries.rows() == 0) {
    throw Error(ErrorKind::kInvalidInput, "retrieval_map: no queries");
  }
  if (ground_truth.size() != queries.rows()) {
    throw Error(ErrorKind::kInvalidInput,
                "retrieval_map: ground truth missing for some queries");
  }
  const DistanceMatrix d = pairwise_distances(queries, gallery);
  double total = 0.0;
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    const std::size_t truth = ground_truth[q];
    if (truth >= gallery.rows()) {
      throw Error(ErrorKind::kInvalidInput,
                  "retrieval_map: ground truth index out of range for query " +
                      std::to_string(q));
    }
    std::size_t rank = 1;
    for (std::size_t g = 0; g < gallery.rows(); ++g) {
      if (g != truth && d(q, g) <= d(q, truth)) ++rank;
    }
    total += 1.0 / static_cast<double>(rank);
  }
  return total / static_cast<double>(queries.rows());
}

std::vector<LabeledDistance> verification_pairs(
    const DenseMatrix& anchors, const DenseMatrix& positives,
    std::size_t negatives_per_positive, std::mt19937_64& rng) {
  const std::size_t n = anchors.rows();
  if (positives.rows() != n || positives.cols() != anchors.cols()) {
    throw Error(ErrorKind::kInvalidInput,
                "verification_pairs: A and P must be matched sets");
  }
  if (negatives_per_positive > 0 && n < 2) {
    throw Error(ErrorKind::kInvalidInput,
                "verification_pairs: negatives need at least two pairs");
  }
  require_unit_rows(anchors, "verification_pairs(A)");
  require_unit_rows(positives, "verification_pairs(P)");
  std::vector<LabeledDistance> out;
  out.reserve(n * (1 + negatives_per_positive));
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({unit_distance(anchors.row(i), positives.row(i)), true});
    for (std::size_t k = 0; k < negatives_per_positive; ++k) {
      // Uniform over j != i.
      std::uniform_int_distribution<std::size_t> pick(0, n - 2);
      std::size_t j = pick(rng);
      if (j >= i) ++j;
      out.push_back({unit_distance(anchors.row(i), positives.row(j)), false});
    }
  }
  return out;
}

MetricReport evaluate_descriptors(const DenseMatrix& anchors,
                                  const DenseMatrix& positives,
                                  std::size_t negatives_per_positive,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto pairs =
      verification_pairs(anchors, positives, negatives_per_positive, rng);
  MetricReport report;
  report.fpr95 = fpr95(pairs);
  report.n_pos = anchors.rows();
  report.n_neg = pairs.size() - anchors.rows();
  std::vector<std::size_t> truth(anchors.rows());
  std::iota(truth.begin(), truth.end(), std::size_t{0});
  report.mean_average_precision = retrieval_map(anchors, positives, truth);
  return report;
}

}  // namespace tcdesc
