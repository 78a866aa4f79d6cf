#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tcdesc/knn.hpp"
#include "tcdesc/matrix.hpp"
#include "tcdesc/topology.hpp"

namespace tcdesc {

enum class TopologyMode {
  kThroughWeights,  // differentiate d_T through the weight solve
  kDetached,        // weights are constants; d_T carries no gradient
  kOff,             // lambda forced to 1, topology never computed
};

std::string to_string(TopologyMode mode);
TopologyMode parse_topology_mode(const std::string& text);

struct LossConfig {
  double margin = 1.0;
  std::size_t k = 20;
  // Lambda schedule: 1 for the first lambda_n0 iterations, then decays by
  // lambda_decay_rate every lambda_decay_steps iterations down to
  // lambda_floor.
  std::uint64_t lambda_n0 = 50000;
  std::uint64_t lambda_decay_steps = 10000;
  double lambda_decay_rate = 0.025;
  double lambda_floor = 0.5;
  // When set, overrides the schedule.
  std::optional<double> fixed_lambda;
  TopologyMode topology_mode = TopologyMode::kThroughWeights;
  double lle_eps = kDefaultLleEps;
  std::size_t workers = 1;

  /// Throws kInvalidArgument on out-of-range fields.
  void validate() const;
};

struct LossReport {
  double loss = 0.0;
  double lambda = 1.0;
  double mean_d_pos_euclid = 0.0;
  double mean_d_pos_topo = 0.0;
  double mean_d_neg = 0.0;
  std::size_t active_triplets = 0;
  // Number of matching pairs whose topology distance exceeded 1, which the
  // quarter-l1 normalization only rules out for nonnegative weights.
  std::size_t topology_overflow = 0;
};

double lambda_schedule(std::uint64_t iteration, const LossConfig& cfg);

/// Lambda actually used at `iteration`: fixed value, schedule, or 1 when the
/// topology term is off.
double effective_lambda(std::uint64_t iteration, const LossConfig& cfg);

/// lambda * d_E(a, p) + (1 - lambda) * d_T(a, p).
double positive_distance(Descriptor a, Descriptor p, const TopologyVector& ta,
                         const TopologyVector& tp, double lambda);

/// Distance to the nearest non-matching descriptor of pair i, searched over
/// row i and column i of the anchor-by-positive distance matrix.
double hardest_negative(std::size_t i, const DistanceMatrix& d_ap);

// Per-index neighborhoods and topology vectors within A and within P.
struct BatchTopology {
  std::vector<NeighborSet> anchor_neighbors;
  std::vector<NeighborSet> positive_neighbors;
  std::vector<LleWeights> anchor_weights;
  std::vector<LleWeights> positive_weights;
  std::vector<TopologyVector> anchor_topology;
  std::vector<TopologyVector> positive_topology;
  std::vector<double> distance;  // d_T(a_i, p_i)
};

BatchTopology batch_topology(const DenseMatrix& anchors,
                             const DenseMatrix& positives, std::size_t k,
                             double eps, std::size_t workers = 1);

// dLoss/dA and dLoss/dP, same shapes as the inputs.
struct LossGradient {
  DenseMatrix anchors;
  DenseMatrix positives;
};

/// Hinge triplet loss with hardest-in-batch negatives and the fused
/// Euclidean/topology positive distance. Rows of A and P must be unit length
/// and matched by index. Fills `gradient` when non-null.
LossReport batch_loss(const DenseMatrix& anchors, const DenseMatrix& positives,
                      std::uint64_t iteration, const LossConfig& cfg,
                      LossGradient* gradient = nullptr);

/// batch_loss with d_T(a_i, p_i) held at `topology_distances` instead of
/// being recomputed. This is the function the detached mode differentiates.
LossReport batch_loss_frozen_topology(const DenseMatrix& anchors,
                                      const DenseMatrix& positives,
                                      std::uint64_t iteration,
                                      const LossConfig& cfg,
                                      std::span<const double> topology_distances,
                                      LossGradient* gradient = nullptr);

}  // namespace tcdesc
