#include "tcdesc/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "parallel.hpp"
#include "tcdesc/error.hpp"
#include "tcdesc/linalg.hpp"

namespace tcdesc {

namespace {

struct NegativeChoice {
  double distance = 0.0;
  std::size_t anchor = 0;
  std::size_t positive = 0;
};

NegativeChoice find_hardest_negative(std::size_t i, const DistanceMatrix& d) {
  const std::size_t n = d.rows();
  if (n < 2 || d.cols() != n) {
    throw Error(ErrorKind::kInvalidBatch,
                "hardest_negative: need a square distance matrix with n >= 2");
  }
  NegativeChoice best{std::numeric_limits<double>::infinity(), 0, 0};
  for (std::size_t j = 0; j < n; ++j) {
    if (j != i && d(i, j) < best.distance) best = {d(i, j), i, j};
  }
  for (std::size_t m = 0; m < n; ++m) {
    if (m != i && d(m, i) < best.distance) best = {d(m, i), m, i};
  }
  return best;
}

DenseMatrix gather_rows(const DenseMatrix& x,
                        const std::vector<std::size_t>& indices) {
  DenseMatrix out(indices.size(), x.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = x.row(indices[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Adds the gradient of coeff * d_E(x, y) to gx and gy. At d_E = 0 the
// subgradient is taken as zero.
void add_distance_gradient(Descriptor x, Descriptor y, double distance,
                           double coeff, std::span<double> gx,
                           std::span<double> gy) {
  if (distance <= 0.0 || coeff == 0.0) return;
  const double scale = -coeff / distance;
  for (std::size_t d = 0; d < x.size(); ++d) {
    gx[d] += scale * y[d];
    gy[d] += scale * x[d];
  }
}

void scatter_fit_gradient(const LleFitGradient& g, std::size_t anchor,
                          const std::vector<std::size_t>& neighbors,
                          DenseMatrix& out) {
  auto row = out.row(anchor);
  for (std::size_t d = 0; d < row.size(); ++d) row[d] += g.anchor[d];
  for (std::size_t r = 0; r < neighbors.size(); ++r) {
    auto nrow = out.row(neighbors[r]);
    for (std::size_t d = 0; d < nrow.size(); ++d) nrow[d] += g.neighbors(r, d);
  }
}

}  // namespace

std::string to_string(TopologyMode mode) {
  switch (mode) {
    case TopologyMode::kThroughWeights: return "through-weights";
    case TopologyMode::kDetached: return "detached";
    case TopologyMode::kOff: return "off";
  }
  return "unknown";
}

TopologyMode parse_topology_mode(const std::string& text) {
  if (text == "through-weights") return TopologyMode::kThroughWeights;
  if (text == "detached") return TopologyMode::kDetached;
  if (text == "off") return TopologyMode::kOff;
  throw Error(ErrorKind::kInvalidArgument,
              "unknown topology mode '" + text +
                  "' (expected through-weights, detached or off)");
}

void LossConfig::validate() const {
  const auto fail = [](const std::string& what) {
    throw Error(ErrorKind::kInvalidArgument, "loss config: " + what);
  };
  if (!(margin > 0.0)) fail("margin must be > 0");
  if (k < 1) fail("k must be >= 1");
  if (lambda_decay_steps == 0) fail("lambda decay steps must be > 0");
  if (!(lambda_decay_rate > 0.0)) fail("lambda decay rate must be > 0");
  if (!(lambda_floor > 0.0 && lambda_floor <= 1.0)) {
    fail("lambda floor must be in (0, 1]");
  }
  if (fixed_lambda && !(*fixed_lambda >= 0.0 && *fixed_lambda <= 1.0)) {
    fail("fixed lambda must be in [0, 1]");
  }
  if (!(lle_eps >= 0.0)) fail("lle eps must be >= 0");
  if (workers < 1) fail("workers must be >= 1");
}

double lambda_schedule(std::uint64_t iteration, const LossConfig& cfg) {
  const std::uint64_t excess =
      iteration > cfg.lambda_n0 ? iteration - cfg.lambda_n0 : 0;
  const std::uint64_t steps =
      (excess + cfg.lambda_decay_steps - 1) / cfg.lambda_decay_steps;
  const double lambda =
      1.0 - static_cast<double>(steps) * cfg.lambda_decay_rate;
  return std::max(lambda, cfg.lambda_floor);
}

double effective_lambda(std::uint64_t iteration, const LossConfig& cfg) {
  if (cfg.topology_mode == TopologyMode::kOff) return 1.0;
  if (cfg.fixed_lambda) return *cfg.fixed_lambda;
  return lambda_schedule(iteration, cfg);
}

double positive_distance(Descriptor a, Descriptor p, const TopologyVector& ta,
                         const TopologyVector& tp, double lambda) {
  return lambda * unit_distance(a, p) +
         (1.0 - lambda) * topology_distance(ta, tp);
}

double hardest_negative(std::size_t i, const DistanceMatrix& d_ap) {
  return find_hardest_negative(i, d_ap).distance;
}

BatchTopology batch_topology(const DenseMatrix& anchors,
                             const DenseMatrix& positives, std::size_t k,
                             double eps, std::size_t workers) {
  const std::size_t n = anchors.rows();
  if (positives.rows() != n || positives.cols() != anchors.cols()) {
    throw Error(ErrorKind::kInvalidBatch,
                "batch_topology: A and P must have the same shape");
  }
  BatchTopology t;
  t.anchor_neighbors = top_k_within(anchors, k, workers);
  t.positive_neighbors = top_k_within(positives, k, workers);
  t.anchor_weights.resize(n);
  t.positive_weights.resize(n);
  t.anchor_topology.resize(n);
  t.positive_topology.resize(n);
  t.distance.resize(n);
  detail::parallel_for(n, workers, [&](std::size_t i) {
    const auto& na = t.anchor_neighbors[i].neighbor_indices;
    const auto& np = t.positive_neighbors[i].neighbor_indices;
    t.anchor_weights[i] =
        fit_weights(anchors.row(i), gather_rows(anchors, na), eps, i);
    t.positive_weights[i] =
        fit_weights(positives.row(i), gather_rows(positives, np), eps, i);
    t.anchor_topology[i] = topology_vector(t.anchor_weights[i], na, n);
    t.positive_topology[i] = topology_vector(t.positive_weights[i], np, n);
    t.distance[i] =
        topology_distance(t.anchor_topology[i], t.positive_topology[i]);
  });
  return t;
}

namespace {

LossReport batch_loss_impl(const DenseMatrix& anchors,
                           const DenseMatrix& positives,
                           std::uint64_t iteration, const LossConfig& cfg,
                           const std::span<const double>* frozen,
                           LossGradient* gradient) {
  cfg.validate();
  const std::size_t n = anchors.rows();
  if (positives.rows() != n || positives.cols() != anchors.cols()) {
    throw Error(ErrorKind::kInvalidBatch,
                "batch_loss: A and P must have the same shape");
  }
  if (n < 2) {
    throw Error(ErrorKind::kInvalidBatch, "batch_loss: need n >= 2");
  }

  LossReport report;
  report.lambda = effective_lambda(iteration, cfg);
  const double lambda = report.lambda;
  const bool use_topology = cfg.topology_mode != TopologyMode::kOff;

  const DistanceMatrix d_ap = pairwise_distances(anchors, positives);
  BatchTopology topo;
  if (use_topology && frozen != nullptr) {
    if (frozen->size() != n) {
      throw Error(ErrorKind::kInvalidInput,
                  "batch_loss: frozen topology distances need one per pair");
    }
    topo.distance.assign(frozen->begin(), frozen->end());
  } else if (use_topology) {
    topo = batch_topology(anchors, positives, cfg.k, cfg.lle_eps, cfg.workers);
  }

  std::vector<NegativeChoice> negatives(n);
  std::vector<bool> active(n, false);
  double loss_sum = 0.0;
  double pos_sum = 0.0;
  double topo_sum = 0.0;
  double neg_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d_pos = d_ap(i, i);
    double gamma_plus = d_pos;
    if (use_topology) {
      const double d_topo = topo.distance[i];
      gamma_plus = lambda * d_pos + (1.0 - lambda) * d_topo;
      topo_sum += d_topo;
      if (d_topo > 1.0) ++report.topology_overflow;
    }
    negatives[i] = find_hardest_negative(i, d_ap);
    const double hinge = cfg.margin + gamma_plus - negatives[i].distance;
    if (hinge > 0.0) {
      loss_sum += hinge;
      active[i] = true;
      ++report.active_triplets;
    }
    pos_sum += d_pos;
    neg_sum += negatives[i].distance;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  report.loss = loss_sum * inv_n;
  report.mean_d_pos_euclid = pos_sum * inv_n;
  report.mean_d_pos_topo = topo_sum * inv_n;
  report.mean_d_neg = neg_sum * inv_n;

  if (gradient == nullptr) return report;

  gradient->anchors = DenseMatrix(n, anchors.cols());
  gradient->positives = DenseMatrix(n, anchors.cols());
  DenseMatrix& ga = gradient->anchors;
  DenseMatrix& gp = gradient->positives;
  for (std::size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    add_distance_gradient(anchors.row(i), positives.row(i), d_ap(i, i),
                          lambda * inv_n, ga.row(i), gp.row(i));
    const NegativeChoice& neg = negatives[i];
    add_distance_gradient(anchors.row(neg.anchor), positives.row(neg.positive),
                          neg.distance, -inv_n, ga.row(neg.anchor),
                          gp.row(neg.positive));
  }

  const double topo_weight = 1.0 - lambda;
  if (!use_topology || frozen != nullptr ||
      cfg.topology_mode != TopologyMode::kThroughWeights || topo_weight == 0.0) {
    return report;
  }

  // d(d_T)/dw is a quarter of the l1 subgradient (zero at ties).
  const double coeff = topo_weight * 0.25 * inv_n;
  std::vector<LleFitGradient> fit_a(n);
  std::vector<LleFitGradient> fit_p(n);
  detail::parallel_for(n, cfg.workers, [&](std::size_t i) {
    if (!active[i]) return;
    const auto& na = topo.anchor_neighbors[i].neighbor_indices;
    const auto& np = topo.positive_neighbors[i].neighbor_indices;
    const auto& wa = topo.anchor_weights[i].weights;
    const auto& wp = topo.positive_weights[i].weights;
    std::vector<double> bar_a(na.size());
    std::vector<double> bar_p(np.size());
    for (std::size_t r = 0; r < na.size(); ++r) {
      bar_a[r] = coeff * sign(wa[r] - topo.positive_topology[i].at(na[r]));
    }
    for (std::size_t r = 0; r < np.size(); ++r) {
      bar_p[r] = -coeff * sign(topo.anchor_topology[i].at(np[r]) - wp[r]);
    }
    fit_a[i] = fit_weights_vjp(anchors.row(i), gather_rows(anchors, na),
                               topo.anchor_weights[i], bar_a);
    fit_p[i] = fit_weights_vjp(positives.row(i), gather_rows(positives, np),
                               topo.positive_weights[i], bar_p);
  });
  for (std::size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    scatter_fit_gradient(fit_a[i], i,
                         topo.anchor_neighbors[i].neighbor_indices, ga);
    scatter_fit_gradient(fit_p[i], i,
                         topo.positive_neighbors[i].neighbor_indices, gp);
  }
  return report;
}

}  // namespace

LossReport batch_loss(const DenseMatrix& anchors, const DenseMatrix& positives,
                      std::uint64_t iteration, const LossConfig& cfg,
                      LossGradient* gradient) {
  return batch_loss_impl(anchors, positives, iteration, cfg, nullptr, gradient);
}

LossReport batch_loss_frozen_topology(const DenseMatrix& anchors,
                                      const DenseMatrix& positives,
                                      std::uint64_t iteration,
                                      const LossConfig& cfg,
                                      std::span<const double> topology_distances,
                                      LossGradient* gradient) {
  return batch_loss_impl(anchors, positives, iteration, cfg,
                         &topology_distances, gradient);
}

}  // namespace tcdesc
