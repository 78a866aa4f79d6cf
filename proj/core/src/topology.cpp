#include "tcdesc/topology.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tcdesc/error.hpp"
#include "tcdesc/linalg.hpp"

namespace tcdesc {

namespace {

void check_shapes(Descriptor anchor, const DenseMatrix& neighbors) {
  if (neighbors.rows() < 1) {
    throw Error(ErrorKind::kInvalidArgument, "fit_weights: need k >= 1");
  }
  if (neighbors.cols() != anchor.size()) {
    throw Error(ErrorKind::kInvalidInput,
                "fit_weights: anchor and neighbor dimensions differ");
  }
}

// Rows are anchor - neighbor_j.
DenseMatrix local_differences(Descriptor anchor, const DenseMatrix& neighbors) {
  DenseMatrix z(neighbors.rows(), neighbors.cols());
  for (std::size_t j = 0; j < neighbors.rows(); ++j) {
    for (std::size_t d = 0; d < anchor.size(); ++d) {
      z(j, d) = anchor[d] - neighbors(j, d);
    }
  }
  return z;
}

}  // namespace

double TopologyVector::at(std::size_t index) const {
  const auto it = std::lower_bound(support.begin(), support.end(), index);
  if (it == support.end() || *it != index) return 0.0;
  return values[static_cast<std::size_t>(it - support.begin())];
}

std::vector<double> TopologyVector::dense() const {
  std::vector<double> out(length, 0.0);
  for (std::size_t s = 0; s < support.size(); ++s) out[support[s]] = values[s];
  return out;
}

double TopologyVector::sum() const {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

LleWeights fit_weights(Descriptor anchor, const DenseMatrix& neighbors,
                       double eps, std::size_t anchor_index) {
  check_shapes(anchor, neighbors);
  const std::size_t k = neighbors.rows();
  const DenseMatrix s = gram(local_differences(anchor, neighbors));
  const SpdFactorization factor(s, eps);
  const std::vector<double> ones(k, 1.0);
  const std::vector<double> u = factor.solve(ones);
  const double total = std::accumulate(u.begin(), u.end(), 0.0);
  if (!(total != 0.0) || !std::isfinite(total)) {
    throw Error(ErrorKind::kDegenerateFit,
                "fit_weights: 1^T S^-1 1 vanished for anchor " +
                    std::to_string(anchor_index));
  }

  LleWeights out;
  out.anchor_index = anchor_index;
  out.regularizer_eps = factor.eps();
  out.conditioning_applied = factor.conditioning_applied();
  out.weights.resize(k);
  for (std::size_t j = 0; j < k; ++j) out.weights[j] = u[j] / total;

  std::vector<double> reconstruction(anchor.begin(), anchor.end());
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t d = 0; d < anchor.size(); ++d) {
      reconstruction[d] -= out.weights[j] * neighbors(j, d);
    }
  }
  out.residual = l2_norm(reconstruction);
  return out;
}

TopologyVector topology_vector(const LleWeights& weights,
                               std::span<const std::size_t> neighbor_indices,
                               std::size_t n) {
  const std::size_t k = weights.weights.size();
  if (neighbor_indices.size() != k) {
    throw Error(ErrorKind::kInvalidInput,
                "topology_vector: weight and neighbor counts differ");
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return neighbor_indices[a] < neighbor_indices[b];
  });

  TopologyVector t;
  t.length = n;
  t.anchor_index = weights.anchor_index;
  t.support.reserve(k);
  t.values.reserve(k);
  for (const std::size_t r : order) {
    const std::size_t index = neighbor_indices[r];
    if (index >= n) {
      throw Error(ErrorKind::kInvalidInput,
                  "topology_vector: neighbor index " + std::to_string(index) +
                      " out of range for n=" + std::to_string(n));
    }
    if (index == weights.anchor_index) {
      throw Error(ErrorKind::kInvalidInput,
                  "topology_vector: anchor listed as its own neighbor");
    }
    if (!t.support.empty() && t.support.back() == index) {
      throw Error(ErrorKind::kInvalidInput,
                  "topology_vector: duplicate neighbor index " +
                      std::to_string(index));
    }
    t.support.push_back(index);
    t.values.push_back(weights.weights[r]);
  }
  return t;
}

double topology_distance(const TopologyVector& a, const TopologyVector& p) {
  if (a.length != p.length) {
    throw Error(ErrorKind::kInvalidInput,
                "topology_distance: vectors have different lengths");
  }
  double l1 = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.support.size() || j < p.support.size()) {
    if (j == p.support.size() ||
        (i < a.support.size() && a.support[i] < p.support[j])) {
      l1 += std::abs(a.values[i++]);
    } else if (i == a.support.size() || p.support[j] < a.support[i]) {
      l1 += std::abs(p.values[j++]);
    } else {
      l1 += std::abs(a.values[i++] - p.values[j++]);
    }
  }
  return 0.25 * l1;
}

LleFitGradient fit_weights_vjp(Descriptor anchor, const DenseMatrix& neighbors,
                               const LleWeights& fit,
                               std::span<const double> weight_adjoint) {
  check_shapes(anchor, neighbors);
  const std::size_t k = neighbors.rows();
  const std::size_t dim = anchor.size();
  if (weight_adjoint.size() != k || fit.weights.size() != k) {
    throw Error(ErrorKind::kInvalidInput, "fit_weights_vjp: length mismatch");
  }

  const DenseMatrix z = local_differences(anchor, neighbors);
  const SpdFactorization factor(gram(z), fit.regularizer_eps);
  const std::vector<double> u = factor.solve(std::vector<double>(k, 1.0));
  const double total = std::accumulate(u.begin(), u.end(), 0.0);

  // w = u / total, so dL/du = (g - 1 (w.g)) / total.
  double w_dot_g = 0.0;
  for (std::size_t j = 0; j < k; ++j) w_dot_g += fit.weights[j] * weight_adjoint[j];
  std::vector<double> u_bar(k);
  for (std::size_t j = 0; j < k; ++j) {
    u_bar[j] = (weight_adjoint[j] - w_dot_g) / total;
  }
  // u = S^-1 1 gives dL/dS = -v u^T with v = S^-1 u_bar (S symmetric).
  const std::vector<double> v = factor.solve(u_bar);

  DenseMatrix g_bar(k, k);
  double trace_bar = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) g_bar(a, b) = -v[a] * u[b];
    trace_bar += g_bar(a, a);
  }
  if (factor.trace_relative() && factor.eps() > 0.0) {
    const double coeff = factor.eps() / static_cast<double>(k) * trace_bar;
    for (std::size_t a = 0; a < k; ++a) g_bar(a, a) += coeff;
  }

  // S = Z Z^T, so dL/dZ = (G_bar + G_bar^T) Z.
  LleFitGradient out;
  out.anchor.assign(dim, 0.0);
  out.neighbors = DenseMatrix(k, dim);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t d = 0; d < dim; ++d) {
      double z_bar = 0.0;
      for (std::size_t b = 0; b < k; ++b) {
        z_bar += (g_bar(a, b) + g_bar(b, a)) * z(b, d);
      }
      out.anchor[d] += z_bar;
      out.neighbors(a, d) = -z_bar;
    }
  }
  return out;
}

}  // namespace tcdesc
