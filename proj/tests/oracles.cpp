#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tcdesc::oracle {

std::vector<double> random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double sq = 0.0;
  do {
    sq = 0.0;
    for (double& x : v) {
      x = normal(rng);
      sq += x * x;
    }
  } while (sq < 1e-12);
  const double norm = std::sqrt(sq);
  for (double& x : v) x /= norm;
  return v;
}

DenseMatrix random_unit_rows(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
  DenseMatrix m(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = random_unit(dim, rng);
    std::copy(v.begin(), v.end(), m.row(i).begin());
  }
  return m;
}

double direct_distance(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s);
}

double dot_distance(const DenseMatrix& x, std::size_t i, const DenseMatrix& y,
                    std::size_t j) {
  double c = 0.0;
  for (std::size_t d = 0; d < x.cols(); ++d) c += x(i, d) * y(j, d);
  c = std::clamp(c, -1.0, 1.0);
  const double sq = 2.0 - 2.0 * c;
  return sq <= 1e-14 ? 0.0 : std::sqrt(sq);
}

std::vector<std::size_t> brute_force_knn(const DenseMatrix& x, std::size_t i,
                                         std::size_t k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t j = 0; j < x.rows(); ++j) {
    if (j != i) all.emplace_back(dot_distance(x, i, x, j), j);
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < k; ++r) out.push_back(all[r].second);
  return out;
}

DenseMatrix dense_inverse(const DenseMatrix& a) {
  const std::size_t n = a.rows();
  DenseMatrix m = a;
  DenseMatrix inv = DenseMatrix::identity(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t pivot = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(m(r, c)) > std::abs(m(pivot, c))) pivot = r;
    }
    if (m(pivot, c) == 0.0) throw std::runtime_error("dense_inverse: singular");
    for (std::size_t k = 0; k < n; ++k) {
      std::swap(m(c, k), m(pivot, k));
      std::swap(inv(c, k), inv(pivot, k));
    }
    const double d = m(c, c);
    for (std::size_t k = 0; k < n; ++k) {
      m(c, k) /= d;
      inv(c, k) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = m(r, c);
      for (std::size_t k = 0; k < n; ++k) {
        m(r, k) -= f * m(c, k);
        inv(r, k) -= f * inv(c, k);
      }
    }
  }
  return inv;
}

double compensated_norm(const std::vector<double>& v) {
  double sum = 0.0;
  double carry = 0.0;
  for (std::size_t i = v.size(); i-- > 0;) {
    const double y = v[i] * v[i] - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return std::sqrt(sum);
}

double affine_objective(const std::vector<double>& anchor,
                        const std::vector<std::vector<double>>& neighbors,
                        const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t d = 0; d < anchor.size(); ++d) {
    double r = anchor[d];
    for (std::size_t j = 0; j < neighbors.size(); ++j) r -= w[j] * neighbors[j][d];
    s += r * r;
  }
  return s;
}

std::vector<double> projected_gradient_weights(
    const std::vector<double>& anchor,
    const std::vector<std::vector<double>>& neighbors) {
  const std::size_t k = neighbors.size();
  if (k == 1) return {1.0};
  const std::size_t dim = anchor.size();
  // With w_1 = 1 - sum_{j>1} v_j the residual is b - B v where
  // b = anchor - n_1 and column j of B is n_{j+1} - n_1.
  std::vector<double> b(dim);
  std::vector<std::vector<double>> cols(k - 1, std::vector<double>(dim));
  for (std::size_t d = 0; d < dim; ++d) {
    b[d] = anchor[d] - neighbors[0][d];
    for (std::size_t j = 1; j < k; ++j) cols[j - 1][d] = neighbors[j][d] - neighbors[0][d];
  }
  std::vector<double> v(k - 1, 0.0);
  std::vector<double> residual = b;
  for (int iter = 0; iter < 200000; ++iter) {
    // gradient of |b - B v|^2 / 2 is -B^T r
    std::vector<double> g(k - 1, 0.0);
    double gnorm = 0.0;
    for (std::size_t j = 0; j + 1 < k; ++j) {
      for (std::size_t d = 0; d < dim; ++d) g[j] -= cols[j][d] * residual[d];
      gnorm += g[j] * g[j];
    }
    if (gnorm < 1e-30) break;
    std::vector<double> bg(dim, 0.0);
    for (std::size_t j = 0; j + 1 < k; ++j) {
      for (std::size_t d = 0; d < dim; ++d) bg[d] += cols[j][d] * g[j];
    }
    double curv = 0.0;
    for (const double x : bg) curv += x * x;
    if (curv <= 0.0) break;
    const double step = gnorm / curv;
    for (std::size_t j = 0; j + 1 < k; ++j) v[j] -= step * g[j];
    for (std::size_t d = 0; d < dim; ++d) residual[d] += step * bg[d];
  }
  std::vector<double> w(k);
  w[0] = 1.0 - std::accumulate(v.begin(), v.end(), 0.0);
  for (std::size_t j = 1; j < k; ++j) w[j] = v[j - 1];
  return w;
}

double sweep_fpr95(const std::vector<LabeledDistance>& samples) {
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  for (const auto& s : samples) (s.is_match ? n_pos : n_neg)++;
  double best_threshold = std::numeric_limits<double>::infinity();
  for (const auto& candidate : samples) {
    std::size_t accepted = 0;
    for (const auto& s : samples) {
      if (s.is_match && s.distance <= candidate.distance) ++accepted;
    }
    if (100 * accepted >= 95 * n_pos && candidate.distance < best_threshold) {
      best_threshold = candidate.distance;
    }
  }
  std::size_t false_pos = 0;
  for (const auto& s : samples) {
    if (!s.is_match && s.distance <= best_threshold) ++false_pos;
  }
  return static_cast<double>(false_pos) / static_cast<double>(n_neg);
}

double ranking_map(const DenseMatrix& queries, const DenseMatrix& gallery,
                   const std::vector<std::size_t>& truth) {
  double total = 0.0;
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    std::vector<std::size_t> order(gallery.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double da = dot_distance(queries, q, gallery, a);
      const double db = dot_distance(queries, q, gallery, b);
      if (da != db) return da < db;
      // ties: the true match goes last among equals
      return (a != truth[q]) && (b == truth[q]);
    });
    const auto pos = std::find(order.begin(), order.end(), truth[q]) - order.begin();
    total += 1.0 / static_cast<double>(pos + 1);
  }
  return total / static_cast<double>(queries.rows());
}

namespace {

std::vector<double> dense_topology(const DenseMatrix& x, std::size_t i,
                                   const LossConfig& cfg) {
  const std::size_t n = x.rows();
  const std::size_t dim = x.cols();
  const auto nb = brute_force_knn(x, i, cfg.k);
  const std::size_t k = nb.size();
  DenseMatrix s(k, k);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      double v = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        v += (x(i, d) - x(nb[a], d)) * (x(i, d) - x(nb[b], d));
      }
      s(a, b) = v;
    }
  }
  double trace = 0.0;
  for (std::size_t a = 0; a < k; ++a) trace += s(a, a);
  for (std::size_t a = 0; a < k; ++a) s(a, a) += cfg.lle_eps * trace / static_cast<double>(k);
  const DenseMatrix inv = dense_inverse(s);
  std::vector<double> u(k, 0.0);
  double total = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) u[a] += inv(a, b);
    total += u[a];
  }
  std::vector<double> t(n, 0.0);
  for (std::size_t a = 0; a < k; ++a) t[nb[a]] = u[a] / total;
  return t;
}

}  // namespace

double reference_batch_loss(const DenseMatrix& a, const DenseMatrix& p,
                            double lambda, const LossConfig& cfg) {
  const std::size_t n = a.rows();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d_e = dot_distance(a, i, p, i);
    const auto ta = dense_topology(a, i, cfg);
    const auto tp = dense_topology(p, i, cfg);
    double l1 = 0.0;
    for (std::size_t j = 0; j < n; ++j) l1 += std::abs(ta[j] - tp[j]);
    const double gamma_plus = lambda * d_e + (1.0 - lambda) * l1 / 4.0;
    double gamma_minus = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      gamma_minus = std::min(gamma_minus, dot_distance(a, i, p, j));
      gamma_minus = std::min(gamma_minus, dot_distance(a, j, p, i));
    }
    loss += std::max(0.0, cfg.margin + gamma_plus - gamma_minus);
  }
  return loss / static_cast<double>(n);
}

}  // namespace tcdesc::oracle
