#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "tcdesc/matrix.hpp"

namespace tcdesc::ad {

// Handle to a node on a Tape.
struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;

  bool valid() const noexcept { return id != kNone; }
  friend bool operator==(Var, Var) = default;
};

// Matrix-valued reverse-mode tape. Nodes are appended in evaluation order and
// replayed in reverse, which fixes the accumulation order of every gradient.
template <typename T>
class Tape {
 public:
  // Called during the reverse sweep once the node's gradient is complete;
  // pushes contributions to the parents through accumulate().
  using BackwardFn = std::function<void(Tape&, Var self)>;

  Var leaf(Matrix<T> value, bool requires_grad = true);
  Var record(Matrix<T> value, std::vector<Var> parents, BackwardFn backward);

  const Matrix<T>& value(Var v) const { return nodes_.at(v.id).value; }
  // Empty until the reverse sweep reaches the node.
  const Matrix<T>& grad(Var v) const { return nodes_.at(v.id).grad; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  void accumulate(Var v, const Matrix<T>& contribution);

  /// Seeds every entry of `root`'s gradient with `seed` and sweeps backward.
  /// Gradients from a previous sweep are discarded first.
  void backward(Var root, T seed);

  Var last() const { return nodes_.empty() ? Var{} : Var{nodes_.size() - 1}; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Matrix<T> value;
    Matrix<T> grad;
    std::vector<Var> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// y = x W^T + b for x (n x in), W (out x in), b (1 x out).
template <typename T>
Var linear(Tape<T>& tape, Var x, Var weight, Var bias);

// `derivative_scale` multiplies the recorded derivative rule; it is 1 except
// in negative-control tests that need a deliberately wrong gradient.
template <typename T>
Var tanh(Tape<T>& tape, Var x, T derivative_scale = T{1});

template <typename T>
Var relu(Tape<T>& tape, Var x);

/// Scales each row to unit l2 norm. A row of norm zero throws
/// kDegenerateDescriptor.
template <typename T>
Var normalize_rows(Tape<T>& tape, Var x);

template <typename T>
Var square(Tape<T>& tape, Var x);

// Sum of all entries as a 1x1 node.
template <typename T>
Var sum(Tape<T>& tape, Var x);

}  // namespace tcdesc::ad
