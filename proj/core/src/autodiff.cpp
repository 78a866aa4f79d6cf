#include "tcdesc/autodiff.hpp"

#include <cmath>
#include <string>

#include "tcdesc/error.hpp"

namespace tcdesc::ad {

template <typename T>
Var Tape<T>::leaf(Matrix<T> value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::record(Matrix<T> value, std::vector<Var> parents,
                    BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  for (const Var p : parents) {
    node.requires_grad = node.requires_grad || nodes_.at(p.id).requires_grad;
  }
  node.parents = std::move(parents);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

template <typename T>
void Tape<T>::accumulate(Var v, const Matrix<T>& contribution) {
  Node& node = nodes_.at(v.id);
  if (!node.requires_grad) return;
  if (node.grad.empty()) {
    node.grad = Matrix<T>(node.value.rows(), node.value.cols());
  }
  auto dst = node.grad.data();
  const auto src = contribution.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
void Tape<T>::backward(Var root, T seed) {
  for (Node& node : nodes_) node.grad = Matrix<T>();
  Node& top = nodes_.at(root.id);
  if (!top.requires_grad) return;
  top.grad = Matrix<T>(top.value.rows(), top.value.cols(), seed);
  for (std::size_t id = root.id + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.grad.empty() || !node.backward) continue;
    node.backward(*this, Var{id});
  }
}

template <typename T>
Var linear(Tape<T>& tape, Var x, Var weight, Var bias) {
  const Matrix<T>& xv = tape.value(x);
  const Matrix<T>& wv = tape.value(weight);
  const Matrix<T>& bv = tape.value(bias);
  if (xv.cols() != wv.cols() || bv.cols() != wv.rows() || bv.rows() != 1) {
    throw Error(ErrorKind::kInvalidInput,
                "linear: shape mismatch (input width " +
                    std::to_string(xv.cols()) + ", layer expects " +
                    std::to_string(wv.cols()) + ")");
  }
  const std::size_t n = xv.rows();
  const std::size_t in = wv.cols();
  const std::size_t out = wv.rows();
  Matrix<T> y(n, out);
  for (std::size_t r = 0; r < n; ++r) {
    const auto xr = xv.row(r);
    for (std::size_t o = 0; o < out; ++o) {
      const auto wr = wv.row(o);
      T acc = bv(0, o);
      for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
      y(r, o) = acc;
    }
  }
  return tape.record(std::move(y), {x, weight, bias}, [x, weight, bias](
                                                          Tape<T>& t, Var self) {
    const Matrix<T>& g = t.grad(self);
    const Matrix<T>& xv = t.value(x);
    const Matrix<T>& wv = t.value(weight);
    const std::size_t n = xv.rows();
    const std::size_t in = wv.cols();
    const std::size_t out = wv.rows();
    if (t.requires_grad(x)) {
      Matrix<T> gx(n, in);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t o = 0; o < out; ++o) {
          const T go = g(r, o);
          for (std::size_t i = 0; i < in; ++i) gx(r, i) += go * wv(o, i);
        }
      }
      t.accumulate(x, gx);
    }
    Matrix<T> gw(out, in);
    Matrix<T> gb(1, out);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t o = 0; o < out; ++o) {
        const T go = g(r, o);
        gb(0, o) += go;
        for (std::size_t i = 0; i < in; ++i) gw(o, i) += go * xv(r, i);
      }
    }
    t.accumulate(weight, gw);
    t.accumulate(bias, gb);
  });
}

template <typename T>
Var tanh(Tape<T>& tape, Var x, T derivative_scale) {
  Matrix<T> y = tape.value(x);
  for (T& v : y.data()) v = std::tanh(v);
  return tape.record(std::move(y), {x}, [x, derivative_scale](Tape<T>& t,
                                                              Var self) {
    const Matrix<T>& g = t.grad(self);
    const Matrix<T>& y = t.value(self);
    Matrix<T> gx(y.rows(), y.cols());
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const T yi = y.data()[i];
      gx.data()[i] = derivative_scale * g.data()[i] * (T{1} - yi * yi);
    }
    t.accumulate(x, gx);
  });
}

template <typename T>
Var relu(Tape<T>& tape, Var x) {
  Matrix<T> y = tape.value(x);
  for (T& v : y.data()) v = v > T{0} ? v : T{0};
  return tape.record(std::move(y), {x}, [x](Tape<T>& t, Var self) {
    const Matrix<T>& g = t.grad(self);
    const Matrix<T>& xv = t.value(x);
    Matrix<T> gx(xv.rows(), xv.cols());
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx.data()[i] = xv.data()[i] > T{0} ? g.data()[i] : T{0};
    }
    t.accumulate(x, gx);
  });
}

template <typename T>
Var normalize_rows(Tape<T>& tape, Var x) {
  const Matrix<T>& xv = tape.value(x);
  Matrix<T> y(xv.rows(), xv.cols());
  std::vector<T> norms(xv.rows());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    T acc{0};
    for (const T v : xv.row(r)) acc += v * v;
    const T norm = std::sqrt(acc);
    if (!(norm > T{0}) || !std::isfinite(norm)) {
      throw Error(ErrorKind::kDegenerateDescriptor,
                  "normalize_rows: row " + std::to_string(r) +
                      " has zero or non-finite norm before normalization");
    }
    norms[r] = norm;
    for (std::size_t c = 0; c < xv.cols(); ++c) y(r, c) = xv(r, c) / norm;
  }
  return tape.record(std::move(y), {x}, [x, norms = std::move(norms)](
                                            Tape<T>& t, Var self) {
    // dx = (g - y (y.g)) / |x|
    const Matrix<T>& g = t.grad(self);
    const Matrix<T>& y = t.value(self);
    Matrix<T> gx(y.rows(), y.cols());
    for (std::size_t r = 0; r < y.rows(); ++r) {
      T yg{0};
      for (std::size_t c = 0; c < y.cols(); ++c) yg += y(r, c) * g(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) {
        gx(r, c) = (g(r, c) - y(r, c) * yg) / norms[r];
      }
    }
    t.accumulate(x, gx);
  });
}

template <typename T>
Var square(Tape<T>& tape, Var x) {
  Matrix<T> y = tape.value(x);
  for (T& v : y.data()) v = v * v;
  return tape.record(std::move(y), {x}, [x](Tape<T>& t, Var self) {
    const Matrix<T>& g = t.grad(self);
    const Matrix<T>& xv = t.value(x);
    Matrix<T> gx(xv.rows(), xv.cols());
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx.data()[i] = T{2} * xv.data()[i] * g.data()[i];
    }
    t.accumulate(x, gx);
  });
}

template <typename T>
Var sum(Tape<T>& tape, Var x) {
  T acc{0};
  for (const T v : tape.value(x).data()) acc += v;
  return tape.record(Matrix<T>(1, 1, acc), {x}, [x](Tape<T>& t, Var self) {
    const Matrix<T>& xv = t.value(x);
    t.accumulate(x, Matrix<T>(xv.rows(), xv.cols(), t.grad(self)(0, 0)));
  });
}

#define TCDESC_INSTANTIATE_AD(T)                           \
  template class Tape<T>;                                  \
  template Var linear<T>(Tape<T>&, Var, Var, Var);         \
  template Var tanh<T>(Tape<T>&, Var, T);                  \
  template Var relu<T>(Tape<T>&, Var);                     \
  template Var normalize_rows<T>(Tape<T>&, Var);           \
  template Var square<T>(Tape<T>&, Var);                   \
  template Var sum<T>(Tape<T>&, Var);

TCDESC_INSTANTIATE_AD(float)
TCDESC_INSTANTIATE_AD(double)

#undef TCDESC_INSTANTIATE_AD

}  // namespace tcdesc::ad
