#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tcdesc/autodiff.hpp"
#include "tcdesc/loss.hpp"
#include "tcdesc/matrix.hpp"

namespace tcdesc {

enum class Activation { kIdentity, kTanh, kRelu };

template <typename T>
struct DenseLayer {
  Matrix<T> weight;  // out x in
  Matrix<T> bias;    // 1 x out
  Activation activation = Activation::kIdentity;
};

// Multilayer perceptron followed by row-wise l2 normalization. Parameters are
// ordered layer by layer, weight (row-major) before bias; checkpoints and
// gradient vectors use the same order.
template <typename T>
class EmbeddingNet {
 public:
  EmbeddingNet() = default;
  explicit EmbeddingNet(std::vector<DenseLayer<T>> layers);

  /// Hidden layers use `hidden`, the last layer is linear. Weights and biases
  /// are drawn uniformly from +-1/sqrt(fan_in).
  static EmbeddingNet create(const std::vector<std::size_t>& widths,
                             std::uint64_t seed,
                             Activation hidden = Activation::kTanh);

  std::vector<std::size_t> widths() const;
  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;

  const std::vector<DenseLayer<T>>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer<T>>& layers() noexcept { return layers_; }

  // Flat parameter access in checkpoint order.
  T parameter(std::size_t index) const;
  void set_parameter(std::size_t index, T value);
  std::string parameter_name(std::size_t index) const;

  template <typename U>
  EmbeddingNet<U> cast() const {
    std::vector<DenseLayer<U>> out;
    out.reserve(layers_.size());
    for (const auto& l : layers_) {
      out.push_back({l.weight.template cast<U>(), l.bias.template cast<U>(),
                     l.activation});
    }
    return EmbeddingNet<U>(std::move(out));
  }

 private:
  std::vector<DenseLayer<T>> layers_;
};

// One matrix per parameter tensor: weight, bias, weight, bias, ...
template <typename T>
using Gradients = std::vector<Matrix<T>>;

struct ForwardOptions {
  // Negative control: scales the recorded tanh derivative by 1.05.
  bool corrupt_activation_derivative = false;
};

template <typename T>
struct ForwardPass {
  ad::Tape<T> tape;
  std::vector<ad::Var> parameters;
  ad::Var output;

  const Matrix<T>& descriptors() const { return tape.value(output); }
};

/// Embeds each row of `patches` into a unit descriptor, recording the tape.
template <typename T>
ForwardPass<T> forward(const EmbeddingNet<T>& net, const Matrix<T>& patches,
                       ForwardOptions options = {});

/// Descriptors only.
template <typename T>
Matrix<T> embed(const EmbeddingNet<T>& net, const Matrix<T>& patches);

/// Appends the batch loss as a 1x1 node. The forward output must hold 2n rows:
/// anchors first, then their matching positives in the same order. Loss
/// arithmetic runs in double regardless of T.
template <typename T>
ad::Var attach_batch_loss(ForwardPass<T>& pass, std::uint64_t iteration,
                          const LossConfig& cfg, LossReport* report = nullptr);

/// Sweeps the tape back from its last node. An empty tape yields zero
/// gradients shaped like the net's parameters.
template <typename T>
Gradients<T> backward(const EmbeddingNet<T>& net, ForwardPass<T>& pass,
                      T loss_adjoint);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  double step_size = 0.0;
  std::size_t checked_parameters = 0;
};

inline constexpr std::size_t kGradCheckFullLimit = 1000;

/// Compares analytic gradients of the batch loss with central differences.
/// Relative error is |analytic - numeric| / max(1, |analytic|, |numeric|).
/// Nets above kGradCheckFullLimit parameters are checked on a seeded subset.
/// In detached mode the numeric side holds d_T at its unperturbed values.
GradCheckReport grad_check(const EmbeddingNet<double>& net,
                           const Matrix<double>& anchor_patches,
                           const Matrix<double>& positive_patches,
                           const LossConfig& cfg, std::uint64_t iteration,
                           double step, std::uint64_t subset_seed = 0,
                           ForwardOptions options = {});

// Classical momentum with L2 weight decay:
//   v <- momentum * v + (g + weight_decay * w);  w <- w - lr * v
template <typename T>
class SgdMomentum {
 public:
  SgdMomentum(double momentum, double weight_decay)
      : momentum_(momentum), weight_decay_(weight_decay) {}

  void step(EmbeddingNet<T>& net, const Gradients<T>& grads, double lr);

  const Gradients<T>& velocity() const noexcept { return velocity_; }

 private:
  double momentum_;
  double weight_decay_;
  Gradients<T> velocity_;
};

/// Linear interpolation from lr_start at iteration 0 to lr_end at
/// `total_iterations`.
double linear_learning_rate(std::uint64_t iteration,
                            std::uint64_t total_iterations, double lr_start,
                            double lr_end);

// TCD1 checkpoint: magic "TCD1", u32 width count, u32 widths, then every
// parameter as a little-endian IEEE-754 double in parameter order. Hidden
// layers are tanh and the last layer linear.
template <typename T>
std::vector<unsigned char> encode_checkpoint(const EmbeddingNet<T>& net);
EmbeddingNet<double> decode_checkpoint(const std::vector<unsigned char>& bytes);

template <typename T>
void write_checkpoint(const std::filesystem::path& path,
                      const EmbeddingNet<T>& net);
EmbeddingNet<double> read_checkpoint(const std::filesystem::path& path);

}  // namespace tcdesc
