#include "tcdesc/net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "binary_io.hpp"
#include "tcdesc/error.hpp"

namespace tcdesc {

namespace {

constexpr char kCheckpointMagic[5] = "TCD1";

template <typename T>
std::size_t tensor_size(const DenseLayer<T>& layer, bool bias) {
  return bias ? layer.bias.size() : layer.weight.size();
}

// Locates a flat parameter index: (layer, is_bias, offset within tensor).
template <typename T>
std::tuple<std::size_t, bool, std::size_t> locate(
    const std::vector<DenseLayer<T>>& layers, std::size_t index) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (const bool bias : {false, true}) {
      const std::size_t size = tensor_size(layers[l], bias);
      if (index < size) return {l, bias, index};
      index -= size;
    }
  }
  throw Error(ErrorKind::kInvalidArgument, "parameter index out of range");
}

}  // namespace

template <typename T>
EmbeddingNet<T>::EmbeddingNet(std::vector<DenseLayer<T>> layers)
    : layers_(std::move(layers)) {
  if (layers_.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "EmbeddingNet: no layers");
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.rows() != 1 || layer.bias.cols() != layer.weight.rows() ||
        layer.weight.rows() == 0 || layer.weight.cols() == 0) {
      throw Error(ErrorKind::kInvalidArgument,
                  "EmbeddingNet: bad shape in layer " + std::to_string(l));
    }
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "EmbeddingNet: width mismatch entering layer " +
                      std::to_string(l));
    }
  }
}

template <typename T>
EmbeddingNet<T> EmbeddingNet<T>::create(const std::vector<std::size_t>& widths,
                                        std::uint64_t seed,
                                        Activation hidden) {
  if (widths.size() < 2) {
    throw Error(ErrorKind::kInvalidArgument,
                "EmbeddingNet: need at least input and output widths");
  }
  std::mt19937_64 rng(seed);
  std::vector<DenseLayer<T>> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l];
    const std::size_t out = widths[l + 1];
    if (in == 0 || out == 0) {
      throw Error(ErrorKind::kInvalidArgument, "EmbeddingNet: zero width");
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> init(-bound, bound);
    DenseLayer<T> layer;
    layer.weight = Matrix<T>(out, in);
    layer.bias = Matrix<T>(1, out);
    for (T& w : layer.weight.data()) w = static_cast<T>(init(rng));
    for (T& b : layer.bias.data()) b = static_cast<T>(init(rng));
    layer.activation =
        l + 2 == widths.size() ? Activation::kIdentity : hidden;
    layers.push_back(std::move(layer));
  }
  return EmbeddingNet(std::move(layers));
}

template <typename T>
std::vector<std::size_t> EmbeddingNet<T>::widths() const {
  std::vector<std::size_t> w;
  if (layers_.empty()) return w;
  w.push_back(layers_.front().weight.cols());
  for (const auto& l : layers_) w.push_back(l.weight.rows());
  return w;
}

template <typename T>
std::size_t EmbeddingNet<T>::input_dim() const {
  return layers_.empty() ? 0 : layers_.front().weight.cols();
}

template <typename T>
std::size_t EmbeddingNet<T>::output_dim() const {
  return layers_.empty() ? 0 : layers_.back().weight.rows();
}

template <typename T>
std::size_t EmbeddingNet<T>::parameter_count() const {
  std::size_t count = 0;
  for (const auto& l : layers_) count += l.weight.size() + l.bias.size();
  return count;
}

template <typename T>
T EmbeddingNet<T>::parameter(std::size_t index) const {
  const auto [l, bias, offset] = locate(layers_, index);
  return bias ? layers_[l].bias.data()[offset]
              : layers_[l].weight.data()[offset];
}

template <typename T>
void EmbeddingNet<T>::set_parameter(std::size_t index, T value) {
  const auto [l, bias, offset] = locate(layers_, index);
  (bias ? layers_[l].bias : layers_[l].weight).data()[offset] = value;
}

template <typename T>
std::string EmbeddingNet<T>::parameter_name(std::size_t index) const {
  const auto [l, bias, offset] = locate(layers_, index);
  const auto& layer = layers_[l];
  std::string name = "layer" + std::to_string(l);
  if (bias) return name + ".bias[" + std::to_string(offset) + "]";
  const std::size_t cols = layer.weight.cols();
  return name + ".weight[" + std::to_string(offset / cols) + "," +
         std::to_string(offset % cols) + "]";
}

template <typename T>
ForwardPass<T> forward(const EmbeddingNet<T>& net, const Matrix<T>& patches,
                       ForwardOptions options) {
  if (patches.cols() != net.input_dim()) {
    throw Error(ErrorKind::kInvalidInput,
                "forward: patch dimension " + std::to_string(patches.cols()) +
                    " does not match net input width " +
                    std::to_string(net.input_dim()));
  }
  ForwardPass<T> pass;
  ad::Var h = pass.tape.leaf(patches, false);
  for (const auto& layer : net.layers()) {
    const ad::Var w = pass.tape.leaf(layer.weight);
    const ad::Var b = pass.tape.leaf(layer.bias);
    pass.parameters.push_back(w);
    pass.parameters.push_back(b);
    h = ad::linear(pass.tape, h, w, b);
    switch (layer.activation) {
      case Activation::kIdentity:
        break;
      case Activation::kTanh:
        h = ad::tanh(pass.tape, h,
                     options.corrupt_activation_derivative ? T(1.05) : T(1));
        break;
      case Activation::kRelu:
        h = ad::relu(pass.tape, h);
        break;
    }
  }
  pass.output = ad::normalize_rows(pass.tape, h);
  return pass;
}

template <typename T>
Matrix<T> embed(const EmbeddingNet<T>& net, const Matrix<T>& patches) {
  ForwardPass<T> pass = forward(net, patches);
  return pass.tape.value(pass.output);
}

template <typename T>
ad::Var attach_batch_loss(ForwardPass<T>& pass, std::uint64_t iteration,
                          const LossConfig& cfg, LossReport* report) {
  const Matrix<T>& desc = pass.descriptors();
  if (desc.rows() % 2 != 0) {
    throw Error(ErrorKind::kInvalidBatch,
                "attach_batch_loss: descriptor rows must be 2n (A then P)");
  }
  const std::size_t n = desc.rows() / 2;
  const std::size_t dim = desc.cols();
  DenseMatrix anchors(n, dim);
  DenseMatrix positives(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) {
      anchors(i, d) = static_cast<double>(desc(i, d));
      positives(i, d) = static_cast<double>(desc(n + i, d));
    }
  }
  LossGradient grad;
  const LossReport r = batch_loss(anchors, positives, iteration, cfg, &grad);
  if (report != nullptr) *report = r;

  Matrix<T> stacked(2 * n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) {
      stacked(i, d) = static_cast<T>(grad.anchors(i, d));
      stacked(n + i, d) = static_cast<T>(grad.positives(i, d));
    }
  }
  const ad::Var input = pass.output;
  return pass.tape.record(
      Matrix<T>(1, 1, static_cast<T>(r.loss)), {input},
      [input, stacked = std::move(stacked)](ad::Tape<T>& t, ad::Var self) {
        const T seed = t.grad(self)(0, 0);
        Matrix<T> g = stacked;
        for (T& v : g.data()) v *= seed;
        t.accumulate(input, g);
      });
}

template <typename T>
Gradients<T> backward(const EmbeddingNet<T>& net, ForwardPass<T>& pass,
                      T loss_adjoint) {
  Gradients<T> grads;
  for (const auto& layer : net.layers()) {
    grads.emplace_back(layer.weight.rows(), layer.weight.cols());
    grads.emplace_back(layer.bias.rows(), layer.bias.cols());
  }
  if (pass.tape.empty()) return grads;
  pass.tape.backward(pass.tape.last(), loss_adjoint);
  for (std::size_t p = 0; p < pass.parameters.size() && p < grads.size(); ++p) {
    const Matrix<T>& g = pass.tape.grad(pass.parameters[p]);
    if (!g.empty()) grads[p] = g;
  }
  return grads;
}

namespace {

Matrix<double> stack_rows(const Matrix<double>& top, const Matrix<double>& bottom) {
  if (top.rows() != bottom.rows() || top.cols() != bottom.cols()) {
    throw Error(ErrorKind::kInvalidBatch,
                "anchor and positive patch batches differ in shape");
  }
  Matrix<double> out(top.rows() * 2, top.cols());
  std::copy(top.data().begin(), top.data().end(), out.data().begin());
  std::copy(bottom.data().begin(), bottom.data().end(),
            out.data().begin() + static_cast<std::ptrdiff_t>(top.size()));
  return out;
}

std::pair<DenseMatrix, DenseMatrix> split_halves(const Matrix<double>& desc) {
  const std::size_t n = desc.rows() / 2;
  const auto half = static_cast<std::ptrdiff_t>(n * desc.cols());
  DenseMatrix anchors(n, desc.cols());
  DenseMatrix positives(n, desc.cols());
  std::copy(desc.data().begin(), desc.data().begin() + half,
            anchors.data().begin());
  std::copy(desc.data().begin() + half, desc.data().end(),
            positives.data().begin());
  return {std::move(anchors), std::move(positives)};
}

// In detached mode the topology distances are constants of the base point.
double loss_value(const EmbeddingNet<double>& net, const Matrix<double>& patches,
                  std::uint64_t iteration, const LossConfig& cfg,
                  const std::vector<double>* frozen_topology) {
  const auto [anchors, positives] = split_halves(embed(net, patches));
  if (frozen_topology != nullptr) {
    return batch_loss_frozen_topology(anchors, positives, iteration, cfg,
                                      *frozen_topology)
        .loss;
  }
  return batch_loss(anchors, positives, iteration, cfg).loss;
}

}  // namespace

GradCheckReport grad_check(const EmbeddingNet<double>& net,
                           const Matrix<double>& anchor_patches,
                           const Matrix<double>& positive_patches,
                           const LossConfig& cfg, std::uint64_t iteration,
                           double step, std::uint64_t subset_seed,
                           ForwardOptions options) {
  const Matrix<double> patches = stack_rows(anchor_patches, positive_patches);
  ForwardPass<double> pass = forward(net, patches, options);
  attach_batch_loss(pass, iteration, cfg);
  const Gradients<double> grads = backward(net, pass, 1.0);
  std::vector<double> analytic;
  for (const auto& g : grads) {
    analytic.insert(analytic.end(), g.data().begin(), g.data().end());
  }

  std::vector<double> frozen;
  const bool detached = cfg.topology_mode == TopologyMode::kDetached;
  if (detached) {
    const auto [anchors, positives] = split_halves(pass.descriptors());
    frozen = batch_topology(anchors, positives, cfg.k, cfg.lle_eps, cfg.workers)
                 .distance;
  }

  std::vector<std::size_t> indices(net.parameter_count());
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  if (indices.size() > kGradCheckFullLimit) {
    std::mt19937_64 rng(subset_seed);
    std::shuffle(indices.begin(), indices.end(), rng);
    indices.resize(kGradCheckFullLimit);
    std::sort(indices.begin(), indices.end());
  }

  GradCheckReport report;
  report.step_size = step;
  report.checked_parameters = indices.size();
  EmbeddingNet<double> probe = net;
  for (const std::size_t p : indices) {
    const double original = probe.parameter(p);
    probe.set_parameter(p, original + step);
    const double up = loss_value(probe, patches, iteration, cfg,
                                 detached ? &frozen : nullptr);
    probe.set_parameter(p, original - step);
    const double down = loss_value(probe, patches, iteration, cfg,
                                   detached ? &frozen : nullptr);
    probe.set_parameter(p, original);
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic[p];
    const double err = std::abs(a - numeric) /
                       std::max({1.0, std::abs(a), std::abs(numeric)});
    if (report.worst_parameter.empty() || err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_parameter = net.parameter_name(p);
    }
  }
  return report;
}

template <typename T>
void SgdMomentum<T>::step(EmbeddingNet<T>& net, const Gradients<T>& grads,
                          double lr) {
  auto& layers = net.layers();
  if (grads.size() != 2 * layers.size()) {
    throw Error(ErrorKind::kInvalidInput,
                "sgd step: gradient list does not match parameters");
  }
  if (velocity_.empty()) {
    for (const auto& g : grads) velocity_.emplace_back(g.rows(), g.cols());
  }
  for (std::size_t p = 0; p < grads.size(); ++p) {
    Matrix<T>& param = p % 2 == 0 ? layers[p / 2].weight : layers[p / 2].bias;
    if (grads[p].size() != param.size()) {
      throw Error(ErrorKind::kInvalidInput,
                  "sgd step: gradient shape mismatch at tensor " +
                      std::to_string(p));
    }
    auto w = param.data();
    auto v = velocity_[p].data();
    const auto g = grads[p].data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double update = momentum_ * static_cast<double>(v[i]) +
                            static_cast<double>(g[i]) +
                            weight_decay_ * static_cast<double>(w[i]);
      v[i] = static_cast<T>(update);
      w[i] = static_cast<T>(static_cast<double>(w[i]) - lr * update);
    }
  }
}

double linear_learning_rate(std::uint64_t iteration,
                            std::uint64_t total_iterations, double lr_start,
                            double lr_end) {
  if (total_iterations == 0) return lr_start;
  const double frac = std::min(1.0, static_cast<double>(iteration) /
                                        static_cast<double>(total_iterations));
  return lr_start + (lr_end - lr_start) * frac;
}

template <typename T>
std::vector<unsigned char> encode_checkpoint(const EmbeddingNet<T>& net) {
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Activation expected =
        l + 1 == layers.size() ? Activation::kIdentity : Activation::kTanh;
    if (layers[l].activation != expected) {
      throw Error(ErrorKind::kInvalidArgument,
                  "checkpoint: only tanh hidden layers with a linear output "
                  "layer can be serialized");
    }
  }
  detail::ByteWriter out;
  out.bytes(kCheckpointMagic, 4);
  const auto widths = net.widths();
  out.integer(static_cast<std::uint32_t>(widths.size()));
  for (const std::size_t w : widths) out.integer(static_cast<std::uint32_t>(w));
  for (const auto& layer : layers) {
    for (const T v : layer.weight.data()) out.f64(static_cast<double>(v));
    for (const T v : layer.bias.data()) out.f64(static_cast<double>(v));
  }
  return std::move(out.buffer());
}

EmbeddingNet<double> decode_checkpoint(const std::vector<unsigned char>& bytes) {
  detail::ByteReader in(bytes, "checkpoint");
  in.expect_magic(kCheckpointMagic);
  const auto count = in.integer<std::uint32_t>("width count");
  if (count < 2 || count > 64) {
    throw Error(ErrorKind::kFormat,
                "checkpoint: implausible width count " + std::to_string(count));
  }
  std::vector<std::size_t> widths;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto w = in.integer<std::uint32_t>("layer width");
    if (w == 0 || w > (1u << 20)) {
      throw Error(ErrorKind::kFormat,
                  "checkpoint: bad layer width at offset " +
                      std::to_string(in.offset() - 4));
    }
    widths.push_back(w);
  }
  std::vector<DenseLayer<double>> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer<double> layer;
    layer.weight = DenseMatrix(widths[l + 1], widths[l]);
    layer.bias = DenseMatrix(1, widths[l + 1]);
    for (double& v : layer.weight.data()) v = in.f64("weight");
    for (double& v : layer.bias.data()) v = in.f64("bias");
    layer.activation =
        l + 2 == widths.size() ? Activation::kIdentity : Activation::kTanh;
    layers.push_back(std::move(layer));
  }
  in.expect_end();
  return EmbeddingNet<double>(std::move(layers));
}

template <typename T>
void write_checkpoint(const std::filesystem::path& path,
                      const EmbeddingNet<T>& net) {
  detail::write_file(path, encode_checkpoint(net));
}

EmbeddingNet<double> read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file(path));
}

#define TCDESC_INSTANTIATE_NET(T)                                            \
  template class EmbeddingNet<T>;                                            \
  template class SgdMomentum<T>;                                             \
  template ForwardPass<T> forward<T>(const EmbeddingNet<T>&,                 \
                                     const Matrix<T>&, ForwardOptions);      \
  template Matrix<T> embed<T>(const EmbeddingNet<T>&, const Matrix<T>&);    \
  template ad::Var attach_batch_loss<T>(ForwardPass<T>&, std::uint64_t,      \
                                        const LossConfig&, LossReport*);     \
  template Gradients<T> backward<T>(const EmbeddingNet<T>&, ForwardPass<T>&, \
                                    T);                                      \
  template std::vector<unsigned char> encode_checkpoint<T>(                  \
      const EmbeddingNet<T>&);                                               \
  template void write_checkpoint<T>(const std::filesystem::path&,           \
                                    const EmbeddingNet<T>&);

TCDESC_INSTANTIATE_NET(float)
TCDESC_INSTANTIATE_NET(double)

#undef TCDESC_INSTANTIATE_NET

}  // namespace tcdesc
