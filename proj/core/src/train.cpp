#include "tcdesc/train.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "tcdesc/error.hpp"

namespace tcdesc {

namespace {

// Keeps the sampler stream independent of the initialization stream.
constexpr std::uint64_t kSamplerSeedOffset = 0x9E3779B97F4A7C15ULL;

template <typename T>
Matrix<T> stack_views(const PatchBatch& batch) {
  const std::size_t n = batch.anchors.rows();
  const std::size_t dim = batch.anchors.cols();
  Matrix<T> out(2 * n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) {
      out(i, d) = static_cast<T>(batch.anchors(i, d));
      out(n + i, d) = static_cast<T>(batch.positives(i, d));
    }
  }
  return out;
}

template <typename T>
TrainResult run(const Dataset& data, const RunConfig& cfg,
                const TrainObserver& observer) {
  EmbeddingNet<T> net = EmbeddingNet<double>::create(
                            net_widths(cfg, data.header.dim), cfg.seed)
                            .template cast<T>();
  SgdMomentum<T> optimizer(cfg.momentum, cfg.weight_decay);
  std::mt19937_64 sampler(cfg.seed + kSamplerSeedOffset);
  TrainResult result;
  std::uint64_t last_good = 0;
  bool any_good = false;
  for (std::uint64_t it = 0; it < cfg.iterations; ++it) {
    const PatchBatch batch = sample_batch(data, cfg.batch_size, sampler);
    ForwardPass<T> pass;
    LossReport report;
    try {
      pass = forward(net, stack_views<T>(batch));
      attach_batch_loss(pass, it, cfg.loss, &report);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kInvalidInput &&
          e.kind() != ErrorKind::kDegenerateDescriptor) {
        throw;
      }
      report.loss = std::nan("");
    }
    if (!std::isfinite(report.loss)) {
      throw Error(ErrorKind::kDivergence,
                  "training diverged at iteration " + std::to_string(it) +
                      (any_good ? "; last good iteration " +
                                      std::to_string(last_good)
                                : std::string("; no good iteration")));
    }
    const Gradients<T> grads = backward(net, pass, T{1});
    const double lr =
        linear_learning_rate(it, cfg.iterations, cfg.lr_start, cfg.lr_end);
    optimizer.step(net, grads, lr);
    last_good = it;
    any_good = true;

    if (it % cfg.log_every == 0 || it + 1 == cfg.iterations) {
      TrainLogRow row{it, report};
      if (observer) observer(row);
      result.log.push_back(row);
    }
  }
  result.net = net.template cast<double>();
  return result;
}

}  // namespace

std::vector<std::size_t> net_widths(const RunConfig& cfg, std::size_t input_dim) {
  std::vector<std::size_t> widths{input_dim};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(cfg.output_dim);
  return widths;
}

TrainResult train(const Dataset& train_split, const RunConfig& cfg,
                  const TrainObserver& observer) {
  cfg.validate();
  if (train_split.records.size() < cfg.batch_size) {
    throw Error(ErrorKind::kInvalidArgument,
                "train: batch size " + std::to_string(cfg.batch_size) +
                    " exceeds the " + std::to_string(train_split.records.size()) +
                    " training scenes");
  }
  if (cfg.precision == Precision::kSingle) {
    return run<float>(train_split, cfg, observer);
  }
  return run<double>(train_split, cfg, observer);
}

MetricReport evaluate_net(const EmbeddingNet<double>& net, const Dataset& split,
                          std::size_t negatives_per_positive,
                          std::uint64_t seed) {
  if (split.header.dim != net.input_dim()) {
    throw Error(ErrorKind::kFormat,
                "evaluate: dataset dim " + std::to_string(split.header.dim) +
                    " does not match net input width " +
                    std::to_string(net.input_dim()));
  }
  const PatchBatch batch = all_pairs(split);
  return evaluate_descriptors(embed(net, batch.anchors),
                              embed(net, batch.positives),
                              negatives_per_positive, seed);
}

std::string train_log_header() {
  return "iteration,lambda,loss,mean_d_pos_euclid,mean_d_pos_topo,mean_d_neg,"
         "active_triplets";
}

std::string format_train_log_row(const TrainLogRow& row) {
  char buf[256];
  const LossReport& r = row.report;
  std::snprintf(buf, sizeof(buf), "%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%zu",
                static_cast<unsigned long long>(row.iteration), r.lambda, r.loss,
                r.mean_d_pos_euclid, r.mean_d_pos_topo, r.mean_d_neg,
                r.active_triplets);
  return buf;
}

}  // namespace tcdesc
