#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tcdesc/config.hpp"
#include "tcdesc/data.hpp"
#include "tcdesc/eval.hpp"
#include "tcdesc/loss.hpp"
#include "tcdesc/net.hpp"

namespace tcdesc {

struct TrainLogRow {
  std::uint64_t iteration = 0;
  LossReport report;
};

struct TrainResult {
  EmbeddingNet<double> net;
  std::vector<TrainLogRow> log;
};

using TrainObserver = std::function<void(const TrainLogRow&)>;

/// Widths of the net a config builds for inputs of `input_dim`.
std::vector<std::size_t> net_widths(const RunConfig& cfg, std::size_t input_dim);

/// sample -> forward -> batch loss -> backward -> SGD step, for
/// cfg.iterations steps over `train_split`. Throws kDivergence naming the
/// last good iteration when the loss stops being finite.
TrainResult train(const Dataset& train_split, const RunConfig& cfg,
                  const TrainObserver& observer = {});

/// Embeds both views of `split` and scores them.
MetricReport evaluate_net(const EmbeddingNet<double>& net, const Dataset& split,
                          std::size_t negatives_per_positive, std::uint64_t seed);

std::string train_log_header();
std::string format_train_log_row(const TrainLogRow& row);

}  // namespace tcdesc
