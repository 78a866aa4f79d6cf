#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tcdesc/loss.hpp"

namespace tcdesc {

enum class Precision { kSingle, kDouble };

// Everything a training run needs. Plain-text form is one `key = value` per
// line with `#` comments; keys match the CLI flags with '-' replaced by '_'.
struct RunConfig {
  LossConfig loss;
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t output_dim = 32;
  std::size_t batch_size = 64;
  std::uint64_t iterations = 2000;
  double lr_start = 0.1;
  double lr_end = 0.0;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t seed = 1;
  std::string data;
  std::string out;
  Precision precision = Precision::kDouble;
  double holdout = 0.2;
  std::uint64_t log_every = 1;

  // n=64, k=8, 2000 iterations; the lambda schedule is compressed by the
  // same factor as the iteration count (n0=400, N=80).
  static RunConfig desk();
  // n=1024, k=20, 250k iterations, n0=5e4, N=1e4, r=0.025, D=128.
  static RunConfig paper();
  static RunConfig preset(const std::string& name);

  /// Throws kInvalidArgument for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string to_text() const;
  void validate() const;
};

const std::vector<std::string>& config_keys();

/// Applies `key = value` lines on top of `cfg`.
void apply_config_text(RunConfig& cfg, std::string_view text);
void load_config_file(const std::filesystem::path& path, RunConfig& cfg);

}  // namespace tcdesc
