#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <utility>
#include <vector>

#include "tcdesc/matrix.hpp"

namespace tcdesc {

inline constexpr std::uint32_t kDatasetVersion = 1;

// TCPD header. Generator parameters are echoed for provenance.
struct DatasetHeader {
  std::uint32_t version = kDatasetVersion;
  std::uint32_t scene_count = 0;
  std::uint32_t dim = 0;
  std::uint64_t seed = 0;
  float noise_sigma = 0.0f;
  float distortion = 0.0f;

  friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

// Two raw views of one synthetic scene. Values are float-representable so a
// dataset survives the 4-byte file encoding unchanged.
struct PatchPair {
  std::uint32_t scene_id = 0;
  std::vector<double> view_a;
  std::vector<double> view_p;

  friend bool operator==(const PatchPair&, const PatchPair&) = default;
};

struct Dataset {
  DatasetHeader header;
  std::vector<PatchPair> records;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct GeneratorParams {
  std::uint64_t seed = 0;
  std::size_t scenes = 512;
  std::size_t dim = 16;
  double noise_sigma = 0.05;
  double distortion = 0.3;
};

/// Per scene: latent ~ N(0, I); view_a = latent + noise, view_p = R latent +
/// noise, with R = I + distortion * E / |E|_F for one seeded Gaussian E per
/// dataset (so |R - I| <= distortion) and noise ~ N(0, noise_sigma^2 I).
Dataset generate(const GeneratorParams& params);

// Layout (little-endian): "TCPD", u32 version, u32 scene count, u32 dim,
// u64 seed, f32 noise_sigma, f32 distortion, then per record u32 scene_id,
// dim f32 view_a, dim f32 view_p.
std::vector<unsigned char> encode_dataset(const Dataset& dataset);
Dataset decode_dataset(const std::vector<unsigned char>& bytes);

void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& path);

// Row i of `anchors` and row i of `positives` come from scene_ids[i].
struct PatchBatch {
  std::vector<std::uint32_t> scene_ids;
  DenseMatrix anchors;
  DenseMatrix positives;
};

/// Draws `batch_size` distinct scenes without replacement.
PatchBatch sample_batch(const Dataset& dataset, std::size_t batch_size,
                        std::mt19937_64& rng);

/// Every record of the dataset in file order.
PatchBatch all_pairs(const Dataset& dataset);

/// Splits off the trailing `fraction` of records as a held-out set.
/// Returns {train, held_out}.
std::pair<Dataset, Dataset> split_holdout(const Dataset& dataset,
                                          double fraction);

}  // namespace tcdesc
