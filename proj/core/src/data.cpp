#include "tcdesc/data.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "binary_io.hpp"
#include "tcdesc/error.hpp"

namespace tcdesc {

namespace {

constexpr char kDatasetMagic[5] = "TCPD";

double as_float(double v) { return static_cast<double>(static_cast<float>(v)); }

PatchBatch gather(const Dataset& dataset,
                  const std::vector<std::size_t>& indices) {
  const std::size_t dim = dataset.header.dim;
  PatchBatch batch;
  batch.anchors = DenseMatrix(indices.size(), dim);
  batch.positives = DenseMatrix(indices.size(), dim);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const PatchPair& pair = dataset.records[indices[r]];
    batch.scene_ids.push_back(pair.scene_id);
    std::copy(pair.view_a.begin(), pair.view_a.end(), batch.anchors.row(r).begin());
    std::copy(pair.view_p.begin(), pair.view_p.end(),
              batch.positives.row(r).begin());
  }
  return batch;
}

}  // namespace

Dataset generate(const GeneratorParams& params) {
  if (params.scenes < 2) {
    throw Error(ErrorKind::kInvalidArgument,
                "generate: need at least 2 scenes, got " +
                    std::to_string(params.scenes));
  }
  if (params.dim < 1) {
    throw Error(ErrorKind::kInvalidArgument, "generate: dim must be >= 1");
  }
  if (!(params.noise_sigma >= 0.0) || !(params.distortion >= 0.0)) {
    throw Error(ErrorKind::kInvalidArgument,
                "generate: noise and distortion must be >= 0");
  }
  const std::size_t dim = params.dim;
  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // R = I + distortion * E / |E|_F
  DenseMatrix r = DenseMatrix::identity(dim);
  {
    DenseMatrix e(dim, dim);
    double frob = 0.0;
    for (double& v : e.data()) {
      v = normal(rng);
      frob += v * v;
    }
    frob = std::sqrt(frob);
    if (frob > 0.0) {
      for (std::size_t i = 0; i < e.size(); ++i) {
        r.data()[i] += params.distortion * e.data()[i] / frob;
      }
    }
  }

  Dataset ds;
  ds.header.scene_count = static_cast<std::uint32_t>(params.scenes);
  ds.header.dim = static_cast<std::uint32_t>(dim);
  ds.header.seed = params.seed;
  ds.header.noise_sigma = static_cast<float>(params.noise_sigma);
  ds.header.distortion = static_cast<float>(params.distortion);
  ds.records.reserve(params.scenes);
  std::vector<double> latent(dim);
  for (std::size_t s = 0; s < params.scenes; ++s) {
    for (double& v : latent) v = normal(rng);
    PatchPair pair;
    pair.scene_id = static_cast<std::uint32_t>(s);
    pair.view_a.resize(dim);
    pair.view_p.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      pair.view_a[d] = as_float(latent[d] + params.noise_sigma * normal(rng));
    }
    for (std::size_t d = 0; d < dim; ++d) {
      double mapped = 0.0;
      for (std::size_t c = 0; c < dim; ++c) mapped += r(d, c) * latent[c];
      pair.view_p[d] = as_float(mapped + params.noise_sigma * normal(rng));
    }
    ds.records.push_back(std::move(pair));
  }
  return ds;
}

std::vector<unsigned char> encode_dataset(const Dataset& dataset) {
  const DatasetHeader& h = dataset.header;
  if (dataset.records.size() != h.scene_count) {
    throw Error(ErrorKind::kInvalidInput,
                "encode_dataset: record count differs from header scene count");
  }
  detail::ByteWriter out;
  out.bytes(kDatasetMagic, 4);
  out.integer(h.version);
  out.integer(h.scene_count);
  out.integer(h.dim);
  out.integer(h.seed);
  out.f32(h.noise_sigma);
  out.f32(h.distortion);
  for (const PatchPair& pair : dataset.records) {
    if (pair.view_a.size() != h.dim || pair.view_p.size() != h.dim) {
      throw Error(ErrorKind::kInvalidInput,
                  "encode_dataset: record " + std::to_string(pair.scene_id) +
                      " has the wrong dimension");
    }
    out.integer(pair.scene_id);
    for (const double v : pair.view_a) out.f32(static_cast<float>(v));
    for (const double v : pair.view_p) out.f32(static_cast<float>(v));
  }
  return std::move(out.buffer());
}

Dataset decode_dataset(const std::vector<unsigned char>& bytes) {
  detail::ByteReader in(bytes, "dataset");
  in.expect_magic(kDatasetMagic);
  Dataset ds;
  DatasetHeader& h = ds.header;
  h.version = in.integer<std::uint32_t>("version");
  if (h.version != kDatasetVersion) {
    throw Error(ErrorKind::kFormat,
                "dataset: unsupported version " + std::to_string(h.version) +
                    " at offset 4");
  }
  h.scene_count = in.integer<std::uint32_t>("scene count");
  h.dim = in.integer<std::uint32_t>("dim");
  h.seed = in.integer<std::uint64_t>("seed");
  h.noise_sigma = in.f32("noise sigma");
  h.distortion = in.f32("distortion");
  if (h.dim == 0) {
    throw Error(ErrorKind::kFormat, "dataset: zero dimension at offset 12");
  }
  const std::size_t record_bytes = 4 + 8 * static_cast<std::size_t>(h.dim);
  if (in.remaining() / record_bytes < h.scene_count) {
    throw Error(ErrorKind::kFormat,
                "dataset: truncated, expected " + std::to_string(h.scene_count) +
                    " records after offset " + std::to_string(in.offset()));
  }
  ds.records.reserve(h.scene_count);
  for (std::uint32_t s = 0; s < h.scene_count; ++s) {
    PatchPair pair;
    pair.scene_id = in.integer<std::uint32_t>("scene id");
    pair.view_a.resize(h.dim);
    pair.view_p.resize(h.dim);
    for (double& v : pair.view_a) v = in.f32("view_a");
    for (double& v : pair.view_p) v = in.f32("view_p");
    ds.records.push_back(std::move(pair));
  }
  in.expect_end();
  return ds;
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  detail::write_file(path, encode_dataset(dataset));
}

Dataset read_dataset(const std::filesystem::path& path) {
  return decode_dataset(detail::read_file(path));
}

PatchBatch sample_batch(const Dataset& dataset, std::size_t batch_size,
                        std::mt19937_64& rng) {
  const std::size_t scenes = dataset.records.size();
  if (batch_size > scenes) {
    throw Error(ErrorKind::kInvalidArgument,
                "sample_batch: batch size " + std::to_string(batch_size) +
                    " exceeds scene count " + std::to_string(scenes));
  }
  std::vector<std::size_t> order(scenes);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, scenes - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  order.resize(batch_size);
  return gather(dataset, order);
}

PatchBatch all_pairs(const Dataset& dataset) {
  std::vector<std::size_t> order(dataset.records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  return gather(dataset, order);
}

std::pair<Dataset, Dataset> split_holdout(const Dataset& dataset,
                                          double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument,
                "split_holdout: fraction must be in [0, 1)");
  }
  const std::size_t total = dataset.records.size();
  const auto held = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(total)));
  Dataset train;
  Dataset test;
  train.header = dataset.header;
  test.header = dataset.header;
  train.records.assign(dataset.records.begin(),
                       dataset.records.end() - static_cast<std::ptrdiff_t>(held));
  test.records.assign(dataset.records.end() - static_cast<std::ptrdiff_t>(held),
                      dataset.records.end());
  train.header.scene_count = static_cast<std::uint32_t>(train.records.size());
  test.header.scene_count = static_cast<std::uint32_t>(test.records.size());
  return {std::move(train), std::move(test)};
}

}  // namespace tcdesc
