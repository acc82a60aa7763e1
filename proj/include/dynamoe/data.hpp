#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace dynamoe {

struct Dataset {
  Eigen::MatrixXd inputs;    // N x input_dim, values in [0, 1]
  std::vector<int> labels;   // length N
  int num_classes = 0;
  std::string name;

  std::int64_t size() const { return inputs.rows(); }
  int input_dim() const { return static_cast<int>(inputs.cols()); }

  /// First n samples (after any upstream shuffling baked into the files).
  Dataset subset(std::int64_t n) const;
};

/// Big-endian IDX pair (magic 2051 images / 2049 labels), pixels scaled
/// by 1/255 and flattened.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// CIFAR-10 binary batches: 1 label byte + 3072 pixel bytes per record.
Dataset load_cifar10(const std::vector<std::string>& batch_files);

/// Gaussian class blobs with unit-separated means; deterministic per seed.
Dataset make_synthetic(int n, int input_dim, int num_classes,
                       std::uint64_t seed, double stddev = 0.1);

struct Batch {
  Eigen::MatrixXd inputs;
  std::vector<int> labels;
};

/// Seeded per-epoch permutation; the final short batch is included.
std::vector<Batch> batches(const Dataset& ds, int batch_size,
                           std::uint64_t seed, int epoch);

}  // namespace dynamoe
