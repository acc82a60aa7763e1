#include "dynamoe/data.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace dynamoe {

Dataset Dataset::subset(std::int64_t n) const {
  if (n < 0 || n > size()) {
    throw std::invalid_argument("subset size out of range");
  }
  Dataset out;
  out.inputs = inputs.topRows(n);
  out.labels.assign(labels.begin(), labels.begin() + n);
  out.num_classes = num_classes;
  out.name = name + "[0:" + std::to_string(n) + "]";
  return out;
}

namespace {

std::uint32_t read_be32(std::ifstream& f, const std::string& path) {
  unsigned char buf[4];
  if (!f.read(reinterpret_cast<char*>(buf), 4)) {
    throw std::runtime_error("truncated file: " + path);
  }
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

std::vector<unsigned char> read_exact(std::ifstream& f, std::size_t n,
                                      const std::string& path) {
  std::vector<unsigned char> buf(n);
  if (!f.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(n))) {
    throw std::runtime_error("truncated file: " + path);
  }
  return buf;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgf(images_path, std::ios::binary);
  if (!imgf) throw std::runtime_error("cannot open images file: " + images_path);
  std::ifstream lblf(labels_path, std::ios::binary);
  if (!lblf) throw std::runtime_error("cannot open labels file: " + labels_path);

  const std::uint32_t img_magic = read_be32(imgf, images_path);
  if (img_magic != 2051) {
    throw std::runtime_error("bad IDX image magic in " + images_path);
  }
  const std::uint32_t n_images = read_be32(imgf, images_path);
  const std::uint32_t rows = read_be32(imgf, images_path);
  const std::uint32_t cols = read_be32(imgf, images_path);

  const std::uint32_t lbl_magic = read_be32(lblf, labels_path);
  if (lbl_magic != 2049) {
    throw std::runtime_error("bad IDX label magic in " + labels_path);
  }
  const std::uint32_t n_labels = read_be32(lblf, labels_path);
  if (n_images != n_labels) {
    throw std::runtime_error("image/label count mismatch: " + images_path);
  }

  const std::size_t dim = std::size_t(rows) * cols;
  Dataset ds;
  ds.inputs.resize(n_images, static_cast<Eigen::Index>(dim));
  ds.labels.resize(n_images);
  ds.num_classes = 10;
  ds.name = images_path;

  const auto pixels = read_exact(imgf, std::size_t(n_images) * dim, images_path);
  const auto labels = read_exact(lblf, n_images, labels_path);
  for (std::uint32_t i = 0; i < n_images; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      ds.inputs(i, static_cast<Eigen::Index>(j)) =
          static_cast<double>(pixels[std::size_t(i) * dim + j]) / 255.0;
    }
    ds.labels[i] = static_cast<int>(labels[i]);
  }
  return ds;
}

Dataset load_cifar10(const std::vector<std::string>& batch_files) {
  constexpr std::size_t kRecord = 3073;  // 1 label byte + 3072 pixels
  constexpr std::size_t kDim = 3072;
  Dataset ds;
  ds.num_classes = 10;
  ds.name = "cifar10";

  std::vector<std::vector<unsigned char>> raw;
  std::size_t total = 0;
  for (const std::string& path : batch_files) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw std::runtime_error("cannot open CIFAR batch: " + path);
    const std::size_t len = static_cast<std::size_t>(f.tellg());
    if (len % kRecord != 0) {
      throw std::runtime_error("CIFAR batch size not a multiple of 3073: " + path);
    }
    f.seekg(0);
    raw.push_back(read_exact(f, len, path));
    total += len / kRecord;
  }

  ds.inputs.resize(static_cast<Eigen::Index>(total), kDim);
  ds.labels.resize(total);
  std::size_t row = 0;
  for (const auto& buf : raw) {
    for (std::size_t off = 0; off < buf.size(); off += kRecord, ++row) {
      ds.labels[row] = static_cast<int>(buf[off]);
      for (std::size_t j = 0; j < kDim; ++j) {
        ds.inputs(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j)) =
            static_cast<double>(buf[off + 1 + j]) / 255.0;
      }
    }
  }
  return ds;
}

Dataset make_synthetic(int n, int input_dim, int num_classes,
                       std::uint64_t seed, double stddev) {
  if (n < num_classes || num_classes < 1 || input_dim < 1) {
    throw std::invalid_argument("make_synthetic: need n >= num_classes >= 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, stddev);

  // unit-separated class means on scaled coordinate axes
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(num_classes, input_dim);
  for (int c = 0; c < num_classes; ++c) {
    means(c, c % input_dim) += 1.0 + static_cast<double>(c / input_dim);
  }

  Dataset ds;
  ds.inputs.resize(n, input_dim);
  ds.labels.resize(static_cast<size_t>(n));
  ds.num_classes = num_classes;
  ds.name = "synthetic";
  for (int i = 0; i < n; ++i) {
    const int c = i % num_classes;  // balanced within +-1 by construction
    ds.labels[static_cast<size_t>(i)] = c;
    for (int j = 0; j < input_dim; ++j) {
      ds.inputs(i, j) = means(c, j) + noise(rng);
    }
  }
  return ds;
}

std::vector<Batch> batches(const Dataset& ds, int batch_size,
                           std::uint64_t seed, int epoch) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  const std::int64_t n = ds.size();
  std::vector<std::int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(epoch));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Batch> out;
  for (std::int64_t start = 0; start < n; start += batch_size) {
    const std::int64_t sz = std::min<std::int64_t>(batch_size, n - start);
    Batch b;
    b.inputs.resize(sz, ds.inputs.cols());
    b.labels.resize(static_cast<size_t>(sz));
    for (std::int64_t i = 0; i < sz; ++i) {
      b.inputs.row(i) = ds.inputs.row(order[static_cast<size_t>(start + i)]);
      b.labels[static_cast<size_t>(i)] =
          ds.labels[static_cast<size_t>(order[static_cast<size_t>(start + i)])];
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace dynamoe
