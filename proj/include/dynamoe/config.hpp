#pragma once

#include "dynamoe/data.hpp"
#include "dynamoe/model.hpp"
#include "dynamoe/train.hpp"

#include <string>
#include <vector>

namespace dynamoe {

struct DatasetConfig {
  std::string name = "synthetic";  // synthetic | idx | mnist | fashion_mnist | cifar10
  std::string dir;                 // for mnist/fashion/cifar10 standard filenames
  std::string train_images, train_labels, test_images, test_labels;  // idx
  std::vector<std::string> cifar_train, cifar_test;
  std::int64_t subset_size = 0;    // training subset cap, 0 = full
  // synthetic parameters
  int n_train = 512;
  int n_test = 256;
  int input_dim = 16;
  int num_classes = 4;
  double stddev = 0.1;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  ModelConfig model;
  TrainConfig train;
  std::string output_dir = "out";
  bool reproducible = true;

  void validate() const;
};

/// Parses the JSON experiment config. Unknown keys are rejected with the
/// offending path in the message.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// Resolved config (defaults filled in) as JSON.
std::string config_to_json(const ExperimentConfig& cfg);

/// Resolves the dataset config into (train, test) splits.
std::pair<Dataset, Dataset> load_dataset(const DatasetConfig& cfg);

/// Existence/byte-length/header verification without loading everything.
/// Returns human-readable findings; throws on hard failures.
std::vector<std::string> verify_dataset(const DatasetConfig& cfg);

}  // namespace dynamoe
