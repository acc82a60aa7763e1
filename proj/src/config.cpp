#include "dynamoe/config.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dynamoe {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw std::invalid_argument("unknown config key '" + path + it.key() + "'");
    }
  }
}

DatasetConfig parse_dataset(const json& j) {
  DatasetConfig d;
  reject_unknown_keys(j, {"name", "dir", "train_images", "train_labels",
                          "test_images", "test_labels", "cifar_train",
                          "cifar_test", "subset_size", "n_train", "n_test",
                          "input_dim", "num_classes", "stddev"},
                      "dataset.");
  d.name = j.value("name", d.name);
  d.dir = j.value("dir", d.dir);
  d.train_images = j.value("train_images", d.train_images);
  d.train_labels = j.value("train_labels", d.train_labels);
  d.test_images = j.value("test_images", d.test_images);
  d.test_labels = j.value("test_labels", d.test_labels);
  d.cifar_train = j.value("cifar_train", d.cifar_train);
  d.cifar_test = j.value("cifar_test", d.cifar_test);
  d.subset_size = j.value("subset_size", d.subset_size);
  d.n_train = j.value("n_train", d.n_train);
  d.n_test = j.value("n_test", d.n_test);
  d.input_dim = j.value("input_dim", d.input_dim);
  d.num_classes = j.value("num_classes", d.num_classes);
  d.stddev = j.value("stddev", d.stddev);
  return d;
}

ModelConfig parse_model(const json& j) {
  ModelConfig m;
  reject_unknown_keys(j, {"preset", "schedule", "routing", "expert_expansion",
                          "dense_expansion", "baseline", "input_dim",
                          "num_classes"},
                      "model.");
  m.preset = size_preset_from_string(j.value("preset", std::string("small")));
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    reject_unknown_keys(s, {"kind", "n_max", "n_min"}, "model.schedule.");
    m.schedule.kind = schedule_kind_from_string(s.value("kind", std::string("descending")));
    m.schedule.n_max = s.value("n_max", 8);
    m.schedule.n_min = s.value("n_min", 1);
  }
  m.schedule.layers = preset_layers(m.preset);
  if (j.contains("routing")) {
    const json& r = j.at("routing");
    reject_unknown_keys(r, {"tau", "temperature", "noise_sigma", "mode", "top_k"},
                        "model.routing.");
    m.routing.tau = r.value("tau", m.routing.tau);
    m.routing.temperature = r.value("temperature", m.routing.temperature);
    m.routing.noise_sigma = r.value("noise_sigma", m.routing.noise_sigma);
    m.routing.mode = routing_mode_from_string(
        r.value("mode", to_string(m.routing.mode)));
    m.routing.top_k = r.value("top_k", m.routing.top_k);
  }
  m.expert_expansion = j.value("expert_expansion", m.expert_expansion);
  m.dense_expansion = j.value("dense_expansion", m.dense_expansion);
  const std::string baseline = j.value("baseline", std::string("dynamoe"));
  if (baseline == "dynamoe") {
    m.baseline = BaselineKind::DynaMoE;
  } else if (baseline == "dense_mlp") {
    m.baseline = BaselineKind::DenseMlp;
  } else {
    throw std::invalid_argument("model.baseline must be 'dynamoe' or 'dense_mlp'");
  }
  m.input_dim = j.value("input_dim", m.input_dim);
  m.num_classes = j.value("num_classes", m.num_classes);
  return m;
}

TrainConfig parse_train(const json& j) {
  TrainConfig t;
  reject_unknown_keys(j, {"lr", "beta1", "beta2", "weight_decay", "epochs",
                          "batch_size", "seed", "subset_size"},
                      "train.");
  t.lr = j.value("lr", t.lr);
  t.beta1 = j.value("beta1", t.beta1);
  t.beta2 = j.value("beta2", t.beta2);
  t.weight_decay = j.value("weight_decay", t.weight_decay);
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  if (!j.contains("seed")) {
    throw std::invalid_argument("train.seed is mandatory");
  }
  t.seed = j.at("seed").get<std::uint64_t>();
  t.subset_size = j.value("subset_size", t.subset_size);
  return t;
}

}  // namespace

void ExperimentConfig::validate() const {
  model.validate();
  train.validate();
  const std::set<std::string> names = {"synthetic", "idx", "mnist",
                                       "fashion_mnist", "cifar10"};
  if (!names.count(dataset.name)) {
    throw std::invalid_argument("dataset.name must be one of synthetic/idx/mnist/fashion_mnist/cifar10");
  }
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  reject_unknown_keys(j, {"dataset", "model", "train", "output_dir", "reproducible"}, "");
  ExperimentConfig cfg;
  if (j.contains("dataset")) cfg.dataset = parse_dataset(j.at("dataset"));
  if (j.contains("model")) cfg.model = parse_model(j.at("model"));
  if (!j.contains("train")) {
    throw std::invalid_argument("config requires a 'train' section (seed is mandatory)");
  }
  cfg.train = parse_train(j.at("train"));
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  cfg.reproducible = j.value("reproducible", cfg.reproducible);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  json d;
  d["name"] = cfg.dataset.name;
  if (!cfg.dataset.dir.empty()) d["dir"] = cfg.dataset.dir;
  if (!cfg.dataset.train_images.empty()) {
    d["train_images"] = cfg.dataset.train_images;
    d["train_labels"] = cfg.dataset.train_labels;
    d["test_images"] = cfg.dataset.test_images;
    d["test_labels"] = cfg.dataset.test_labels;
  }
  if (!cfg.dataset.cifar_train.empty()) {
    d["cifar_train"] = cfg.dataset.cifar_train;
    d["cifar_test"] = cfg.dataset.cifar_test;
  }
  d["subset_size"] = cfg.dataset.subset_size;
  if (cfg.dataset.name == "synthetic") {
    d["n_train"] = cfg.dataset.n_train;
    d["n_test"] = cfg.dataset.n_test;
    d["input_dim"] = cfg.dataset.input_dim;
    d["num_classes"] = cfg.dataset.num_classes;
    d["stddev"] = cfg.dataset.stddev;
  }
  j["dataset"] = d;

  json m;
  m["preset"] = to_string(cfg.model.preset);
  m["schedule"] = {{"kind", to_string(cfg.model.schedule.kind)},
                   {"n_max", cfg.model.schedule.n_max},
                   {"n_min", cfg.model.schedule.n_min}};
  m["routing"] = {{"tau", cfg.model.routing.tau},
                  {"temperature", cfg.model.routing.temperature},
                  {"noise_sigma", cfg.model.routing.noise_sigma},
                  {"mode", to_string(cfg.model.routing.mode)},
                  {"top_k", cfg.model.routing.top_k}};
  m["expert_expansion"] = cfg.model.expert_expansion;
  m["dense_expansion"] = cfg.model.dense_expansion;
  m["baseline"] =
      cfg.model.baseline == BaselineKind::DynaMoE ? "dynamoe" : "dense_mlp";
  m["input_dim"] = cfg.model.input_dim;
  m["num_classes"] = cfg.model.num_classes;
  j["model"] = m;

  j["train"] = {{"lr", cfg.train.lr},
                {"beta1", cfg.train.beta1},
                {"beta2", cfg.train.beta2},
                {"weight_decay", cfg.train.weight_decay},
                {"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"seed", cfg.train.seed},
                {"subset_size", cfg.train.subset_size}};
  j["output_dir"] = cfg.output_dir;
  j["reproducible"] = cfg.reproducible;
  return j.dump(2);
}

namespace {

namespace fs = std::filesystem;

struct IdxPaths {
  std::string train_images, train_labels, test_images, test_labels;
};

IdxPaths resolve_idx_paths(const DatasetConfig& cfg) {
  if (!cfg.train_images.empty()) {
    return {cfg.train_images, cfg.train_labels, cfg.test_images, cfg.test_labels};
  }
  if (cfg.dir.empty()) {
    throw std::invalid_argument(
        "dataset requires 'dir' or explicit train_images/train_labels/"
        "test_images/test_labels paths");
  }
  const fs::path dir(cfg.dir);
  return {(dir / "train-images-idx3-ubyte").string(),
          (dir / "train-labels-idx1-ubyte").string(),
          (dir / "t10k-images-idx3-ubyte").string(),
          (dir / "t10k-labels-idx1-ubyte").string()};
}

std::vector<std::string> resolve_cifar(const DatasetConfig& cfg, bool train) {
  if (train && !cfg.cifar_train.empty()) return cfg.cifar_train;
  if (!train && !cfg.cifar_test.empty()) return cfg.cifar_test;
  if (cfg.dir.empty()) {
    throw std::invalid_argument("cifar10 dataset requires 'dir' or explicit batch lists");
  }
  const fs::path dir(cfg.dir);
  if (train) {
    std::vector<std::string> files;
    for (int i = 1; i <= 5; ++i) {
      files.push_back((dir / ("data_batch_" + std::to_string(i) + ".bin")).string());
    }
    return files;
  }
  return {(dir / "test_batch.bin").string()};
}

}  // namespace

std::pair<Dataset, Dataset> load_dataset(const DatasetConfig& cfg) {
  if (cfg.name == "synthetic") {
    Dataset train = make_synthetic(cfg.n_train, cfg.input_dim, cfg.num_classes,
                                   /*seed=*/11, cfg.stddev);
    Dataset test = make_synthetic(cfg.n_test, cfg.input_dim, cfg.num_classes,
                                  /*seed=*/12, cfg.stddev);
    return {std::move(train), std::move(test)};
  }
  if (cfg.name == "cifar10") {
    return {load_cifar10(resolve_cifar(cfg, true)),
            load_cifar10(resolve_cifar(cfg, false))};
  }
  const IdxPaths p = resolve_idx_paths(cfg);
  Dataset train = load_idx(p.train_images, p.train_labels);
  Dataset test = load_idx(p.test_images, p.test_labels);
  if (cfg.subset_size > 0 && cfg.subset_size < train.size()) {
    train = train.subset(cfg.subset_size);
  }
  return {std::move(train), std::move(test)};
}

std::vector<std::string> verify_dataset(const DatasetConfig& cfg) {
  std::vector<std::string> report;
  auto check_file = [&](const std::string& path) {
    if (!fs::exists(path)) {
      throw std::runtime_error("missing dataset file: " + path);
    }
    report.push_back(path + " (" + std::to_string(fs::file_size(path)) + " bytes)");
  };
  if (cfg.name == "synthetic") {
    report.push_back("synthetic dataset: no files to verify");
    return report;
  }
  if (cfg.name == "cifar10") {
    for (const auto& p : resolve_cifar(cfg, true)) check_file(p);
    for (const auto& p : resolve_cifar(cfg, false)) check_file(p);
    for (const auto& p : resolve_cifar(cfg, true)) {
      if (fs::file_size(p) % 3073 != 0) {
        throw std::runtime_error("CIFAR batch size not a multiple of 3073: " + p);
      }
    }
    return report;
  }
  const IdxPaths p = resolve_idx_paths(cfg);
  for (const std::string& path :
       {p.train_images, p.train_labels, p.test_images, p.test_labels}) {
    check_file(path);
  }
  // header sanity via a full parse of the headers
  Dataset train = load_idx(p.train_images, p.train_labels);
  Dataset test = load_idx(p.test_images, p.test_labels);
  report.push_back("train: " + std::to_string(train.size()) + " samples, dim " +
                   std::to_string(train.input_dim()));
  report.push_back("test: " + std::to_string(test.size()) + " samples, dim " +
                   std::to_string(test.input_dim()));
  return report;
}

}  // namespace dynamoe
