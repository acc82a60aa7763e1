#include "dynamoe/config.hpp"
#include "dynamoe/experiment.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dynamoe;
namespace fs = std::filesystem;

namespace {

std::string minimal_json() {
  return R"({
    "dataset": {"name": "synthetic", "n_train": 96, "n_test": 48,
                "input_dim": 8, "num_classes": 4, "stddev": 0.2},
    "model": {"preset": "tiny", "schedule": {"kind": "descending",
              "n_max": 4, "n_min": 1}},
    "train": {"epochs": 2, "batch_size": 32, "seed": 7}
  })";
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("parse_config fills defaults and echoes them back") {
  const ExperimentConfig cfg = parse_config(minimal_json());
  CHECK(cfg.dataset.n_train == 96);
  CHECK(cfg.model.preset == SizePreset::Tiny);
  CHECK(cfg.model.schedule.kind == ScheduleKind::Descending);
  CHECK(cfg.model.schedule.layers == 2);  // bound to the preset
  CHECK(cfg.model.routing.tau == doctest::Approx(0.7));
  CHECK(cfg.model.routing.temperature == doctest::Approx(0.5));
  CHECK(cfg.model.routing.noise_sigma == doctest::Approx(0.1));
  CHECK(cfg.train.lr == doctest::Approx(1e-3));
  CHECK(cfg.train.weight_decay == doctest::Approx(1e-4));
  CHECK(cfg.train.seed == 7);
  CHECK(cfg.reproducible);

  // the resolved echo parses to the same config
  const ExperimentConfig round = parse_config(config_to_json(cfg));
  CHECK(config_to_json(round) == config_to_json(cfg));
}

TEST_CASE("unknown keys are rejected with their path") {
  nlohmann::json j = nlohmann::json::parse(minimal_json());
  j["model"]["routing"]["temprature"] = 0.5;  // typo
  CHECK_THROWS_WITH_AS(parse_config(j.dump()),
                       doctest::Contains("temprature"), std::invalid_argument);

  nlohmann::json top = nlohmann::json::parse(minimal_json());
  top["outputs"] = "x";
  CHECK_THROWS_AS(parse_config(top.dump()), std::invalid_argument);
}

TEST_CASE("seed is mandatory and values are validated") {
  nlohmann::json j = nlohmann::json::parse(minimal_json());
  j["train"].erase("seed");
  CHECK_THROWS_WITH_AS(parse_config(j.dump()), doctest::Contains("seed"),
                       std::invalid_argument);

  nlohmann::json bad = nlohmann::json::parse(minimal_json());
  bad["model"]["routing"] = {{"tau", 1.5}};
  CHECK_THROWS_AS(parse_config(bad.dump()), std::invalid_argument);

  nlohmann::json topk = nlohmann::json::parse(minimal_json());
  topk["model"]["routing"] = {{"mode", "fixed_topk"}, {"top_k", 3}};
  topk["model"]["schedule"]["n_min"] = 2;
  CHECK_THROWS_AS(parse_config(topk.dump()), std::invalid_argument);
}

TEST_CASE("synthetic dataset resolution and verification") {
  const ExperimentConfig cfg = parse_config(minimal_json());
  const auto [train, test] = load_dataset(cfg.dataset);
  CHECK(train.size() == 96);
  CHECK(test.size() == 48);
  CHECK(train.input_dim() == 8);
  CHECK(train.num_classes == 4);
  const auto findings = verify_dataset(cfg.dataset);
  CHECK(!findings.empty());

  DatasetConfig missing;
  missing.name = "idx";
  missing.train_images = "definitely-not-here";
  CHECK_THROWS_AS(verify_dataset(missing), std::runtime_error);
}

TEST_CASE("run_experiment writes its artifact set") {
  ExperimentConfig cfg = parse_config(minimal_json());
  cfg.output_dir = "test_run_out";
  fs::remove_all(cfg.output_dir);

  const RunResult res = run_experiment(cfg);
  CHECK(res.metrics.size() == 2);
  CHECK(res.params > 0);
  CHECK(res.final_accuracy >= 0.0);
  CHECK(res.efficiency_score ==
        doctest::Approx(efficiency(100.0 * res.final_accuracy, res.params)));

  const fs::path out(cfg.output_dir);
  for (const char* name :
       {"config.json", "metrics.jsonl", "summary.json", "summary.txt",
        "checkpoint.bin"}) {
    CHECK(fs::exists(out / name));
  }

  // every metrics line is valid JSON with the expected keys
  std::ifstream jl(out / "metrics.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(jl, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("epoch"));
    CHECK(j.contains("train_loss"));
    CHECK(j.contains("val_accuracy"));
    CHECK(j["wall_seconds"] == 0.0);  // reproducible mode
    ++lines;
  }
  CHECK(lines == 2);

  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  CHECK(summary["params"] == res.params);
  CHECK(summary["epochs_to_95"] == res.epochs_to_95);

  fs::remove_all(cfg.output_dir);
}

TEST_CASE("reproducible runs emit byte-identical streams") {
  ExperimentConfig cfg = parse_config(minimal_json());
  cfg.output_dir = "test_repro_a";
  fs::remove_all("test_repro_a");
  fs::remove_all("test_repro_b");
  run_experiment(cfg);
  cfg.output_dir = "test_repro_b";
  run_experiment(cfg);

  // checkpoint.bin embeds the resolved config (including output_dir), so
  // only the metric and summary streams are expected to match across dirs
  for (const char* name : {"metrics.jsonl", "summary.json"}) {
    CHECK(slurp(fs::path("test_repro_a") / name) ==
          slurp(fs::path("test_repro_b") / name));
  }
  fs::remove_all("test_repro_a");
  fs::remove_all("test_repro_b");
}

TEST_CASE("sweep over schedules includes the dense baseline") {
  ExperimentConfig cfg = parse_config(minimal_json());
  cfg.output_dir = "test_sweep_out";
  fs::remove_all(cfg.output_dir);

  const auto entries = sweep_schedules(cfg, {"descending", "uniform", "mlp"});
  REQUIRE(entries.size() == 3);
  for (const auto& e : entries) {
    CAPTURE(e.label);
    CHECK(!e.failed);
  }
  CHECK(entries[2].result.config.model.baseline == BaselineKind::DenseMlp);

  const std::string table = sweep_table(entries);
  CHECK(table.find("descending") != std::string::npos);
  CHECK(table.find("mlp") != std::string::npos);
  CHECK(table.find("Efficiency") != std::string::npos);

  const std::string report = run_report(entries[0].result);
  CHECK(report.find("epoch") != std::string::npos);
  fs::remove_all(cfg.output_dir);
}
