#include "dynamoe/experiment.hpp"
#include "dynamoe/routing.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using dynamoe::ExperimentConfig;

namespace {

struct CommonOverrides {
  std::string config_path;
  std::string out;
  std::int64_t seed = -1;
  std::int64_t subset = -1;
  int epochs = -1;
  bool reproducible = false;
};

ExperimentConfig load_with_overrides(const CommonOverrides& o) {
  ExperimentConfig cfg = dynamoe::load_config(o.config_path);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(o.seed);
  if (o.subset >= 0) cfg.dataset.subset_size = o.subset;
  if (o.epochs > 0) cfg.train.epochs = o.epochs;
  if (o.reproducible) cfg.reproducible = true;
  return cfg;
}

void add_common(CLI::App* cmd, CommonOverrides& o) {
  cmd->add_option("--config", o.config_path, "Experiment config (JSON)")
      ->required();
  cmd->add_option("--out", o.out, "Output directory override");
  cmd->add_option("--seed", o.seed, "Seed override");
  cmd->add_option("--subset", o.subset, "Training subset size override");
  cmd->add_option("--epochs", o.epochs, "Epoch count override");
  cmd->add_flag("--reproducible", o.reproducible, "Force reproducible mode");
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DynaMoE experiment harness"};
  app.require_subcommand(1);

  CommonOverrides run_opts;
  auto* run_cmd = app.add_subcommand("run", "Train and evaluate one configuration");
  add_common(run_cmd, run_opts);

  CommonOverrides sweep_opts;
  std::string schedules_axis;
  std::string experts_axis;
  auto* sweep_cmd =
      app.add_subcommand("sweep", "Run a schedule or expert-count comparison");
  add_common(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--schedules", schedules_axis,
                        "Comma list of schedule kinds ('mlp' = dense baseline)");
  sweep_cmd->add_option("--experts", experts_axis,
                        "Comma list of max:min expert pairs, e.g. 8:1,4:1");

  int pat_n = 8;
  double pat_tau = -1.0;
  int pat_k = -1;
  auto* pat_cmd = app.add_subcommand("patterns", "Routing-pattern counts");
  pat_cmd->add_option("-n", pat_n, "Number of experts (<= 64)")->required();
  pat_cmd->add_option("--tau", pat_tau, "Dynamic threshold percentile");
  pat_cmd->add_option("-k", pat_k, "Fixed Top-K to compare against");

  CommonOverrides verify_opts;
  auto* verify_cmd = app.add_subcommand("verify-data", "Check dataset files");
  add_common(verify_cmd, verify_opts);

  std::string report_dir;
  auto* report_cmd = app.add_subcommand("report", "Print the summary of a finished run");
  report_cmd->add_option("--out", report_dir, "Run output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const ExperimentConfig cfg = load_with_overrides(run_opts);
      const dynamoe::RunResult r = dynamoe::run_experiment(cfg);
      std::cout << dynamoe::run_report(r);
      return 0;
    }

    if (*sweep_cmd) {
      const ExperimentConfig base = load_with_overrides(sweep_opts);
      std::vector<dynamoe::SweepEntry> entries;
      if (!schedules_axis.empty()) {
        entries = dynamoe::sweep_schedules(base, split_csv(schedules_axis));
      } else if (!experts_axis.empty()) {
        std::vector<std::pair<int, int>> pairs;
        for (const std::string& item : split_csv(experts_axis)) {
          const auto colon = item.find(':');
          if (colon == std::string::npos) {
            throw std::invalid_argument("expert pair must be max:min, got '" + item + "'");
          }
          pairs.emplace_back(std::stoi(item.substr(0, colon)),
                             std::stoi(item.substr(colon + 1)));
        }
        entries = dynamoe::sweep_experts(base, pairs);
      } else {
        throw std::invalid_argument("sweep requires --schedules or --experts");
      }
      const std::string table = dynamoe::sweep_table(entries);
      std::cout << table;
      fs::create_directories(base.output_dir);
      std::ofstream(fs::path(base.output_dir) / "sweep_table.txt") << table;
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& e : entries) {
        if (e.failed) {
          rows.push_back({{"label", e.label}, {"failed", true}, {"error", e.error}});
        } else {
          rows.push_back({{"label", e.label},
                          {"accuracy", e.result.final_accuracy},
                          {"params", e.result.params},
                          {"efficiency", e.result.efficiency_score},
                          {"epochs_to_95", e.result.epochs_to_95}});
        }
      }
      std::ofstream(fs::path(base.output_dir) / "sweep_table.json") << rows.dump(2) << "\n";
      for (const auto& e : entries) {
        if (e.failed) return 1;
      }
      return 0;
    }

    if (*pat_cmd) {
      if (pat_tau > 0.0) {
        const int k_max = dynamoe::dynamic_k_max(pat_tau, pat_n);
        const auto dynamic = dynamoe::count_patterns_dynamic(pat_n, k_max);
        const int k = pat_k > 0 ? pat_k : std::max(1, k_max - 1);
        const auto fixed = dynamoe::count_patterns_fixed(pat_n, k);
        const double ratio = static_cast<double>(dynamic) / static_cast<double>(fixed);
        const double bound = static_cast<double>(dynamoe::count_patterns_fixed(pat_n, k_max)) /
                             static_cast<double>(fixed);
        std::cout << "n=" << pat_n << " tau=" << pat_tau << " K_max=" << k_max
                  << "\ndynamic=" << dynamic << " fixed(K=" << k << ")=" << fixed
                  << " ratio=" << ratio << " bound=" << bound << "\n";
      } else if (pat_k > 0) {
        std::cout << "C(" << pat_n << "," << pat_k
                  << ")=" << dynamoe::count_patterns_fixed(pat_n, pat_k) << "\n";
      } else {
        throw std::invalid_argument("patterns requires --tau or -k");
      }
      return 0;
    }

    if (*verify_cmd) {
      const ExperimentConfig cfg = load_with_overrides(verify_opts);
      for (const std::string& line : dynamoe::verify_dataset(cfg.dataset)) {
        std::cout << line << "\n";
      }
      std::cout << "dataset ok\n";
      return 0;
    }

    if (*report_cmd) {
      std::ifstream f(fs::path(report_dir) / "summary.txt");
      if (!f) {
        throw std::runtime_error("no summary.txt under " + report_dir);
      }
      std::cout << f.rdbuf();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
