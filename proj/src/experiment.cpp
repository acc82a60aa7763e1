#include "dynamoe/experiment.hpp"

#include "dynamoe/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace dynamoe {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json metrics_record(const EpochMetrics& m, bool reproducible) {
  json j;
  j["epoch"] = m.epoch;
  j["train_loss"] = m.train_loss;
  j["val_loss"] = m.val_loss;
  j["val_accuracy"] = m.val_accuracy;
  j["wall_seconds"] = reproducible ? 0.0 : m.wall_seconds;
  json usage = json::array();
  for (const LayerUsageStats& s : m.per_layer_usage) {
    usage.push_back({{"layer", s.layer},
                     {"n_experts", s.n_experts},
                     {"avg_active", s.avg_active},
                     {"utilization_pct", s.utilization_pct},
                     {"usage_entropy_bits", s.usage_entropy_bits}});
  }
  j["per_layer_usage"] = usage;
  return j;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  cfg.validate();

  auto [train_set, test_set] = load_dataset(cfg.dataset);
  cfg.model.input_dim = train_set.input_dim();
  cfg.model.num_classes = train_set.num_classes;

  fs::create_directories(cfg.output_dir);
  {
    std::ofstream f(fs::path(cfg.output_dir) / "config.json");
    f << config_to_json(cfg) << "\n";
  }

  Model model(cfg.model, cfg.train.seed);

  std::ofstream metrics_file(fs::path(cfg.output_dir) / "metrics.jsonl");
  const bool repro = cfg.reproducible;
  auto history = fit(model, train_set, test_set, cfg.train,
                     [&](const EpochMetrics& m) {
                       metrics_file << metrics_record(m, repro).dump() << "\n";
                       metrics_file.flush();
                     });

  RunResult r;
  r.config = cfg;
  r.metrics = history;
  r.final_accuracy = history.back().val_accuracy;
  r.params = model.param_count();
  r.efficiency_score = efficiency(100.0 * r.final_accuracy, r.params);
  std::vector<double> accs;
  for (const auto& m : history) accs.push_back(m.val_accuracy);
  r.epochs_to_95 = epochs_to_fraction(accs);
  r.label = cfg.model.baseline == BaselineKind::DenseMlp
                ? "mlp"
                : to_string(cfg.model.schedule.kind);

  json manifest;
  manifest["config"] = json::parse(config_to_json(cfg));
  manifest["seed"] = cfg.train.seed;
  manifest["epoch"] = history.back().epoch;
  save_checkpoint(model, (fs::path(cfg.output_dir) / "checkpoint.bin").string(),
                  manifest.dump());

  json summary;
  summary["label"] = r.label;
  summary["final_accuracy"] = r.final_accuracy;
  summary["params"] = r.params;
  summary["efficiency"] = r.efficiency_score;
  summary["epochs_to_95"] = r.epochs_to_95;
  summary["final_val_loss"] = history.back().val_loss;
  {
    std::ofstream f(fs::path(cfg.output_dir) / "summary.json");
    f << summary.dump(2) << "\n";
  }
  {
    std::ofstream f(fs::path(cfg.output_dir) / "summary.txt");
    f << run_report(r);
  }
  return r;
}

std::vector<SweepEntry> sweep_schedules(const ExperimentConfig& base,
                                        const std::vector<std::string>& kinds) {
  if (kinds.empty()) throw std::invalid_argument("sweep: empty schedule axis");
  std::vector<SweepEntry> entries;
  for (const std::string& kind : kinds) {
    SweepEntry e;
    e.label = kind;
    ExperimentConfig cfg = base;
    cfg.output_dir = (fs::path(base.output_dir) / kind).string();
    try {
      if (kind == "mlp") {
        cfg.model.baseline = BaselineKind::DenseMlp;
      } else {
        cfg.model.baseline = BaselineKind::DynaMoE;
        cfg.model.schedule.kind = schedule_kind_from_string(kind);
        if (cfg.model.schedule.kind == ScheduleKind::Uniform) {
          cfg.model.schedule.n_min = cfg.model.schedule.n_max;
        }
      }
      e.result = run_experiment(cfg);
    } catch (const std::exception& ex) {
      e.failed = true;
      e.error = ex.what();
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<SweepEntry> sweep_experts(
    const ExperimentConfig& base,
    const std::vector<std::pair<int, int>>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("sweep: empty expert axis");
  std::vector<SweepEntry> entries;
  for (const auto& [n_max, n_min] : pairs) {
    SweepEntry e;
    e.label = "E" + std::to_string(n_max) + "-" + std::to_string(n_min);
    ExperimentConfig cfg = base;
    cfg.output_dir = (fs::path(base.output_dir) / e.label).string();
    cfg.model.schedule.n_max = n_max;
    cfg.model.schedule.n_min = n_min;
    try {
      e.result = run_experiment(cfg);
      e.result.label = e.label;
    } catch (const std::exception& ex) {
      e.failed = true;
      e.error = ex.what();
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::string sweep_table(const std::vector<SweepEntry>& entries) {
  std::vector<const SweepEntry*> ok;
  for (const auto& e : entries) {
    if (!e.failed) ok.push_back(&e);
  }
  std::sort(ok.begin(), ok.end(), [](const SweepEntry* a, const SweepEntry* b) {
    return a->result.final_accuracy > b->result.final_accuracy;
  });

  std::ostringstream os;
  os << std::left << std::setw(14) << "Config" << std::right << std::setw(12)
     << "Accuracy(%)" << std::setw(12) << "Params" << std::setw(12)
     << "Efficiency" << std::setw(14) << "EpochsTo95%" << "\n";
  os << std::string(64, '-') << "\n";
  os << std::fixed;
  for (const SweepEntry* e : ok) {
    os << std::left << std::setw(14) << e->label << std::right
       << std::setw(12) << std::setprecision(2) << 100.0 * e->result.final_accuracy
       << std::setw(12) << e->result.params
       << std::setw(12) << std::setprecision(2) << e->result.efficiency_score
       << std::setw(14) << e->result.epochs_to_95 << "\n";
  }
  for (const auto& e : entries) {
    if (e.failed) {
      os << e.label << "  FAILED: " << e.error << "\n";
    }
  }
  return os.str();
}

std::string run_report(const RunResult& r) {
  std::ostringstream os;
  os << "run: " << r.label << "\n";
  os << std::fixed;
  os << "final accuracy: " << std::setprecision(2) << 100.0 * r.final_accuracy
     << "%   params: " << r.params << "   efficiency: " << std::setprecision(2)
     << r.efficiency_score << "   epochs-to-95%: " << r.epochs_to_95 << "\n\n";

  os << std::left << std::setw(7) << "Epoch" << std::right << std::setw(12)
     << "TrainLoss" << std::setw(12) << "ValLoss" << std::setw(12) << "ValAcc(%)"
     << "\n" << std::string(43, '-') << "\n";
  for (const EpochMetrics& m : r.metrics) {
    os << std::left << std::setw(7) << m.epoch << std::right << std::setw(12)
       << std::setprecision(4) << m.train_loss << std::setw(12) << m.val_loss
       << std::setw(12) << std::setprecision(2) << 100.0 * m.val_accuracy << "\n";
  }

  os << "\n" << std::left << std::setw(7) << "Layer" << std::right
     << std::setw(10) << "Experts" << std::setw(12) << "AvgActive"
     << std::setw(14) << "Util(%)" << std::setw(12) << "Entropy" << "\n"
     << std::string(55, '-') << "\n";
  for (const LayerUsageStats& s : r.metrics.back().per_layer_usage) {
    os << std::left << std::setw(7) << s.layer << std::right << std::setw(10)
       << s.n_experts << std::setw(12) << std::setprecision(2) << s.avg_active
       << std::setw(14) << std::setprecision(1) << s.utilization_pct
       << std::setw(12) << std::setprecision(2) << s.usage_entropy_bits << "\n";
  }
  return os.str();
}

}  // namespace dynamoe
