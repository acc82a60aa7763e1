#pragma once

#include "dynamoe/config.hpp"

#include <string>
#include <vector>

namespace dynamoe {

struct RunResult {
  ExperimentConfig config;
  std::vector<EpochMetrics> metrics;
  double final_accuracy = 0.0;   // fraction
  std::int64_t params = 0;
  double efficiency_score = 0.0;
  int epochs_to_95 = 0;
  std::string label;
};

/// Executes one experiment: fit, evaluate, analysis. Writes metrics.jsonl,
/// summary.json, summary.txt, checkpoint.bin, and the resolved config into
/// the output directory. In reproducible mode wall_seconds is written as 0
/// so two identical runs emit byte-identical streams.
RunResult run_experiment(const ExperimentConfig& cfg);

struct SweepEntry {
  std::string label;
  bool failed = false;
  std::string error;
  RunResult result;
};

/// Schedule-axis sweep; "mlp" selects the dense baseline. Each variant runs
/// with the shared seed and budget into its own subdirectory.
std::vector<SweepEntry> sweep_schedules(const ExperimentConfig& base,
                                        const std::vector<std::string>& kinds);

/// Expert-count sweep over (n_max, n_min) pairs.
std::vector<SweepEntry> sweep_experts(
    const ExperimentConfig& base,
    const std::vector<std::pair<int, int>>& pairs);

/// Ranked comparison table (accuracy, params, efficiency, epochs-to-95%).
std::string sweep_table(const std::vector<SweepEntry>& entries);

/// Text tables for one run: per-epoch metrics and per-layer usage.
std::string run_report(const RunResult& result);

}  // namespace dynamoe
