#pragma once

#include "dynamoe/data.hpp"
#include "dynamoe/model.hpp"
#include "dynamoe/routing.hpp"

#include <vector>

namespace dynamoe {

struct LayerUsageStats {
  int layer = 0;          // 1-based
  int n_experts = 0;
  double avg_active = 0.0;
  double utilization_pct = 0.0;   // 100 * avg_active / n_experts
  double usage_entropy_bits = 0.0;
};

/// Aggregates per-token selection records into per-layer usage statistics.
/// The usage distribution counts token-routings: a token selecting three
/// experts contributes three counts.
std::vector<LayerUsageStats> usage_stats(
    const std::vector<std::vector<SelectionResult>>& records_per_layer,
    const std::vector<int>& experts_per_layer);

/// Accuracy percent per 10,000 parameters.
double efficiency(double accuracy_pct, std::int64_t params);

/// Smallest 1-based epoch whose accuracy reaches fraction * final accuracy.
int epochs_to_fraction(const std::vector<double>& val_accuracy,
                       double fraction = 0.95);

struct GradVarianceReport {
  double mean_gate_grad_variance = 0.0;  // elementwise, over samples
  double routing_entropy_bits = 0.0;     // pooled over layers with > 1 expert
  std::string mode;
};

/// Empirical probe: per-sample gate-weight gradient variance plus routing
/// entropy, measured under the model's current parameters for one routing
/// mode. Purely descriptive; no inequality is asserted.
GradVarianceReport grad_variance_probe(Model& model, const Dataset& data,
                                       RoutingMode mode, int n_batches,
                                       int batch_size, std::uint64_t seed);

}  // namespace dynamoe
