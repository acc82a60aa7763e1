#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace dynamoe {

enum class RoutingMode {
  DynamicPerToken,  // per-token percentile threshold
  DynamicBatch,     // threshold pooled over the batch at each layer
  FixedTopK,
};

std::string to_string(RoutingMode mode);
RoutingMode routing_mode_from_string(const std::string& name);

struct RoutingConfig {
  double tau = 0.7;
  double temperature = 0.5;
  double noise_sigma = 0.1;
  RoutingMode mode = RoutingMode::DynamicPerToken;
  int top_k = 2;  // FixedTopK only

  void validate(int num_experts) const;
};

/// Outcome of expert selection for one token. Weights are filled by the
/// combine step (dynamic mode); fixed Top-K keeps the raw gate values.
struct SelectionResult {
  std::vector<int> indices;      // sorted ascending, no duplicates
  double threshold = 0.0;
  std::vector<double> weights;   // aligned with indices
  int k = 0;
};

/// Numerically stable softmax over gate logits.
Eigen::VectorXd gate_probs(const Eigen::VectorXd& logits);

/// Additive Gaussian exploration noise, i.i.d. per entry. The result may
/// leave the simplex; selection operates on the noisy values directly.
Eigen::VectorXd add_gate_noise(const Eigen::VectorXd& gates, double sigma,
                               std::mt19937_64& rng);

/// K_max for dynamic routing: ceil((1 - tau) * n), clamped to [1, n].
int dynamic_k_max(double tau, int n);

/// Percentile-threshold selection. The threshold is the (N - K_max)-th
/// smallest value (strictly-greater selection then admits at most K_max
/// winners); an all-tie input falls back to the lowest-index argmax.
SelectionResult select_dynamic(const Eigen::VectorXd& values, double tau);

/// Same selection rule against an externally supplied threshold (batch
/// mode pools gate values across tokens); the per-token cap still applies.
SelectionResult select_with_threshold(const Eigen::VectorXd& values,
                                      double threshold, int k_max);

/// Indices of the k largest values, ties broken by lowest index.
SelectionResult select_topk(const Eigen::VectorXd& values, int k);

/// Temperature softmax over the selected gates; returns the weights used.
/// output = sum_i softmax(g_S / T)_i * expert_outputs[i].
Eigen::VectorXd combine_weights_dynamic(const Eigen::VectorXd& selected_gates,
                                        double temperature);
Eigen::VectorXd combine_dynamic(const Eigen::VectorXd& selected_gates,
                                const std::vector<Eigen::VectorXd>& expert_outputs,
                                double temperature);

/// Raw-gate combination: sum_i g_i * E_i(x), no renormalization.
Eigen::VectorXd combine_topk(const Eigen::VectorXd& gate_values,
                             const std::vector<Eigen::VectorXd>& expert_outputs);

/// Exact C(n, k) for n <= 64 (overflow-checked).
std::uint64_t count_patterns_fixed(int n, int k);

/// Number of activation patterns reachable by dynamic routing:
/// sum_{k=1}^{k_max} C(n, k).
std::uint64_t count_patterns_dynamic(int n, int k_max);

struct ActiveBounds {
  int lower = 1;
  int upper = 0;
  double nominal = 0.0;
};

/// (1, ceil((1-tau)*n), (1-tau)*n) — bounds on expected active experts.
ActiveBounds expected_active_bounds(double tau, int n);

}  // namespace dynamoe
