#include "dynamoe/routing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dynamoe {

std::string to_string(RoutingMode mode) {
  switch (mode) {
    case RoutingMode::DynamicPerToken: return "dynamic_per_token";
    case RoutingMode::DynamicBatch: return "dynamic_batch";
    case RoutingMode::FixedTopK: return "fixed_topk";
  }
  throw std::logic_error("unreachable routing mode");
}

RoutingMode routing_mode_from_string(const std::string& name) {
  if (name == "dynamic_per_token") return RoutingMode::DynamicPerToken;
  if (name == "dynamic_batch") return RoutingMode::DynamicBatch;
  if (name == "fixed_topk") return RoutingMode::FixedTopK;
  throw std::invalid_argument("unknown routing mode: '" + name + "'");
}

void RoutingConfig::validate(int num_experts) const {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::invalid_argument("routing tau must lie in (0, 1)");
  }
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("routing temperature must be positive");
  }
  if (noise_sigma < 0.0) {
    throw std::invalid_argument("routing noise_sigma must be non-negative");
  }
  if (mode == RoutingMode::FixedTopK &&
      (top_k < 1 || top_k > num_experts)) {
    throw std::invalid_argument("fixed_topk requires 1 <= k <= expert count");
  }
}

Eigen::VectorXd gate_probs(const Eigen::VectorXd& logits) {
  if (logits.size() < 1) {
    throw std::invalid_argument("gate_probs: empty logits");
  }
  if (!logits.allFinite()) {
    throw std::invalid_argument("gate_probs: non-finite logits");
  }
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

Eigen::VectorXd add_gate_noise(const Eigen::VectorXd& gates, double sigma,
                               std::mt19937_64& rng) {
  if (sigma == 0.0) return gates;
  std::normal_distribution<double> dist(0.0, sigma);
  Eigen::VectorXd noisy = gates;
  for (Eigen::Index i = 0; i < noisy.size(); ++i) {
    noisy[i] += dist(rng);
  }
  return noisy;
}

int dynamic_k_max(double tau, int n) {
  const int k = static_cast<int>(std::ceil((1.0 - tau) * static_cast<double>(n)));
  return std::clamp(k, 1, n);
}

namespace {

SelectionResult fallback_argmax(const Eigen::VectorXd& values, double threshold) {
  int best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = static_cast<int>(i);
  }
  SelectionResult r;
  r.indices = {best};
  r.threshold = threshold;
  r.k = 1;
  return r;
}

}  // namespace

SelectionResult select_with_threshold(const Eigen::VectorXd& values,
                                      double threshold, int k_max) {
  const int n = static_cast<int>(values.size());
  std::vector<int> chosen;
  for (int i = 0; i < n; ++i) {
    if (values[i] > threshold) chosen.push_back(i);
  }
  if (chosen.empty()) return fallback_argmax(values, threshold);
  if (static_cast<int>(chosen.size()) > k_max) {
    // keep the k_max largest, ties to the lowest index
    std::stable_sort(chosen.begin(), chosen.end(), [&](int a, int b) {
      return values[a] > values[b];
    });
    chosen.resize(static_cast<size_t>(k_max));
    std::sort(chosen.begin(), chosen.end());
  }
  SelectionResult r;
  r.indices = std::move(chosen);
  r.threshold = threshold;
  r.k = static_cast<int>(r.indices.size());
  return r;
}

SelectionResult select_dynamic(const Eigen::VectorXd& values, double tau) {
  const int n = static_cast<int>(values.size());
  if (n < 1) throw std::invalid_argument("select_dynamic: empty input");
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::invalid_argument("select_dynamic: tau must lie in (0, 1)");
  }
  const int k_max = dynamic_k_max(tau, n);
  double threshold;
  if (k_max == n) {
    threshold = -std::numeric_limits<double>::infinity();
  } else {
    // (n - k_max)-th smallest (1-based)
    std::vector<double> sorted(values.data(), values.data() + n);
    const int rank = n - k_max - 1;
    std::nth_element(sorted.begin(), sorted.begin() + rank, sorted.end());
    threshold = sorted[static_cast<size_t>(rank)];
  }
  return select_with_threshold(values, threshold, k_max);
}

SelectionResult select_topk(const Eigen::VectorXd& values, int k) {
  const int n = static_cast<int>(values.size());
  if (k < 1 || k > n) {
    throw std::invalid_argument("select_topk: requires 1 <= k <= n");
  }
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return values[a] > values[b];
  });
  order.resize(static_cast<size_t>(k));
  std::sort(order.begin(), order.end());
  SelectionResult r;
  r.indices = std::move(order);
  r.threshold = std::numeric_limits<double>::quiet_NaN();
  r.k = k;
  return r;
}

Eigen::VectorXd combine_weights_dynamic(const Eigen::VectorXd& selected_gates,
                                        double temperature) {
  if (selected_gates.size() < 1) {
    throw std::invalid_argument("combine_weights_dynamic: no selected gates");
  }
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("combine_weights_dynamic: temperature must be positive");
  }
  return gate_probs(selected_gates / temperature);
}

Eigen::VectorXd combine_dynamic(const Eigen::VectorXd& selected_gates,
                                const std::vector<Eigen::VectorXd>& expert_outputs,
                                double temperature) {
  if (static_cast<size_t>(selected_gates.size()) != expert_outputs.size()) {
    throw std::invalid_argument("combine_dynamic: gate/output length mismatch");
  }
  const Eigen::VectorXd w = combine_weights_dynamic(selected_gates, temperature);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(expert_outputs.front().size());
  for (size_t i = 0; i < expert_outputs.size(); ++i) {
    if (expert_outputs[i].size() != out.size()) {
      throw std::invalid_argument("combine_dynamic: expert output dim mismatch");
    }
    out += w[static_cast<Eigen::Index>(i)] * expert_outputs[i];
  }
  return out;
}

Eigen::VectorXd combine_topk(const Eigen::VectorXd& gate_values,
                             const std::vector<Eigen::VectorXd>& expert_outputs) {
  if (static_cast<size_t>(gate_values.size()) != expert_outputs.size()) {
    throw std::invalid_argument("combine_topk: gate/output length mismatch");
  }
  if (expert_outputs.empty()) {
    throw std::invalid_argument("combine_topk: no expert outputs");
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(expert_outputs.front().size());
  for (size_t i = 0; i < expert_outputs.size(); ++i) {
    if (expert_outputs[i].size() != out.size()) {
      throw std::invalid_argument("combine_topk: expert output dim mismatch");
    }
    out += gate_values[static_cast<Eigen::Index>(i)] * expert_outputs[i];
  }
  return out;
}

std::uint64_t count_patterns_fixed(int n, int k) {
  if (n < 0 || n > 64 || k < 0 || k > n) {
    throw std::invalid_argument("count_patterns_fixed: requires 0 <= k <= n <= 64");
  }
  if (k > n - k) k = n - k;
  unsigned __int128 c = 1;
  for (int j = 1; j <= k; ++j) {
    c = c * static_cast<unsigned>(n - k + j) / static_cast<unsigned>(j);
  }
  if (c > std::numeric_limits<std::uint64_t>::max()) {
    throw std::overflow_error("count_patterns_fixed: result exceeds 64 bits");
  }
  return static_cast<std::uint64_t>(c);
}

std::uint64_t count_patterns_dynamic(int n, int k_max) {
  if (n < 1 || n > 64 || k_max < 1 || k_max > n) {
    throw std::invalid_argument("count_patterns_dynamic: requires 1 <= k_max <= n <= 64");
  }
  unsigned __int128 total = 0;
  for (int k = 1; k <= k_max; ++k) {
    total += count_patterns_fixed(n, k);
  }
  if (total > std::numeric_limits<std::uint64_t>::max()) {
    throw std::overflow_error("count_patterns_dynamic: result exceeds 64 bits");
  }
  return static_cast<std::uint64_t>(total);
}

ActiveBounds expected_active_bounds(double tau, int n) {
  if (!(tau > 0.0 && tau < 1.0) || n < 1) {
    throw std::invalid_argument("expected_active_bounds: invalid tau or n");
  }
  ActiveBounds b;
  b.lower = 1;
  b.upper = dynamic_k_max(tau, n);
  b.nominal = (1.0 - tau) * static_cast<double>(n);
  return b;
}

}  // namespace dynamoe
