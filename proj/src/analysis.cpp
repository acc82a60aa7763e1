#include "dynamoe/analysis.hpp"

#include "dynamoe/train.hpp"

#include <cmath>
#include <stdexcept>

namespace dynamoe {

std::vector<LayerUsageStats> usage_stats(
    const std::vector<std::vector<SelectionResult>>& records_per_layer,
    const std::vector<int>& experts_per_layer) {
  if (records_per_layer.size() != experts_per_layer.size()) {
    throw std::invalid_argument("usage_stats: layer count mismatch");
  }
  std::vector<LayerUsageStats> out;
  for (size_t li = 0; li < records_per_layer.size(); ++li) {
    const auto& records = records_per_layer[li];
    if (records.empty()) {
      throw std::invalid_argument("usage_stats: no records for layer " +
                                  std::to_string(li + 1));
    }
    const int n = experts_per_layer[li];
    std::vector<double> counts(static_cast<size_t>(n), 0.0);
    double total_active = 0.0;
    double total_routings = 0.0;
    for (const SelectionResult& sel : records) {
      total_active += sel.k;
      for (int idx : sel.indices) {
        counts[static_cast<size_t>(idx)] += 1.0;
        total_routings += 1.0;
      }
    }
    double entropy = 0.0;
    for (double c : counts) {
      if (c > 0.0) {
        const double p = c / total_routings;
        entropy -= p * std::log2(p);
      }
    }
    LayerUsageStats s;
    s.layer = static_cast<int>(li) + 1;
    s.n_experts = n;
    s.avg_active = total_active / static_cast<double>(records.size());
    s.utilization_pct = 100.0 * s.avg_active / static_cast<double>(n);
    s.usage_entropy_bits = entropy;
    out.push_back(s);
  }
  return out;
}

double efficiency(double accuracy_pct, std::int64_t params) {
  if (params <= 0) throw std::invalid_argument("efficiency: params must be > 0");
  return accuracy_pct / (static_cast<double>(params) / 10000.0);
}

int epochs_to_fraction(const std::vector<double>& val_accuracy, double fraction) {
  if (val_accuracy.empty()) {
    throw std::invalid_argument("epochs_to_fraction: empty metrics");
  }
  const double target = fraction * val_accuracy.back();
  for (size_t i = 0; i < val_accuracy.size(); ++i) {
    if (val_accuracy[i] >= target) return static_cast<int>(i) + 1;
  }
  return static_cast<int>(val_accuracy.size());
}

GradVarianceReport grad_variance_probe(Model& model, const Dataset& data,
                                       RoutingMode mode, int n_batches,
                                       int batch_size, std::uint64_t seed) {
  if (n_batches < 2) {
    throw std::invalid_argument("grad_variance_probe: n_batches must be >= 2");
  }
  const RoutingConfig saved = model.config().routing;
  RoutingConfig rc = saved;
  rc.mode = mode;
  if (mode == RoutingMode::FixedTopK) {
    int min_count = model.expert_counts().front();
    for (int c : model.expert_counts()) min_count = std::min(min_count, c);
    rc.top_k = std::min(2, min_count);
  }
  model.set_routing(rc);

  std::mt19937_64 rng(seed);
  std::vector<Eigen::VectorXd> per_sample_grads;
  std::vector<std::vector<SelectionResult>> records(
      static_cast<size_t>(model.num_layers()));

  const auto all_batches = batches(data, batch_size, seed, /*epoch=*/0);
  const int use = std::min<int>(n_batches, static_cast<int>(all_batches.size()));
  for (int bi = 0; bi < use; ++bi) {
    const Batch& b = all_batches[static_cast<size_t>(bi)];
    for (Eigen::Index i = 0; i < b.inputs.rows(); ++i) {
      const Matrix x = b.inputs.row(i);
      const std::vector<int> label = {b.labels[static_cast<size_t>(i)]};
      ForwardCache cache;
      const Matrix logits = model.forward(x, /*training=*/false, rng, &cache);
      model.zero_grad();
      model.backward(cache, cross_entropy_grad(logits, label));
      std::vector<double> flat;
      model.visit_params([&](const std::string& name, Model::ParamRef,
                             Model::ParamRef g) {
        if (name.find("gate_w") != std::string::npos) {
          flat.insert(flat.end(), g.data(), g.data() + g.size());
        }
      });
      per_sample_grads.emplace_back(
          Eigen::Map<const Eigen::VectorXd>(flat.data(),
                                            static_cast<Eigen::Index>(flat.size())));
      for (int li = 0; li < model.num_layers(); ++li) {
        const auto& sel = cache.layers[static_cast<size_t>(li)].selections;
        auto& layer_records = records[static_cast<size_t>(li)];
        layer_records.insert(layer_records.end(), sel.begin(), sel.end());
      }
    }
  }
  model.set_routing(saved);

  GradVarianceReport report;
  report.mode = to_string(mode);
  const auto n = static_cast<double>(per_sample_grads.size());
  if (!per_sample_grads.empty() && per_sample_grads.front().size() > 0) {
    const Eigen::Index dim = per_sample_grads.front().size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (const auto& g : per_sample_grads) mean += g;
    mean /= n;
    Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
    for (const auto& g : per_sample_grads) var += (g - mean).cwiseAbs2();
    var /= (n - 1.0);
    report.mean_gate_grad_variance = var.mean();
  }

  const auto stats = usage_stats(records, model.expert_counts());
  double entropy_sum = 0.0;
  int gated_layers = 0;
  for (const auto& s : stats) {
    if (s.n_experts > 1) {
      entropy_sum += s.usage_entropy_bits;
      ++gated_layers;
    }
  }
  report.routing_entropy_bits =
      gated_layers > 0 ? entropy_sum / gated_layers : 0.0;
  return report;
}

}  // namespace dynamoe
