#pragma once

#include "dynamoe/analysis.hpp"
#include "dynamoe/data.hpp"
#include "dynamoe/model.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

namespace dynamoe {

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-4;
  int epochs = 20;
  int batch_size = 256;
  std::uint64_t seed = 1;
  std::int64_t subset_size = 0;  // 0 = full dataset

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;  // fraction in [0, 1]
  std::vector<LayerUsageStats> per_layer_usage;
  double wall_seconds = 0.0;
};

/// Mean batch cross-entropy with log-sum-exp stabilization.
double cross_entropy(const Matrix& logits, const std::vector<int>& labels);

/// d(mean cross-entropy)/d(logits) = (softmax - onehot) / B.
Matrix cross_entropy_grad(const Matrix& logits, const std::vector<int>& labels);

double cosine_lr(double base_lr, int epoch, int total_epochs);

/// Single decoupled-weight-decay update for one parameter tensor;
/// m and v are the running moments, t the 1-based step count.
void adamw_update(Eigen::Ref<Matrix> param, const Matrix& grad, Matrix& m,
                  Matrix& v, int t, const TrainConfig& cfg, double current_lr);

class AdamW {
 public:
  explicit AdamW(const TrainConfig& cfg) : cfg_(cfg) {}

  /// One decoupled-weight-decay update over all model parameters.
  void step(Model& model, double current_lr);

  int steps_taken() const { return t_; }

 private:
  TrainConfig cfg_;
  int t_ = 0;
  std::map<std::string, Matrix> m_;
  std::map<std::string, Matrix> v_;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<LayerUsageStats> usage;
};

EvalResult evaluate(Model& model, const Dataset& split, int batch_size = 256);

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Training loop: seeded shuffle, noisy forward, backward, AdamW with
/// per-epoch cosine annealing, then evaluation on the held-out split.
std::vector<EpochMetrics> fit(Model& model, const Dataset& train,
                              const Dataset& val, const TrainConfig& cfg,
                              const EpochCallback& on_epoch = nullptr);

}  // namespace dynamoe
