#pragma once

#include "dynamoe/routing.hpp"
#include "dynamoe/schedules.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace dynamoe {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Named size presets (layers, hidden dim).
enum class SizePreset { Tiny, Small, Medium, Large };

std::string to_string(SizePreset p);
SizePreset size_preset_from_string(const std::string& name);
int preset_layers(SizePreset p);
int preset_hidden_dim(SizePreset p);

enum class BaselineKind { DynaMoE, DenseMlp };

struct ModelConfig {
  SizePreset preset = SizePreset::Small;
  ScheduleSpec schedule;
  RoutingConfig routing;
  int input_dim = 784;
  int num_classes = 10;
  double expert_expansion = 0.5;  // expert hidden width = round(expansion * d)
  double dense_expansion = 2.0;   // dense-baseline block hidden width
  BaselineKind baseline = BaselineKind::DynaMoE;

  void validate() const;
};

/// Two-layer feed-forward expert: relu(x w1 + b1) w2 + b2.
struct ExpertParams {
  Matrix w1;  // d x h
  Vector b1;  // h
  Matrix w2;  // h x d
  Vector b2;  // d

  Matrix gw1;
  Vector gb1;
  Matrix gw2;
  Vector gb2;
};

struct MoELayerParams {
  Matrix gate_w;   // N x d; empty for the dense baseline
  Matrix ggate_w;
  std::vector<ExpertParams> experts;

  int num_experts() const { return static_cast<int>(experts.size()); }
};

/// Rows are tokens throughout.
Matrix expert_forward(const ExpertParams& p, const Matrix& x);

/// Per-layer forward cache; consumed exactly once by backward.
struct LayerCache {
  Matrix input;                   // B x d
  Matrix gate_probs;              // B x N (pre-noise)
  Matrix noisy_gates;             // B x N
  std::vector<SelectionResult> selections;           // per token
  std::vector<std::vector<Vector>> expert_hidden;    // [token][slot] relu activations
  std::vector<std::vector<Vector>> expert_out;       // [token][slot]
  Matrix pre_norm;                // B x d, residual sum u
  Matrix normed;                  // B x d
  Vector inv_std;                 // B
};

struct ForwardCache {
  Matrix input;                 // B x input_dim
  Matrix h0;                    // B x d
  std::vector<LayerCache> layers;
  Matrix logits;                // B x C
  bool consumed = false;
};

class Model {
 public:
  explicit Model(const ModelConfig& cfg, std::uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<int>& expert_counts() const { return expert_counts_; }

  /// Swaps the routing configuration (analysis probes compare modes on a
  /// trained model). Validated against the smallest layer expert count.
  void set_routing(const RoutingConfig& rc);

  /// Forward pass; training enables gate noise. The cache feeds backward()
  /// and the selection records feed the analysis module.
  Matrix forward(const Matrix& x, bool training, std::mt19937_64& rng,
                 ForwardCache* cache = nullptr);

  /// Accumulates parameter gradients from d(loss)/d(logits). The cache is
  /// single-use; a second call without a fresh forward throws.
  void backward(ForwardCache& cache, const Matrix& dlogits);

  void zero_grad();

  /// Visits every parameter as (name, value, grad); maps alias the
  /// underlying buffers, so in-place updates hit the model directly.
  using ParamRef = Eigen::Map<Matrix>;
  using ConstParamRef = Eigen::Map<const Matrix>;
  void visit_params(
      const std::function<void(const std::string&, ParamRef, ParamRef)>& fn);
  void visit_params(
      const std::function<void(const std::string&, ConstParamRef)>& fn) const;

  std::int64_t param_count() const;

  int hidden_dim() const { return d_; }
  int num_layers() const { return static_cast<int>(layers_.size()); }
  const MoELayerParams& layer(int i) const { return layers_[static_cast<size_t>(i)]; }
  MoELayerParams& layer(int i) { return layers_[static_cast<size_t>(i)]; }

  Matrix w_in, gw_in;    // d x input_dim
  Vector b_in, gb_in;    // d
  Matrix w_out, gw_out;  // C x d
  Vector b_out, gb_out;  // C

  /// One MoE (or dense) layer: gate, select, evaluate selected experts,
  /// combine, residual, post-residual layer norm. Exposed for layer-level
  /// oracle tests.
  void layer_forward(int li, const Matrix& h, bool training,
                     std::mt19937_64& rng, LayerCache& cache) const;

 private:
  ModelConfig cfg_;
  int d_ = 0;
  std::vector<int> expert_counts_;
  std::vector<MoELayerParams> layers_;

  Matrix layer_backward(int li, const LayerCache& cache, const Matrix& dnormed);
};

/// Multiply-accumulate count for one token through a layer under a given
/// selection: expert cost k * (2dh + 2hd) plus gate cost 2Nd.
std::int64_t active_flops_per_token(const MoELayerParams& layer,
                                    const SelectionResult& selection,
                                    int hidden_dim);

}  // namespace dynamoe
