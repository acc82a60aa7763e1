#include "dynamoe/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dynamoe {

namespace {
constexpr double kLayerNormEps = 1e-5;
}

std::string to_string(SizePreset p) {
  switch (p) {
    case SizePreset::Tiny: return "tiny";
    case SizePreset::Small: return "small";
    case SizePreset::Medium: return "medium";
    case SizePreset::Large: return "large";
  }
  throw std::logic_error("unreachable size preset");
}

SizePreset size_preset_from_string(const std::string& name) {
  if (name == "tiny") return SizePreset::Tiny;
  if (name == "small") return SizePreset::Small;
  if (name == "medium") return SizePreset::Medium;
  if (name == "large") return SizePreset::Large;
  throw std::invalid_argument("unknown size preset: '" + name + "'");
}

int preset_layers(SizePreset p) {
  switch (p) {
    case SizePreset::Tiny: return 2;
    case SizePreset::Small: return 4;
    case SizePreset::Medium: return 6;
    case SizePreset::Large: return 8;
  }
  throw std::logic_error("unreachable size preset");
}

int preset_hidden_dim(SizePreset p) {
  switch (p) {
    case SizePreset::Tiny: return 64;
    case SizePreset::Small: return 128;
    case SizePreset::Medium: return 256;
    case SizePreset::Large: return 512;
  }
  throw std::logic_error("unreachable size preset");
}

void ModelConfig::validate() const {
  schedule.validate();
  if (schedule.layers != preset_layers(preset)) {
    throw std::invalid_argument("schedule.layers must match the size preset");
  }
  if (input_dim < 1 || num_classes < 1) {
    throw std::invalid_argument("input_dim and num_classes must be >= 1");
  }
  if (!(expert_expansion > 0.0) || !(dense_expansion > 0.0)) {
    throw std::invalid_argument("expansion factors must be positive");
  }
  int min_count = schedule.n_max;
  for (int c : layer_expert_counts(schedule)) min_count = std::min(min_count, c);
  routing.validate(min_count);
}

Matrix expert_forward(const ExpertParams& p, const Matrix& x) {
  if (x.cols() != p.w1.rows()) {
    throw std::invalid_argument("expert_forward: input dim mismatch");
  }
  Matrix z1 = (x * p.w1).rowwise() + p.b1.transpose();
  Matrix a1 = z1.cwiseMax(0.0);
  return (a1 * p.w2).rowwise() + p.b2.transpose();
}

namespace {

Matrix kaiming_uniform(int rows, int cols, int fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      m(i, j) = dist(rng);
    }
  }
  return m;
}

}  // namespace

Model::Model(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  d_ = preset_hidden_dim(cfg_.preset);
  std::mt19937_64 rng(init_seed);

  const bool dense = cfg_.baseline == BaselineKind::DenseMlp;
  if (dense) {
    expert_counts_.assign(static_cast<size_t>(cfg_.schedule.layers), 1);
  } else {
    expert_counts_ = layer_expert_counts(cfg_.schedule);
  }

  w_in = kaiming_uniform(d_, cfg_.input_dim, cfg_.input_dim, rng);
  b_in = Vector::Zero(d_);

  const double expansion = dense ? cfg_.dense_expansion : cfg_.expert_expansion;
  const int h = std::max(1, static_cast<int>(std::lround(expansion * d_)));

  layers_.resize(expert_counts_.size());
  for (size_t li = 0; li < layers_.size(); ++li) {
    MoELayerParams& layer = layers_[li];
    const int n = expert_counts_[li];
    if (!dense) {
      // small gate init keeps routing near-uniform at the start
      layer.gate_w = 0.1 * kaiming_uniform(n, d_, d_, rng);
    }
    layer.experts.resize(static_cast<size_t>(n));
    for (ExpertParams& e : layer.experts) {
      e.w1 = kaiming_uniform(d_, h, d_, rng);
      e.b1 = Vector::Zero(h);
      e.w2 = kaiming_uniform(h, d_, h, rng);
      e.b2 = Vector::Zero(d_);
    }
  }

  w_out = kaiming_uniform(cfg_.num_classes, d_, d_, rng);
  b_out = Vector::Zero(cfg_.num_classes);
  zero_grad();
}

void Model::set_routing(const RoutingConfig& rc) {
  int min_count = expert_counts_.empty() ? 1 : expert_counts_.front();
  for (int c : expert_counts_) min_count = std::min(min_count, c);
  rc.validate(min_count);
  cfg_.routing = rc;
}

void Model::zero_grad() {
  gw_in = Matrix::Zero(w_in.rows(), w_in.cols());
  gb_in = Vector::Zero(b_in.size());
  gw_out = Matrix::Zero(w_out.rows(), w_out.cols());
  gb_out = Vector::Zero(b_out.size());
  for (MoELayerParams& layer : layers_) {
    layer.ggate_w = Matrix::Zero(layer.gate_w.rows(), layer.gate_w.cols());
    for (ExpertParams& e : layer.experts) {
      e.gw1 = Matrix::Zero(e.w1.rows(), e.w1.cols());
      e.gb1 = Vector::Zero(e.b1.size());
      e.gw2 = Matrix::Zero(e.w2.rows(), e.w2.cols());
      e.gb2 = Vector::Zero(e.b2.size());
    }
  }
}

void Model::layer_forward(int li, const Matrix& h, bool training,
                          std::mt19937_64& rng, LayerCache& cache) const {
  const MoELayerParams& layer = layers_[static_cast<size_t>(li)];
  const int batch = static_cast<int>(h.rows());
  const int n = layer.num_experts();
  const bool dense = cfg_.baseline == BaselineKind::DenseMlp;
  const RoutingConfig& rc = cfg_.routing;

  cache.input = h;
  cache.selections.resize(static_cast<size_t>(batch));
  cache.expert_hidden.assign(static_cast<size_t>(batch), {});
  cache.expert_out.assign(static_cast<size_t>(batch), {});

  if (!dense) {
    Matrix logits = h * layer.gate_w.transpose();  // B x N
    cache.gate_probs.resize(batch, n);
    for (int t = 0; t < batch; ++t) {
      cache.gate_probs.row(t) = gate_probs(logits.row(t).transpose()).transpose();
    }
    if (training && rc.noise_sigma > 0.0) {
      cache.noisy_gates.resize(batch, n);
      for (int t = 0; t < batch; ++t) {
        cache.noisy_gates.row(t) =
            add_gate_noise(cache.gate_probs.row(t).transpose(), rc.noise_sigma, rng)
                .transpose();
      }
    } else {
      cache.noisy_gates = cache.gate_probs;
    }

    double pooled_threshold = 0.0;
    if (rc.mode == RoutingMode::DynamicBatch) {
      const Eigen::Map<const Vector> pooled(cache.noisy_gates.data(),
                                            cache.noisy_gates.size());
      const SelectionResult pooled_sel = select_dynamic(pooled, rc.tau);
      pooled_threshold = pooled_sel.threshold;
    }

    for (int t = 0; t < batch; ++t) {
      const Vector g = cache.noisy_gates.row(t).transpose();
      SelectionResult sel;
      switch (rc.mode) {
        case RoutingMode::DynamicPerToken:
          sel = select_dynamic(g, rc.tau);
          break;
        case RoutingMode::DynamicBatch:
          sel = select_with_threshold(g, pooled_threshold, dynamic_k_max(rc.tau, n));
          break;
        case RoutingMode::FixedTopK:
          sel = select_topk(g, rc.top_k);
          break;
      }
      Vector selected_gates(sel.k);
      for (int i = 0; i < sel.k; ++i) selected_gates[i] = g[sel.indices[static_cast<size_t>(i)]];
      if (rc.mode == RoutingMode::FixedTopK) {
        sel.weights.assign(selected_gates.data(), selected_gates.data() + sel.k);
      } else {
        const Vector w = combine_weights_dynamic(selected_gates, rc.temperature);
        sel.weights.assign(w.data(), w.data() + sel.k);
      }
      cache.selections[static_cast<size_t>(t)] = std::move(sel);
    }
  } else {
    for (int t = 0; t < batch; ++t) {
      SelectionResult sel;
      sel.indices = {0};
      sel.weights = {1.0};
      sel.k = 1;
      cache.selections[static_cast<size_t>(t)] = std::move(sel);
    }
  }

  // evaluate selected experts and combine
  Matrix moe_out = Matrix::Zero(batch, d_);
  for (int t = 0; t < batch; ++t) {
    const Vector x = h.row(t).transpose();
    const SelectionResult& sel = cache.selections[static_cast<size_t>(t)];
    auto& hiddens = cache.expert_hidden[static_cast<size_t>(t)];
    auto& outs = cache.expert_out[static_cast<size_t>(t)];
    hiddens.reserve(static_cast<size_t>(sel.k));
    outs.reserve(static_cast<size_t>(sel.k));
    for (int i = 0; i < sel.k; ++i) {
      const ExpertParams& e = layer.experts[static_cast<size_t>(sel.indices[static_cast<size_t>(i)])];
      Vector a1 = ((e.w1.transpose() * x) + e.b1).cwiseMax(0.0);
      Vector out = (e.w2.transpose() * a1) + e.b2;
      moe_out.row(t) += sel.weights[static_cast<size_t>(i)] * out.transpose();
      hiddens.push_back(std::move(a1));
      outs.push_back(std::move(out));
    }
  }

  cache.pre_norm = moe_out + h;

  // post-residual layer norm (no affine parameters)
  cache.normed.resize(batch, d_);
  cache.inv_std.resize(batch);
  for (int t = 0; t < batch; ++t) {
    const double mean = cache.pre_norm.row(t).mean();
    const Eigen::RowVectorXd centered = cache.pre_norm.row(t).array() - mean;
    const double var = centered.squaredNorm() / static_cast<double>(d_);
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std[t] = inv_std;
    cache.normed.row(t) = centered * inv_std;
  }
}

Matrix Model::forward(const Matrix& x, bool training, std::mt19937_64& rng,
                      ForwardCache* cache) {
  if (x.cols() != cfg_.input_dim) {
    throw std::invalid_argument("model forward: input dim mismatch");
  }
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c = ForwardCache{};
  c.input = x;
  c.h0 = (x * w_in.transpose()).rowwise() + b_in.transpose();
  c.layers.resize(layers_.size());
  Matrix h = c.h0;
  for (size_t li = 0; li < layers_.size(); ++li) {
    layer_forward(static_cast<int>(li), h, training, rng, c.layers[li]);
    h = c.layers[li].normed;
  }
  c.logits = (h * w_out.transpose()).rowwise() + b_out.transpose();
  return c.logits;
}

Matrix Model::layer_backward(int li, const LayerCache& cache, const Matrix& dnormed) {
  MoELayerParams& layer = layers_[static_cast<size_t>(li)];
  const int batch = static_cast<int>(cache.input.rows());
  const bool dense = cfg_.baseline == BaselineKind::DenseMlp;
  const RoutingConfig& rc = cfg_.routing;

  // layer-norm backward
  Matrix dpre(batch, d_);
  for (int t = 0; t < batch; ++t) {
    const Eigen::RowVectorXd dy = dnormed.row(t);
    const Eigen::RowVectorXd y = cache.normed.row(t);
    const double mean_dy = dy.mean();
    const double mean_dy_y = (dy.cwiseProduct(y)).mean();
    dpre.row(t) = cache.inv_std[t] * (dy.array() - mean_dy - y.array() * mean_dy_y);
  }

  Matrix dinput = dpre;  // residual path

  for (int t = 0; t < batch; ++t) {
    const Vector du = dpre.row(t).transpose();
    const Vector x = cache.input.row(t).transpose();
    const SelectionResult& sel = cache.selections[static_cast<size_t>(t)];
    const auto& hiddens = cache.expert_hidden[static_cast<size_t>(t)];
    const auto& outs = cache.expert_out[static_cast<size_t>(t)];

    Vector dot_out(sel.k);  // <du, E_i(x)> per selected expert
    for (int i = 0; i < sel.k; ++i) dot_out[i] = du.dot(outs[static_cast<size_t>(i)]);

    Vector dx = Vector::Zero(d_);
    for (int i = 0; i < sel.k; ++i) {
      ExpertParams& e = layer.experts[static_cast<size_t>(sel.indices[static_cast<size_t>(i)])];
      const double w = sel.weights[static_cast<size_t>(i)];
      const Vector dout = w * du;
      const Vector& a1 = hiddens[static_cast<size_t>(i)];
      e.gw2.noalias() += a1 * dout.transpose();
      e.gb2 += dout;
      Vector da1 = e.w2 * dout;
      Vector dz1 = (a1.array() > 0.0).select(da1, 0.0);
      e.gw1.noalias() += x * dz1.transpose();
      e.gb1 += dz1;
      dx.noalias() += e.w1 * dz1;
    }

    if (!dense) {
      const int n = layer.num_experts();
      // gradient into the (noisy) gate values at selected entries
      Vector dgate = Vector::Zero(n);
      if (rc.mode == RoutingMode::FixedTopK) {
        for (int i = 0; i < sel.k; ++i) {
          dgate[sel.indices[static_cast<size_t>(i)]] = dot_out[i];
        }
      } else {
        Eigen::Map<const Vector> w(sel.weights.data(), sel.k);
        const double weighted = w.dot(dot_out);
        for (int i = 0; i < sel.k; ++i) {
          dgate[sel.indices[static_cast<size_t>(i)]] =
              w[i] * (dot_out[i] - weighted) / rc.temperature;
        }
      }
      // softmax backward (additive noise passes gradient through)
      const Vector g = cache.gate_probs.row(t).transpose();
      const double g_dot = g.dot(dgate);
      const Vector dz = (g.array() * (dgate.array() - g_dot)).matrix();
      layer.ggate_w.noalias() += dz * x.transpose();
      dx.noalias() += layer.gate_w.transpose() * dz;
    }

    dinput.row(t) += dx.transpose();
  }
  return dinput;
}

void Model::backward(ForwardCache& cache, const Matrix& dlogits) {
  if (cache.consumed) {
    throw std::runtime_error("backward called twice on the same forward cache");
  }
  cache.consumed = true;
  if (cache.layers.size() != layers_.size()) {
    throw std::invalid_argument("backward: cache does not match this model");
  }

  const Matrix& h_last =
      layers_.empty() ? cache.h0 : cache.layers.back().normed;
  gw_out.noalias() += dlogits.transpose() * h_last;
  gb_out += dlogits.colwise().sum().transpose();

  Matrix dh = dlogits * w_out;
  for (int li = static_cast<int>(layers_.size()) - 1; li >= 0; --li) {
    dh = layer_backward(li, cache.layers[static_cast<size_t>(li)], dh);
  }

  gw_in.noalias() += dh.transpose() * cache.input;
  gb_in += dh.colwise().sum().transpose();
}

void Model::visit_params(
    const std::function<void(const std::string&, ParamRef, ParamRef)>& fn) {
  auto visit = [&](const std::string& name, Matrix& v, Matrix& g) {
    fn(name, ParamRef(v.data(), v.rows(), v.cols()),
       ParamRef(g.data(), g.rows(), g.cols()));
  };
  auto visit_vec = [&](const std::string& name, Vector& v, Vector& g) {
    fn(name, ParamRef(v.data(), v.size(), 1), ParamRef(g.data(), g.size(), 1));
  };
  visit("w_in", w_in, gw_in);
  visit_vec("b_in", b_in, gb_in);
  for (size_t li = 0; li < layers_.size(); ++li) {
    MoELayerParams& layer = layers_[li];
    const std::string prefix = "layer" + std::to_string(li) + ".";
    if (layer.gate_w.size() > 0) {
      visit(prefix + "gate_w", layer.gate_w, layer.ggate_w);
    }
    for (size_t ei = 0; ei < layer.experts.size(); ++ei) {
      ExpertParams& e = layer.experts[ei];
      const std::string ep = prefix + "expert" + std::to_string(ei) + ".";
      visit(ep + "w1", e.w1, e.gw1);
      visit_vec(ep + "b1", e.b1, e.gb1);
      visit(ep + "w2", e.w2, e.gw2);
      visit_vec(ep + "b2", e.b2, e.gb2);
    }
  }
  visit("w_out", w_out, gw_out);
  visit_vec("b_out", b_out, gb_out);
}

void Model::visit_params(
    const std::function<void(const std::string&, ConstParamRef)>& fn) const {
  // const_cast is confined to re-using the mutable traversal order
  auto* self = const_cast<Model*>(this);
  self->visit_params([&](const std::string& name, ParamRef v, ParamRef) {
    fn(name, ConstParamRef(v.data(), v.rows(), v.cols()));
  });
}

std::int64_t Model::param_count() const {
  std::int64_t count = 0;
  visit_params([&](const std::string&, ConstParamRef v) { count += v.size(); });
  return count;
}

std::int64_t active_flops_per_token(const MoELayerParams& layer,
                                    const SelectionResult& selection,
                                    int hidden_dim) {
  const std::int64_t d = hidden_dim;
  const std::int64_t h =
      layer.experts.empty() ? 0 : layer.experts.front().w1.cols();
  const std::int64_t expert_cost = 2 * d * h + 2 * h * d;
  const std::int64_t gate_cost =
      layer.gate_w.size() > 0 ? 2 * static_cast<std::int64_t>(layer.num_experts()) * d : 0;
  return selection.k * expert_cost + gate_cost;
}

}  // namespace dynamoe
