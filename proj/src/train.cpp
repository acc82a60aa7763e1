#include "dynamoe/train.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace dynamoe {

void TrainConfig::validate() const {
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("betas must lie in (0, 1)");
  }
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
}

double cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
  const Eigen::Index batch = logits.rows();
  if (static_cast<Eigen::Index>(labels.size()) != batch) {
    throw std::invalid_argument("cross_entropy: batch size mismatch");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < batch; ++i) {
    const int label = labels[static_cast<size_t>(i)];
    if (label < 0 || label >= logits.cols()) {
      throw std::invalid_argument("cross_entropy: label out of range");
    }
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    total += lse - logits(i, label);
  }
  return total / static_cast<double>(batch);
}

Matrix cross_entropy_grad(const Matrix& logits, const std::vector<int>& labels) {
  const Eigen::Index batch = logits.rows();
  Matrix grad(batch, logits.cols());
  for (Eigen::Index i = 0; i < batch; ++i) {
    const double m = logits.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(i).array() - m).exp();
    grad.row(i) = e / e.sum();
    grad(i, labels[static_cast<size_t>(i)]) -= 1.0;
  }
  return grad / static_cast<double>(batch);
}

double cosine_lr(double base_lr, int epoch, int total_epochs) {
  if (epoch < 0 || epoch >= total_epochs) {
    throw std::invalid_argument("cosine_lr: epoch out of range");
  }
  return base_lr * 0.5 *
         (1.0 + std::cos(M_PI * static_cast<double>(epoch) /
                         static_cast<double>(total_epochs)));
}

void adamw_update(Eigen::Ref<Matrix> param, const Matrix& grad, Matrix& m,
                  Matrix& v, int t, const TrainConfig& cfg, double current_lr) {
  constexpr double eps = 1e-8;
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v = cfg.beta2 * v.array() + (1.0 - cfg.beta2) * grad.array().square();
  const Matrix m_hat = m / bias1;
  const Matrix v_hat = v / bias2;
  param.array() -= current_lr * m_hat.array() / (v_hat.array().sqrt() + eps);
  param.array() -= current_lr * cfg.weight_decay * param.array();
}

void AdamW::step(Model& model, double current_lr) {
  ++t_;
  model.visit_params([&](const std::string& name, Model::ParamRef p,
                         Model::ParamRef g) {
    if (!g.allFinite()) {
      throw std::runtime_error("non-finite gradient in '" + name +
                               "' at optimizer step " + std::to_string(t_));
    }
    auto [mit, im] = m_.try_emplace(name, Matrix::Zero(p.rows(), p.cols()));
    auto [vit, iv] = v_.try_emplace(name, Matrix::Zero(p.rows(), p.cols()));
    adamw_update(p, g, mit->second, vit->second, t_, cfg_, current_lr);
  });
}

EvalResult evaluate(Model& model, const Dataset& split, int batch_size) {
  if (split.size() == 0) throw std::invalid_argument("evaluate: empty split");
  std::mt19937_64 rng(0);  // unused: eval mode draws no noise
  std::vector<std::vector<SelectionResult>> records(
      static_cast<size_t>(model.num_layers()));

  double loss_sum = 0.0;
  std::int64_t correct = 0;
  for (std::int64_t start = 0; start < split.size(); start += batch_size) {
    const std::int64_t sz = std::min<std::int64_t>(batch_size, split.size() - start);
    const Matrix x = split.inputs.middleRows(start, sz);
    std::vector<int> labels(split.labels.begin() + start,
                            split.labels.begin() + start + sz);
    ForwardCache cache;
    const Matrix logits = model.forward(x, /*training=*/false, rng, &cache);
    loss_sum += cross_entropy(logits, labels) * static_cast<double>(sz);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      int best = 0;  // ties break to the lowest class index
      for (Eigen::Index c = 1; c < logits.cols(); ++c) {
        if (logits(i, c) > logits(i, best)) best = static_cast<int>(c);
      }
      if (best == labels[static_cast<size_t>(i)]) ++correct;
    }
    for (int li = 0; li < model.num_layers(); ++li) {
      auto& layer_records = records[static_cast<size_t>(li)];
      const auto& sel = cache.layers[static_cast<size_t>(li)].selections;
      layer_records.insert(layer_records.end(), sel.begin(), sel.end());
    }
  }

  EvalResult r;
  r.loss = loss_sum / static_cast<double>(split.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(split.size());
  r.usage = usage_stats(records, model.expert_counts());
  return r;
}

std::vector<EpochMetrics> fit(Model& model, const Dataset& train,
                              const Dataset& val, const TrainConfig& cfg,
                              const EpochCallback& on_epoch) {
  cfg.validate();
  const Dataset train_set =
      cfg.subset_size > 0 && cfg.subset_size < train.size()
          ? train.subset(cfg.subset_size)
          : train;

  std::mt19937_64 rng(cfg.seed);
  AdamW opt(cfg);
  std::vector<EpochMetrics> history;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = cosine_lr(cfg.lr, epoch, cfg.epochs);
    double loss_sum = 0.0;
    std::int64_t seen = 0;
    int batch_idx = 0;
    for (const Batch& b : batches(train_set, cfg.batch_size, cfg.seed, epoch)) {
      ForwardCache cache;
      const Matrix logits = model.forward(b.inputs, /*training=*/true, rng, &cache);
      const double loss = cross_entropy(logits, b.labels);
      if (!std::isfinite(loss)) {
        throw std::runtime_error(
            "NaN/inf training loss at epoch " + std::to_string(epoch + 1) +
            ", batch " + std::to_string(batch_idx) + ", lr " + std::to_string(lr));
      }
      loss_sum += loss * static_cast<double>(b.inputs.rows());
      seen += b.inputs.rows();
      model.zero_grad();
      model.backward(cache, cross_entropy_grad(logits, b.labels));
      opt.step(model, lr);
      ++batch_idx;
    }

    const EvalResult ev = evaluate(model, val, cfg.batch_size);
    EpochMetrics m;
    m.epoch = epoch + 1;
    m.train_loss = loss_sum / static_cast<double>(seen);
    m.val_loss = ev.loss;
    m.val_accuracy = ev.accuracy;
    m.per_layer_usage = ev.usage;
    m.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return history;
}

}  // namespace dynamoe
