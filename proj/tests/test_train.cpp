#include "dynamoe/train.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace dynamoe;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.preset = SizePreset::Tiny;
  cfg.schedule = {ScheduleKind::Descending, 4, 1, 2};
  cfg.input_dim = 8;
  cfg.num_classes = 4;
  return cfg;
}

}  // namespace

TEST_CASE("cross entropy hand values and naive oracle") {
  // uniform logits over C classes cost ln C
  const Matrix zeros = Matrix::Zero(3, 10);
  CHECK(cross_entropy(zeros, {0, 5, 9}) == doctest::Approx(std::log(10.0)));

  // a confident correct prediction approaches zero loss
  Matrix conf = Matrix::Zero(1, 3);
  conf(0, 2) = 50.0;
  CHECK(cross_entropy(conf, {2}) < 1e-12);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> d(0.0, 2.0);
  Matrix logits(5, 6);
  for (Eigen::Index j = 0; j < 6; ++j)
    for (Eigen::Index i = 0; i < 5; ++i) logits(i, j) = d(rng);
  const std::vector<int> labels = {0, 3, 5, 1, 2};
  double naive = 0.0;
  for (int b = 0; b < 5; ++b) {
    double z = 0.0;
    for (int c = 0; c < 6; ++c) z += std::exp(logits(b, c));
    naive += -std::log(std::exp(logits(b, labels[static_cast<size_t>(b)])) / z);
  }
  naive /= 5.0;
  CHECK(cross_entropy(logits, labels) == doctest::Approx(naive).epsilon(1e-10));

  // large logits must not overflow
  CHECK(std::isfinite(cross_entropy(Matrix::Constant(1, 2, 1e4), {0})));
  CHECK_THROWS_AS(cross_entropy(zeros, {0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(cross_entropy(zeros, {0, 1, 10}), std::invalid_argument);
}

TEST_CASE("cross entropy gradient matches finite differences") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix logits(3, 4);
  for (Eigen::Index j = 0; j < 4; ++j)
    for (Eigen::Index i = 0; i < 3; ++i) logits(i, j) = d(rng);
  const std::vector<int> labels = {1, 0, 3};
  const Matrix grad = cross_entropy_grad(logits, labels);
  const double step = 1e-6;
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) {
      Matrix up = logits, down = logits;
      up(i, j) += step;
      down(i, j) -= step;
      const double fd = (cross_entropy(up, labels) - cross_entropy(down, labels)) /
                        (2.0 * step);
      CHECK(grad(i, j) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
  // rows sum to zero
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(std::abs(grad.row(i).sum()) < 1e-12);
  }
}

TEST_CASE("cosine annealing schedule") {
  CHECK(cosine_lr(1e-3, 0, 10) == doctest::Approx(1e-3));
  CHECK(cosine_lr(1e-3, 5, 10) == doctest::Approx(5e-4));
  CHECK(cosine_lr(2.0, 9, 10) ==
        doctest::Approx(2.0 * 0.5 * (1.0 + std::cos(M_PI * 9.0 / 10.0))));
  double prev = cosine_lr(1.0, 0, 40);
  for (int e = 1; e < 40; ++e) {
    const double lr = cosine_lr(1.0, e, 40);
    CHECK(lr < prev);
    CHECK(lr > 0.0);
    prev = lr;
  }
  CHECK_THROWS_AS(cosine_lr(1.0, 10, 10), std::invalid_argument);
  CHECK_THROWS_AS(cosine_lr(1.0, -1, 10), std::invalid_argument);
}

TEST_CASE("adamw single update properties") {
  TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.weight_decay = 0.0;

  // first step moves by -lr * sign(grad) up to bias-corrected scaling
  Matrix p = Matrix::Constant(1, 1, 0.5);
  Matrix g = Matrix::Constant(1, 1, 3.0);
  Matrix m = Matrix::Zero(1, 1), v = Matrix::Zero(1, 1);
  adamw_update(p, g, m, v, 1, cfg, cfg.lr);
  CHECK(p(0, 0) == doctest::Approx(0.5 - 1e-2).epsilon(1e-6));

  // decoupled decay alone multiplies by (1 - lr * wd)
  TrainConfig decay = cfg;
  decay.weight_decay = 0.1;
  Matrix pd = Matrix::Constant(1, 1, 2.0);
  Matrix zero = Matrix::Zero(1, 1);
  Matrix md = Matrix::Zero(1, 1), vd = Matrix::Zero(1, 1);
  adamw_update(pd, zero, md, vd, 1, decay, decay.lr);
  CHECK(pd(0, 0) == doctest::Approx(2.0 * (1.0 - 1e-2 * 0.1)).epsilon(1e-9));
}

TEST_CASE("adamw minimizes a scalar quadratic") {
  TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.weight_decay = 0.0;
  Matrix p = Matrix::Constant(1, 1, 3.0);
  Matrix m = Matrix::Zero(1, 1), v = Matrix::Zero(1, 1);
  for (int t = 1; t <= 2000; ++t) {
    const Matrix g = 2.0 * p;  // d/dp of p^2
    adamw_update(p, g, m, v, t, cfg, cfg.lr);
  }
  CHECK(p(0, 0) * p(0, 0) < 1e-4);
}

TEST_CASE("optimizer drives the full model loss down") {
  const Dataset data = make_synthetic(256, 8, 4, 11, 0.15);
  Model model(tiny_config(), 3);
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.batch_size = 32;
  cfg.seed = 3;
  const auto history = fit(model, data, data, cfg);
  REQUIRE(history.size() == 8);
  CHECK(history.front().epoch == 1);
  CHECK(history.back().train_loss < 0.5 * history.front().train_loss);
  CHECK(history.back().val_accuracy > 0.9);
  for (const auto& em : history) {
    CHECK(std::isfinite(em.train_loss));
    CHECK(em.per_layer_usage.size() == 2);
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  const Dataset data = make_synthetic(128, 8, 4, 5, 0.2);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 32;
  cfg.seed = 42;

  Model a(tiny_config(), 9);
  Model b(tiny_config(), 9);
  const auto ha = fit(a, data, data, cfg);
  const auto hb = fit(b, data, data, cfg);
  for (size_t i = 0; i < ha.size(); ++i) {
    CHECK(ha[i].train_loss == hb[i].train_loss);
    CHECK(ha[i].val_loss == hb[i].val_loss);
    CHECK(ha[i].val_accuracy == hb[i].val_accuracy);
  }

  std::mt19937_64 r1(0), r2(0);
  const Matrix x = data.inputs.topRows(4);
  CHECK((a.forward(x, false, r1) - b.forward(x, false, r2)).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("evaluate on an untrained model sits near chance") {
  const Dataset data = make_synthetic(400, 8, 4, 21, 0.3);
  Model model(tiny_config(), 13);
  const EvalResult r = evaluate(model, data);
  CHECK(r.accuracy > 0.05);
  CHECK(r.accuracy < 0.60);
  CHECK(r.loss == doctest::Approx(std::log(4.0)).epsilon(0.25));
  REQUIRE(r.usage.size() == 2);
  CHECK(r.usage[0].n_experts == 4);
  CHECK(r.usage[1].n_experts == 1);

  // evaluation ignores gate noise: repeated calls agree exactly
  const EvalResult again = evaluate(model, data);
  CHECK(again.loss == r.loss);
  CHECK(again.accuracy == r.accuracy);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.batch_size = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.beta2 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
