#include "dynamoe/checkpoint.hpp"
#include "dynamoe/model.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>
#include <random>

using namespace dynamoe;

namespace {

ModelConfig tiny_config(int input_dim = 12, int num_classes = 3) {
  ModelConfig cfg;
  cfg.preset = SizePreset::Tiny;
  cfg.schedule = {ScheduleKind::Descending, 4, 1, 2};
  cfg.input_dim = input_dim;
  cfg.num_classes = num_classes;
  return cfg;
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = d(rng);
  return m;
}

}  // namespace

TEST_CASE("expert_forward basics and triple-loop oracle") {
  ExpertParams p;
  p.w1 = Matrix::Zero(3, 2);
  p.b1 = Vector::Zero(2);
  p.w2 = Matrix::Zero(2, 3);
  p.b2 = Vector::Zero(3);
  Matrix x(2, 3);
  x << 1, 2, 3, -1, 0, 1;
  CHECK(expert_forward(p, x).cwiseAbs().maxCoeff() == 0.0);

  // identity weights pass non-negative inputs through
  ExpertParams id;
  id.w1 = Matrix::Identity(3, 3);
  id.b1 = Vector::Zero(3);
  id.w2 = Matrix::Identity(3, 3);
  id.b2 = Vector::Zero(3);
  Matrix xe(1, 3);
  xe << 0.5, 0.0, 2.0;
  CHECK((expert_forward(id, xe) - xe).cwiseAbs().maxCoeff() == 0.0);

  std::mt19937_64 rng(21);
  ExpertParams r;
  r.w1 = random_matrix(4, 5, rng);
  r.b1 = random_matrix(5, 1, rng);
  r.w2 = random_matrix(5, 4, rng);
  r.b2 = random_matrix(4, 1, rng);
  const Matrix xr = random_matrix(3, 4, rng);
  const Matrix got = expert_forward(r, xr);
  for (int b = 0; b < 3; ++b) {
    for (int o = 0; o < 4; ++o) {
      double acc = r.b2[o];
      for (int h = 0; h < 5; ++h) {
        double z = r.b1[h];
        for (int i = 0; i < 4; ++i) z += xr(b, i) * r.w1(i, h);
        if (z > 0) acc += z * r.w2(h, o);
      }
      CHECK(got(b, o) == doctest::Approx(acc).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(expert_forward(r, Matrix::Zero(2, 7)), std::invalid_argument);
}

TEST_CASE("single-expert layer ignores tau and keeps residual") {
  ModelConfig cfg = tiny_config();
  cfg.schedule = {ScheduleKind::Uniform, 1, 1, 2};
  Model model(cfg, 5);
  std::mt19937_64 rng(1);
  const Matrix h = random_matrix(3, model.hidden_dim(), rng);
  LayerCache cache;
  model.layer_forward(0, h, false, rng, cache);
  const Matrix expected = expert_forward(model.layer(0).experts[0], h) + h;
  CHECK((cache.pre_norm - expected).cwiseAbs().maxCoeff() < 1e-12);
  for (const auto& sel : cache.selections) {
    CHECK(sel.indices == std::vector<int>{0});
    CHECK(sel.weights[0] == doctest::Approx(1.0));
  }
}

TEST_CASE("zero-initialized experts give residual passthrough") {
  Model model(tiny_config(), 5);
  model.visit_params([](const std::string& name, Model::ParamRef v, Model::ParamRef) {
    if (name.find("expert") != std::string::npos) v.setZero();
  });
  std::mt19937_64 rng(2);
  const Matrix h = random_matrix(4, model.hidden_dim(), rng);
  LayerCache cache;
  model.layer_forward(0, h, false, rng, cache);
  CHECK((cache.pre_norm - h).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("moe layer matches a scalar per-token reference") {
  ModelConfig cfg = tiny_config();
  cfg.schedule = {ScheduleKind::Uniform, 4, 4, 2};
  Model model(cfg, 31);
  std::mt19937_64 rng(3);
  const int d = model.hidden_dim();
  const Matrix h = random_matrix(3, d, rng);
  LayerCache cache;
  model.layer_forward(0, h, false, rng, cache);

  const auto& layer = model.layer(0);
  const RoutingConfig& rc = cfg.routing;
  for (int t = 0; t < 3; ++t) {
    const Vector x = h.row(t).transpose();
    const Vector logits = layer.gate_w * x;
    const Vector g = gate_probs(logits);
    const SelectionResult sel = select_dynamic(g, rc.tau);
    Vector sel_gates(sel.k);
    std::vector<Vector> outs;
    for (int i = 0; i < sel.k; ++i) {
      sel_gates[i] = g[sel.indices[static_cast<size_t>(i)]];
      Matrix row(1, d);
      row = x.transpose();
      outs.push_back(
          expert_forward(layer.experts[static_cast<size_t>(sel.indices[static_cast<size_t>(i)])], row)
              .row(0)
              .transpose());
    }
    const Vector combined = combine_dynamic(sel_gates, outs, rc.temperature) + x;
    CHECK((cache.pre_norm.row(t).transpose() - combined).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("layer norm statistics") {
  Model model(tiny_config(), 9);
  std::mt19937_64 rng(4);
  const Matrix h = random_matrix(6, model.hidden_dim(), rng);
  LayerCache cache;
  model.layer_forward(0, h, false, rng, cache);
  for (int t = 0; t < 6; ++t) {
    CHECK(std::abs(cache.normed.row(t).mean()) < 1e-6);
    const double var = cache.normed.row(t).squaredNorm() / model.hidden_dim();
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("model forward shape, determinism, softmax rows") {
  ModelConfig cfg = tiny_config(784, 10);
  Model model(cfg, 17);
  std::mt19937_64 rng(6);
  Matrix x = random_matrix(4, 784, rng).cwiseAbs();
  x = x / x.maxCoeff();
  x.row(2) = x.row(1);  // duplicate row

  std::mt19937_64 fwd_rng(0);
  const Matrix logits = model.forward(x, false, fwd_rng);
  CHECK(logits.rows() == 4);
  CHECK(logits.cols() == 10);
  CHECK((logits.row(2) - logits.row(1)).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < 4; ++i) {
    CHECK(gate_probs(logits.row(i).transpose()).sum() == doctest::Approx(1.0));
  }
  const Matrix again = model.forward(x, false, fwd_rng);
  CHECK((again - logits).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("param_count composition and dense baseline scale") {
  // MoE small descending vs the same schedule at n_max = 2
  ModelConfig e8;
  e8.preset = SizePreset::Small;
  e8.schedule = {ScheduleKind::Descending, 8, 1, 4};
  e8.input_dim = 784;
  e8.num_classes = 10;
  ModelConfig e2 = e8;
  e2.schedule.n_max = 2;
  Model m8(e8, 1), m2(e2, 1);
  CHECK(m8.param_count() > m2.param_count());

  // delta equals the summed per-expert and per-gate-row parameter deltas
  const int d = m8.hidden_dim();
  const int h = static_cast<int>(std::lround(e8.expert_expansion * d));
  const std::int64_t per_expert = std::int64_t(d) * h + h + std::int64_t(h) * d + d;
  std::int64_t expected_delta = 0;
  const auto c8 = layer_expert_counts(e8.schedule);
  const auto c2 = layer_expert_counts(e2.schedule);
  for (size_t i = 0; i < c8.size(); ++i) {
    expected_delta += (c8[i] - c2[i]) * (per_expert + d);  // + gate row
  }
  CHECK(m8.param_count() - m2.param_count() == expected_delta);

  ModelConfig dense = e8;
  dense.baseline = BaselineKind::DenseMlp;
  Model md(dense, 1);
  CHECK(md.param_count() > 0.85 * 340000);
  CHECK(md.param_count() < 1.15 * 340000);
}

TEST_CASE("dense baseline equals a one-expert DynaMoE under shared weights") {
  ModelConfig moe = tiny_config();
  moe.schedule = {ScheduleKind::Uniform, 1, 1, 2};
  ModelConfig dense = moe;
  dense.baseline = BaselineKind::DenseMlp;
  dense.dense_expansion = moe.expert_expansion;

  Model a(moe, 7);
  Model b(dense, 8);
  // copy shared parameters from a into b (b has no gate weights)
  std::map<std::string, Matrix> params;
  a.visit_params([&](const std::string& name, Model::ConstParamRef v) {
    params[name] = v;
  });
  b.visit_params([&](const std::string& name, Model::ParamRef v, Model::ParamRef) {
    v = params.at(name);
  });

  std::mt19937_64 rng(9);
  const Matrix x = random_matrix(5, moe.input_dim, rng);
  std::mt19937_64 r1(0), r2(0);
  const Matrix la = a.forward(x, false, r1);
  const Matrix lb = b.forward(x, false, r2);
  CHECK((la - lb).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("active flops accounting") {
  ModelConfig cfg = tiny_config();
  cfg.schedule = {ScheduleKind::Uniform, 8, 8, 2};
  cfg.expert_expansion = 1.0;  // h = d = 64
  Model model(cfg, 3);
  SelectionResult one;
  one.indices = {0};
  one.k = 1;
  CHECK(active_flops_per_token(model.layer(0), one, 64) == 17408);

  SelectionResult two = one;
  two.indices = {0, 1};
  two.k = 2;
  const auto gate = 2 * 8 * 64;
  CHECK(active_flops_per_token(model.layer(0), two, 64) - gate ==
        2 * (active_flops_per_token(model.layer(0), one, 64) - gate));

  ModelConfig single = tiny_config();
  single.schedule = {ScheduleKind::Uniform, 1, 1, 2};
  Model ms(single, 3);
  const auto h = static_cast<std::int64_t>(std::lround(single.expert_expansion * 64));
  CHECK(active_flops_per_token(ms.layer(0), one, 64) == 4 * 64 * h + 2 * 64);
}

TEST_CASE("checkpoint round trip") {
  ModelConfig cfg = tiny_config();
  Model a(cfg, 77);
  const std::string path = "test_ckpt.bin";
  save_checkpoint(a, path, "{\"seed\":77}");

  Model b(cfg, 1234);  // different init
  const std::string manifest = load_checkpoint(b, path);
  CHECK(manifest == "{\"seed\":77}");

  std::mt19937_64 rng(10);
  const Matrix x = Matrix::Random(3, cfg.input_dim);
  std::mt19937_64 r1(0), r2(0);
  CHECK((a.forward(x, false, r1) - b.forward(x, false, r2)).cwiseAbs().maxCoeff() == 0.0);

  Model c(tiny_config(13), 1);  // wrong input dim
  CHECK_THROWS(load_checkpoint(c, path));
  std::remove(path.c_str());
}
