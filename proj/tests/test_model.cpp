#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ctxsim/model.hpp"

using namespace ctxsim;

namespace {

bool params_equal(const MlpParams& a, const MlpParams& b) {
  if (a.weights.size() != b.weights.size() || a.biases.size() != b.biases.size()) return false;
  auto eq = [](const Matrix& x, const Matrix& y) {
    if (!x.same_shape(y)) return false;
    for (int i = 0; i < x.rows(); ++i)
      for (int j = 0; j < x.cols(); ++j)
        if (x(i, j) != y(i, j)) return false;
    return true;
  };
  for (size_t l = 0; l < a.weights.size(); ++l)
    if (!eq(a.weights[l], b.weights[l]) || !eq(a.biases[l], b.biases[l])) return false;
  return true;
}

}  // namespace

TEST_CASE("init shapes follow the widths and stay inside the fan-in bound") {
  MlpConfig cfg;
  cfg.widths = {2, 8, 3};
  MlpParams p = MlpParams::init(cfg, 5);
  REQUIRE(p.num_layers() == 2);
  CHECK(p.weights[0].rows() == 2);
  CHECK(p.weights[0].cols() == 8);
  CHECK(p.weights[1].rows() == 8);
  CHECK(p.weights[1].cols() == 3);
  CHECK(p.biases[0].cols() == 8);
  CHECK(p.biases[1].cols() == 3);
  double bound0 = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 8; ++j) CHECK(std::fabs(p.weights[0](i, j)) <= bound0);
}

TEST_CASE("init is deterministic in the seed") {
  MlpConfig cfg;
  MlpParams a = MlpParams::init(cfg, 11);
  MlpParams b = MlpParams::init(cfg, 11);
  MlpParams c = MlpParams::init(cfg, 12);
  CHECK(params_equal(a, b));
  CHECK(!params_equal(a, c));
}

TEST_CASE("embeddings are unit rows and deterministic") {
  MlpConfig cfg;
  MlpParams p = MlpParams::init(cfg, 3);
  Matrix x(7, 2);
  for (int i = 0; i < 7; ++i) {
    x(i, 0) = 0.1 * i - 0.3;
    x(i, 1) = 0.05 * i;
  }
  Matrix e1 = embed_dataset(p, x);
  Matrix e2 = embed_dataset(p, x);
  REQUIRE(e1.rows() == 7);
  REQUIRE(e1.cols() == 2);
  for (int i = 0; i < 7; ++i) {
    double n2 = e1(i, 0) * e1(i, 0) + e1(i, 1) * e1(i, 1);
    CHECK(n2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e1(i, 0) == e2(i, 0));
    CHECK(e1(i, 1) == e2(i, 1));
  }
}

TEST_CASE("first adam step moves by the learning rate times the gradient sign") {
  MlpConfig mc;
  mc.widths = {2, 2};
  MlpParams p = MlpParams::init(mc, 1);
  MlpParams before = p;
  AdamState st = AdamState::init(p);
  std::vector<Matrix> grads;
  Matrix gw(2, 2);
  gw(0, 0) = 0.7;
  gw(0, 1) = -1.3;
  gw(1, 0) = 2.0;
  gw(1, 1) = -0.01;
  grads.push_back(gw);
  grads.push_back(Matrix(1, 2, 0.5));
  AdamConfig ac;
  adam_step(p, grads, st, ac, 0.01);
  // With fresh moments, m^ / (sqrt(v^) + eps) ~ sign(g).
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double delta = p.weights[0](i, j) - before.weights[0](i, j);
      double want = -0.01 * (gw(i, j) > 0 ? 1.0 : -1.0);
      CHECK(delta == doctest::Approx(want).epsilon(1e-5));
    }
  CHECK(st.t == 1);
}

TEST_CASE("adam rejects non-finite gradients") {
  MlpConfig mc;
  mc.widths = {2, 2};
  MlpParams p = MlpParams::init(mc, 1);
  AdamState st = AdamState::init(p);
  std::vector<Matrix> grads{Matrix(2, 2, 0.0), Matrix(1, 2, 0.0)};
  grads[0](0, 0) = std::nan("");
  CHECK_THROWS_AS(adam_step(p, grads, st, AdamConfig{}, 0.01), std::runtime_error);
}

TEST_CASE("lr schedule steps down at the decay epochs") {
  AdamConfig ac;
  ac.lr = 0.01;
  ac.decay_epochs = {15, 30, 45};
  ac.decay_factor = 0.3;
  CHECK(scheduled_lr(ac, 0) == 0.01);
  CHECK(scheduled_lr(ac, 14) == 0.01);
  CHECK(scheduled_lr(ac, 15) == doctest::Approx(0.003).epsilon(1e-12));
  CHECK(scheduled_lr(ac, 30) == doctest::Approx(0.0009).epsilon(1e-12));
  CHECK(scheduled_lr(ac, 45) == doctest::Approx(0.00027).epsilon(1e-12));
  CHECK(scheduled_lr(ac, 100) == doctest::Approx(0.00027).epsilon(1e-12));
}

TEST_CASE("checkpoints round-trip bitwise") {
  MlpConfig mc;
  MlpParams p = MlpParams::init(mc, 31);
  std::string dir = "test_model_ckpt";
  std::filesystem::create_directories(dir);
  save_checkpoint(p, dir, "0123456789abcdef", 31);
  MlpParams back = load_checkpoint(dir);
  CHECK(params_equal(p, back));
  std::filesystem::remove_all(dir);
}

TEST_CASE("training runs, logs and stays deterministic") {
  LabeledDataset train = gen_concentric_circles(3, 24, 0.02, 9);
  LabeledDataset eval = gen_concentric_circles(3, 24, 0.0, 10);
  LossConfig lc;
  lc.lambda = 0.0;
  lc.gamma = 0.0;
  lc.k = 4;
  lc.epsilon = 0.0;
  TrainConfig tc;
  tc.epochs = 3;
  tc.labels_per_batch = 3;
  tc.eval_every = 1;
  tc.seed = 123;
  TrainingReport a = train_mlp(train, eval, lc, tc);
  TrainingReport b = train_mlp(train, eval, lc, tc);
  CHECK(!a.aborted);
  CHECK(a.steps.size() == 18u);  // 72 points / 12 per batch, 3 epochs
  CHECK(a.steps.size() == b.steps.size());
  CHECK(params_equal(a.params, b.params));
  REQUIRE(!a.evals.empty());
  CHECK(a.evals.back().recall1 == b.evals.back().recall1);
  for (const auto& s : a.steps) {
    CHECK(std::isfinite(s.total));
    CHECK(s.lr == 0.01);
  }
}

TEST_CASE("a batch geometry the loss rejects on every batch aborts the epoch") {
  // All points identical: every neighborhood covers the batch, the complement
  // is empty, and with a weighted contextual term no batch can contribute.
  LabeledDataset train = gen_concentric_circles(2, 8, 0.0, 9);
  for (int i = 0; i < train.size(); ++i) {
    train.points(i, 0) = 1.0;
    train.points(i, 1) = 0.0;
  }
  LabeledDataset eval = gen_concentric_circles(2, 8, 0.0, 10);
  LossConfig lc;
  lc.k = 4;
  TrainConfig tc;
  tc.epochs = 2;
  tc.labels_per_batch = 2;
  tc.seed = 5;
  TrainingReport r = train_mlp(train, eval, lc, tc);
  CHECK(r.aborted);
  CHECK(r.steps.empty());
  CHECK(r.skipped_batches > 0);
  CHECK(r.abort_reason.find("no usable batch") != std::string::npos);
}
