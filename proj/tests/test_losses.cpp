#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "ctxsim/losses.hpp"
#include "ctxsim/similarity.hpp"

using namespace ctxsim;

namespace {

// Eight points on the unit circle forming two angular clusters, with one
// point of the first label placed inside the second cluster's k-neighborhood
// range. With k=4 and eps=0 exactly two membership entries disagree with the
// labels, giving hand-computable losses.
Batch planted_mistake_batch(Tape& tape) {
  const double degs[8] = {0.0, 3.5, 6.0, 19.5, -15.0, -20.0, -23.0, -26.5};
  Matrix emb(8, 2);
  for (int i = 0; i < 8; ++i) {
    double rad = degs[i] * M_PI / 180.0;
    emb(i, 0) = std::cos(rad);
    emb(i, 1) = std::sin(rad);
  }
  return make_batch(tape.constant(emb), {0, 0, 0, 0, 1, 1, 1, 1});
}

Batch two_cluster_batch(Tape& tape, int per_cluster) {
  Matrix emb(2 * per_cluster, 2);
  for (int i = 0; i < per_cluster; ++i) emb(i, 0) = 1.0;
  for (int i = 0; i < per_cluster; ++i) emb(per_cluster + i, 1) = 1.0;
  std::vector<int> labels(2 * per_cluster, 0);
  for (int i = 0; i < per_cluster; ++i) labels[per_cluster + i] = 1;
  return make_batch(tape.constant(emb), labels);
}

Batch random_spread_batch(Tape& tape, uint64_t seed, bool requires_grad) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  Matrix emb(12, 2);
  std::vector<int> labels(12);
  for (int i = 0; i < 12; ++i) {
    int c = i / 4;
    double ang = c * 2.0 * M_PI / 3.0 + jitter(rng);
    emb(i, 0) = std::cos(ang);
    emb(i, 1) = std::sin(ang);
    labels[i] = c;
  }
  return make_batch(tape.leaf(emb, requires_grad), labels);
}

}  // namespace

TEST_CASE("contrastive loss averages hinge terms over strict violators") {
  Matrix s = Matrix::from_rows({{1.0, 0.5, 0.7}, {0.5, 1.0, 0.65}, {0.7, 0.65, 1.0}});
  Matrix y = Matrix::from_rows({{1, 1, 0}, {1, 1, 0}, {0, 0, 1}});
  Tape tape;
  Tensor loss = contrastive_loss(tape.constant(s), y, 0.75, 0.6);
  // positive side: two entries at 0.25 each over 2 violators; negative side:
  // (0.1 + 0.1 + 0.05 + 0.05) / 4
  CHECK(loss.value()(0, 0) == doctest::Approx(0.325).epsilon(1e-12));
}

TEST_CASE("similarities exactly at the margins contribute nothing") {
  Matrix s = Matrix::from_rows({{1.0, 0.75, 0.6}, {0.75, 1.0, 0.6}, {0.6, 0.6, 1.0}});
  Matrix y = Matrix::from_rows({{1, 1, 0}, {1, 1, 0}, {0, 0, 1}});
  Tape tape;
  CHECK(contrastive_loss(tape.constant(s), y, 0.75, 0.6).value()(0, 0) == 0.0);
}

TEST_CASE("contrastive gradient splits by violator counts") {
  Matrix s = Matrix::from_rows({{1.0, 0.5, 0.7}, {0.5, 1.0, 0.65}, {0.7, 0.65, 1.0}});
  Matrix y = Matrix::from_rows({{1, 1, 0}, {1, 1, 0}, {0, 0, 1}});
  Tape tape;
  Tensor st = tape.leaf(s, true);
  tape.backward(contrastive_loss(st, y, 0.75, 0.6));
  CHECK(st.grad()(0, 1) == -0.5);   // hinge slope -1 over 2 positive violators
  CHECK(st.grad()(0, 2) == 0.25);   // slope +1 over 4 negative violators
  CHECK(st.grad()(0, 0) == 0.0);    // diagonal never participates
}

TEST_CASE("regularizer value and gradient") {
  Matrix s = Matrix::from_rows({{1.0, 0.5}, {0.5, 1.0}});
  Tape tape;
  Tensor st = tape.leaf(s, true);
  Tensor reg = similarity_regularizer(st, 0.25);
  CHECK(reg.value()(0, 0) == 0.25);  // (0.75 - 0.25)^2
  tape.backward(reg);
  // 2 (mean - s_tilde) / n^2 at every entry, diagonal included
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(st.grad()(i, j) == 0.25);
}

TEST_CASE("planted mistakes give exact indicator and intersection losses") {
  Tape tape;
  Batch b = planted_mistake_batch(tape);
  LossConfig cfg;
  cfg.k = 4;
  cfg.epsilon = 0.0;
  CHECK(loss_indicator_mse(b, cfg).value()(0, 0) == 2.0 / 64.0);
  CHECK(loss_intersection_mse(b, cfg).value()(0, 0) == 11.0 / 512.0);
}

TEST_CASE("perfect geometry zeroes every component exactly") {
  Tape tape;
  Batch b = two_cluster_batch(tape, 2);
  LossConfig cfg;
  cfg.k = 2;
  cfg.epsilon = 0.0;
  cfg.s_tilde = 0.5;  // mean of S is exactly 0.5 for two orthogonal clusters

  LossBreakdown parts = combined_loss(b, cfg);
  CHECK(parts.context.value()(0, 0) == 0.0);
  CHECK(parts.contrast.value()(0, 0) == 0.0);
  CHECK(parts.reg.value()(0, 0) == 0.0);
  CHECK(parts.total.value()(0, 0) == 0.0);
  CHECK(loss_indicator_mse(b, cfg).value()(0, 0) == 0.0);
  CHECK(loss_intersection_mse(b, cfg).value()(0, 0) == 0.0);
}

TEST_CASE("weightless combined loss equals the contrastive loss bitwise") {
  Tape tape;
  Batch b = random_spread_batch(tape, 99, false);
  LossConfig cfg;
  cfg.lambda = 0.0;
  cfg.gamma = 0.0;
  cfg.k = 4;
  cfg.epsilon = 0.0;
  LossBreakdown parts = combined_loss(b, cfg);
  Tensor plain = contrastive_loss(pairwise_cosine(b.f), b.y, cfg.delta_plus, cfg.delta_minus);
  CHECK(parts.total.value()(0, 0) == plain.value()(0, 0));
}

TEST_CASE("a rejected context batch only fails weighted objectives") {
  Tape tape;
  // k equal to the batch size leaves every neighborhood complement empty.
  Batch b = two_cluster_batch(tape, 2);
  LossConfig cfg;
  cfg.k = 4;
  cfg.epsilon = 0.0;

  cfg.lambda = 0.4;
  CHECK_THROWS_AS(combined_loss(b, cfg), std::invalid_argument);

  cfg.lambda = 0.0;
  LossBreakdown parts = combined_loss(b, cfg);
  CHECK(std::isnan(parts.context.value()(0, 0)));
  CHECK(std::isfinite(parts.total.value()(0, 0)));
}

TEST_CASE("every variant builds and differentiates") {
  const char* names[] = {"full",          "indicator_mse",    "indicator_mse_sigmoid",
                         "intersection_mse", "skip_intersection", "min_and",
                         "sigmoid_all",   "drop_complement",  "no_stop_gradient",
                         "detach_reciprocal"};
  for (const char* name : names) {
    CAPTURE(name);
    Tape tape;
    Batch b = random_spread_batch(tape, 1234, true);
    LossConfig cfg;
    cfg.k = 4;
    cfg.epsilon = 0.0;
    cfg.variant = parse_loss_variant(name);
    LossBreakdown parts = combined_loss(b, cfg);
    CHECK(std::isfinite(parts.total.value()(0, 0)));
    tape.backward(parts.total);
    const Matrix& g = b.f.grad();
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) CHECK(std::isfinite(g(i, j)));
  }
}

TEST_CASE("variant names round-trip and unknown names are rejected") {
  for (int v = 0; v <= static_cast<int>(LossVariant::DetachReciprocal); ++v) {
    LossVariant variant = static_cast<LossVariant>(v);
    CHECK(parse_loss_variant(loss_variant_name(variant)) == variant);
  }
  CHECK_THROWS_AS(parse_loss_variant("nonsense"), std::invalid_argument);
}

TEST_CASE("loss config validation rejects bad weights") {
  LossConfig cfg;
  cfg.lambda = 0.8;
  cfg.gamma = 0.3;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = LossConfig{};
  cfg.delta_minus = 0.9;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = LossConfig{};
  cfg.k = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = LossConfig{};
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK_NOTHROW(LossConfig{}.validate());
}
