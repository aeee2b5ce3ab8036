#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "cpt/grad_check.hpp"
#include "cpt/meta.hpp"

namespace {

using namespace cpt;

TEST(Softmax, HandValuesAndRowSums) {
  Matrix logits(2, 3);
  logits(0, 0) = 0.0; logits(0, 1) = 0.0; logits(0, 2) = 0.0;
  logits(1, 0) = 1.0; logits(1, 1) = 2.0; logits(1, 2) = 3.0;
  const Matrix z = softmax_probs(logits);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(z(0, j), 1.0 / 3.0, 1e-15);
  const double denom = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  EXPECT_NEAR(z(1, 0), std::exp(1.0) / denom, 1e-15);
  EXPECT_NEAR(z(1, 2), std::exp(3.0) / denom, 1e-15);
  for (std::size_t i = 0; i < 2; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < 3; ++j) sum += z(i, j);
    EXPECT_NEAR(sum, 1.0, 1e-15);
  }
}

TEST(Softmax, ShiftInvariantAndOverflowSafe) {
  Matrix a(1, 3), b(1, 3);
  a(0, 0) = 0.3; a(0, 1) = -1.2; a(0, 2) = 2.4;
  for (std::size_t j = 0; j < 3; ++j) b(0, j) = a(0, j) + 1000.0;
  const Matrix za = softmax_probs(a);
  const Matrix zb = softmax_probs(b);
  // the +1000 itself rounds the inputs, so exact equality is not available
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(za(0, j), zb(0, j), 1e-13);

  Matrix huge(1, 2);
  huge(0, 0) = 1e4; huge(0, 1) = -1e4;
  const Matrix zh = softmax_probs(huge);
  EXPECT_NEAR(zh(0, 0), 1.0, 1e-15);
  EXPECT_GE(zh(0, 1), 0.0);

  Matrix bad(1, 2);
  bad(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(softmax_probs(bad), numeric_error);
}

TEST(CrossEntropy, HandValuesAndGradient) {
  Matrix probs(2, 3);
  probs(0, 0) = 0.5; probs(0, 1) = 0.25; probs(0, 2) = 0.25;
  probs(1, 0) = 0.1; probs(1, 1) = 0.7;  probs(1, 2) = 0.2;
  const auto [loss, grad] = cross_entropy(probs, {0, 1});
  EXPECT_NEAR(loss, -std::log(0.5) - std::log(0.7), 1e-15);
  EXPECT_NEAR(grad(0, 0), 0.5 - 1.0, 1e-15);
  EXPECT_NEAR(grad(0, 1), 0.25, 1e-15);
  EXPECT_NEAR(grad(1, 1), 0.7 - 1.0, 1e-15);
  EXPECT_NEAR(grad(1, 2), 0.2, 1e-15);
  EXPECT_THROW(cross_entropy(probs, {0, 3}), config_error);
  EXPECT_THROW(cross_entropy(probs, {0, -1}), config_error);
  EXPECT_THROW(cross_entropy(probs, {0}), config_error);
}

EpisodeTask one_shot_task() {
  EpisodeTask task;
  task.class_list = {10, 20};  // global ids are irrelevant to the loss
  task.support = {{0, 0}, {1, 1}};
  task.query = {{2, 0}, {3, 1}};
  return task;
}

TEST(ProtoLoss, OneShotOneDimHandCase) {
  Matrix emb(4, 1);
  emb(0, 0) = 0.0;  // support class 0 -> prototype 0.0
  emb(1, 0) = 2.0;  // support class 1 -> prototype 2.0
  emb(2, 0) = 0.5;  // query class 0: logits (-0.25, -2.25)
  emb(3, 0) = 1.9;  // query class 1: logits (-3.61, -0.01)
  const EpisodeLoss out = proto_episode_loss(emb, one_shot_task());
  // summed cross-entropy of two binary softmaxes with logit gaps 2.0 and 3.6
  const double expect = std::log1p(std::exp(-2.0)) + std::log1p(std::exp(-3.6));
  EXPECT_NEAR(out.loss, expect, 1e-12);
  EXPECT_EQ(out.accuracy, 1.0);
  EXPECT_EQ(out.predicted, (std::vector<std::int32_t>{0, 1}));

  const EpisodeLoss weighted = proto_episode_loss(emb, one_shot_task(), 2.0);
  EXPECT_NEAR(weighted.loss, 2.0 * expect, 1e-12);
  for (std::size_t i = 0; i < emb.size(); ++i)
    EXPECT_NEAR(weighted.grad_embeddings.data()[i],
                2.0 * out.grad_embeddings.data()[i], 1e-12);
}

TEST(ProtoLoss, TieGoesToLowestLocalLabel) {
  Matrix emb(3, 1);
  emb(0, 0) = 0.0;
  emb(1, 0) = 2.0;
  emb(2, 0) = 1.0;  // equidistant from both prototypes
  EpisodeTask task;
  task.class_list = {5, 6};
  task.support = {{0, 0}, {1, 1}};
  task.query = {{2, 1}};
  const EpisodeLoss out = proto_episode_loss(emb, task);
  EXPECT_EQ(out.predicted, (std::vector<std::int32_t>{0}));
  EXPECT_EQ(out.accuracy, 0.0);
}

TEST(ProtoLoss, GradientMatchesFiniteDifferences) {
  Rng rng(31);
  const std::size_t nodes = 6, dim = 3;
  Matrix emb0(nodes, dim);
  for (double& v : emb0.data()) v = rng.normal();
  EpisodeTask task;
  task.class_list = {0, 1};
  task.support = {{0, 0}, {1, 0}, {2, 1}, {3, 1}};  // K = 2
  task.query = {{4, 0}, {5, 1}};

  const LossAndGradFn fn = [&](const std::vector<double>& flat) {
    const Matrix emb = Matrix::from_data(nodes, dim, flat);
    const EpisodeLoss out = proto_episode_loss(emb, task, 1.5);
    return std::make_pair(out.loss, out.grad_embeddings.data());
  };
  EXPECT_LT(grad_check(fn, emb0.data(), 1e-6), 1e-8);
}

// The adaptation objective scores the support against its own prototypes, so
// a node contributes through both the prototype and the query path. The
// accumulated gradient must still match finite differences exactly.
TEST(ProtoLoss, SupportAsQueryOverlapGradient) {
  Rng rng(32);
  const std::size_t nodes = 4, dim = 2;
  Matrix emb0(nodes, dim);
  for (double& v : emb0.data()) v = rng.normal();
  EpisodeTask task;
  task.class_list = {0, 1};
  task.support = {{0, 0}, {1, 0}, {2, 1}, {3, 1}};
  task.query = task.support;

  const LossAndGradFn fn = [&](const std::vector<double>& flat) {
    const Matrix emb = Matrix::from_data(nodes, dim, flat);
    const EpisodeLoss out = proto_episode_loss(emb, task);
    return std::make_pair(out.loss, out.grad_embeddings.data());
  };
  EXPECT_LT(grad_check(fn, emb0.data(), 1e-6), 1e-8);
}

TEST(ProtoLoss, InputValidation) {
  Matrix emb(3, 2);
  EpisodeTask task;
  EXPECT_THROW(proto_episode_loss(emb, task), config_error);  // empty
  task.class_list = {0, 1};
  task.support = {{0, 0}, {1, 1}};
  task.query = {{5, 0}};  // node beyond matrix
  EXPECT_THROW(proto_episode_loss(emb, task), config_error);
  task.query = {{2, 2}};  // local label beyond n_way
  EXPECT_THROW(proto_episode_loss(emb, task), config_error);
  task.query = {{2, 0}};
  task.support = {{0, 0}};  // class 1 has no support
  EXPECT_THROW(proto_episode_loss(emb, task), std::logic_error);
}

TEST(ComputePrototypes, MeansOfSupportRows) {
  Matrix emb(4, 2);
  emb(0, 0) = 1.0; emb(0, 1) = 2.0;
  emb(1, 0) = 3.0; emb(1, 1) = 4.0;
  emb(2, 0) = -1.0; emb(2, 1) = 0.0;
  EpisodeTask task;
  task.class_list = {7, 8};
  task.support = {{0, 0}, {1, 0}, {2, 1}};
  task.query = {{3, 0}};
  const Matrix p = compute_prototypes(emb, task);
  EXPECT_EQ(p(0, 0), 2.0);
  EXPECT_EQ(p(0, 1), 3.0);
  EXPECT_EQ(p(1, 0), -1.0);
  EXPECT_EQ(p(1, 1), 0.0);
}

TEST(InnerStep, ExactArithmeticAndPurity) {
  EncoderParams p;
  p.w1 = Matrix::from_data(2, 2, {1.0, 2.0, 3.0, 4.0});
  p.w2 = Matrix::from_data(2, 1, {5.0, 6.0});
  EncoderGrads g;
  g.w1 = Matrix::from_data(2, 2, {1.0, -1.0, 0.5, 0.0});
  g.w2 = Matrix::from_data(2, 1, {2.0, -4.0});
  const EncoderParams q = inner_step(p, g, 0.5);
  EXPECT_EQ(q.w1.data(), (std::vector<double>{0.5, 2.5, 2.75, 4.0}));
  EXPECT_EQ(q.w2.data(), (std::vector<double>{4.0, 8.0}));
  EXPECT_EQ(p.w1.data(), (std::vector<double>{1.0, 2.0, 3.0, 4.0}));  // untouched
}

TEST(OuterStep, SumsTaskGradients) {
  EncoderParams p;
  p.w1 = Matrix::from_data(1, 2, {1.0, 1.0});
  p.w2 = Matrix::from_data(2, 1, {0.0, 0.0});
  EncoderGrads g1{Matrix::from_data(1, 2, {1.0, 0.0}),
                  Matrix::from_data(2, 1, {2.0, 0.0})};
  EncoderGrads g2{Matrix::from_data(1, 2, {0.0, 3.0}),
                  Matrix::from_data(2, 1, {0.0, -2.0})};
  const EncoderParams q = outer_step(p, {g1, g2}, 0.1);
  EXPECT_NEAR(q.w1(0, 0), 0.9, 1e-15);
  EXPECT_NEAR(q.w1(0, 1), 0.7, 1e-15);
  EXPECT_NEAR(q.w2(0, 0), -0.2, 1e-15);
  EXPECT_NEAR(q.w2(1, 0), 0.2, 1e-15);
  EXPECT_THROW(outer_step(p, {}, 0.1), config_error);
}

}  // namespace
