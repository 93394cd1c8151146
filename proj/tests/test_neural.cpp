#include <gtest/gtest.h>

#include <cmath>

#include "forge/fixture.hpp"
#include "forge/neural.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace forge;
using namespace forge::test;

namespace {

MLPModel zero_model(std::vector<std::size_t> sizes, OutputMode mode) {
  auto m = MLPModel::create(sizes, mode, InitScheme::HeUniform, 0);
  for (auto& w : m.weights) w.setZero();
  for (auto& b : m.biases) b.setZero();
  return m;
}

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

std::pair<DataTable, DataTable> blobs(std::array<double, 3> proportions, std::size_t n, double sep, std::uint64_t seed) {
  BlobSpec spec;
  spec.proportions = proportions;
  spec.n = n;
  spec.separation = sep;
  spec.seed = seed;
  return split(make_blobs(spec), 0.75, seed + 1);
}

double recall(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth, std::int32_t cls) {
  double hit = 0, tot = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] != cls) continue;
    tot += 1;
    hit += pred[i] == cls ? 1 : 0;
  }
  return tot > 0 ? hit / tot : 0;
}

double accuracy(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth) {
  double hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += pred[i] == truth[i] ? 1 : 0;
  return hit / static_cast<double>(truth.size());
}

}  // namespace

TEST(Forward, ZeroSoftmaxIsUniform) {
  auto m = zero_model({4, 5, 3}, OutputMode::Softmax);
  Matrix p = forward(m, Matrix::Random(6, 4));
  for (Eigen::Index r = 0; r < p.rows(); ++r)
    for (Eigen::Index c = 0; c < 3; ++c) EXPECT_NEAR(p(r, c), 1.0 / 3, 1e-15);
}

TEST(Forward, IdentityLinear) {
  auto m = zero_model({3, 3}, OutputMode::Linear);
  m.weights[0].setIdentity();
  Matrix x = rows({{1, -2, 3}, {0.5, 0, -7}});
  EXPECT_EQ(forward(m, x), x);
}

TEST(Forward, HandBuilt222) {
  auto m = zero_model({2, 2, 2}, OutputMode::Softmax);
  m.weights[0] << 1, -1, 0.5, 2;
  m.biases[0] << 0, -1;
  m.weights[1] << 1, 1, -1, 0.5;
  m.biases[1] << 0.25, 0;
  Matrix x = rows({{1, 2}});
  // hidden pre = (1 - 2 + 0, 0.5 + 4 - 1) = (-1, 3.5) -> relu (0, 3.5)
  // out = (0 + 3.5 + 0.25, 0 + 1.75) = (3.75, 1.75)
  const double e0 = std::exp(3.75), e1 = std::exp(1.75);
  Matrix p = forward(m, x);
  EXPECT_NEAR(p(0, 0), e0 / (e0 + e1), 1e-12);
  EXPECT_NEAR(p(0, 1), e1 / (e0 + e1), 1e-12);
  EXPECT_THROW(forward(m, rows({{1, 2, 3}})), Error);
}

TEST(Forward, SoftmaxRowsAreDistributions) {
  auto m = MLPModel::create({6, 16, 3}, OutputMode::Softmax, InitScheme::GlorotUniform, 3);
  Matrix p = forward(m, Matrix::Random(50, 6) * 5);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-9);
    for (Eigen::Index c = 0; c < 3; ++c) {
      EXPECT_GT(p(r, c), 0.0);
      EXPECT_LT(p(r, c), 1.0);
    }
  }
}

TEST(Loss, Examples) {
  ClassWeights w;
  w.weights = {3, 4, 5};
  std::vector<std::int32_t> y{1};
  EXPECT_EQ(loss_weighted_sce(rows({{0, 1, 0}}), y, w), 0.0);
  std::vector<std::int32_t> y3{0, 1, 2};
  Matrix u = Matrix::Constant(3, 3, 1.0 / 3);
  EXPECT_NEAR(loss_weighted_sce(u, y3, ClassWeights{}), std::log(3.0), 1e-12);
  ClassWeights two;
  two.weights = {2, 2, 2};
  std::vector<std::int32_t> y0{0};
  EXPECT_NEAR(loss_weighted_sce(rows({{0.25, 0.5, 0.25}}), y0, two), 2 * std::log(4.0), 1e-12);
  std::vector<std::int32_t> bad{3};
  try {
    loss_weighted_sce(rows({{0.25, 0.5, 0.25}}), bad, two);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LabelOutOfRange);
  }
}

TEST(Backward, GradientCheck583) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto r = check_softmax_case({5, 8, 3}, 16, seed);
    EXPECT_LT(r.max_rel_error, 1e-5) << "seed " << seed;
    EXPECT_GT(r.checked, 0u);
  }
}

TEST(Backward, GradientCheckMatrix) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    EXPECT_LT(check_softmax_case({2, 4, 3}, 16, seed).max_rel_error, 1e-5);
    EXPECT_LT(check_softmax_case({5, 8, 8, 3}, 16, seed).max_rel_error, 1e-5);
    EXPECT_LT(check_q_case({2, 4, 3}, 16, seed).max_rel_error, 1e-5);
    EXPECT_LT(check_q_case({5, 8, 8, 3}, 16, seed).max_rel_error, 1e-5);
  }
  EXPECT_LT(check_softmax_case({10, 1200, 3}, 8, 1, 40).max_rel_error, 1e-5);
  EXPECT_LT(check_q_case({10, 1200, 3}, 8, 1, 40).max_rel_error, 1e-5);
}

TEST(Backward, L2TermGradient) {
  auto m = MLPModel::create({3, 5, 3}, OutputMode::Softmax, InitScheme::HeUniform, 4);
  Matrix x = Matrix::Random(10, 3);
  std::vector<std::int32_t> y{0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
  const double l2 = 0.3;
  auto lg = backward(m, x, y, ClassWeights{}, l2);
  auto loss = [&](const MLPModel& mm) { return backward(mm, x, y, ClassWeights{}, l2).loss; };
  EXPECT_LT(check_gradients(m, x, lg.grads, loss).max_rel_error, 1e-5);
}

TEST(Backward, ZeroWeightBiasGradientClosedForm) {
  auto m = zero_model({2, 3, 3}, OutputMode::Softmax);
  Matrix x = rows({{1, 2}, {3, 4}, {5, 6}, {7, 8}, {9, 1}, {2, 3}});
  std::vector<std::int32_t> y{0, 1, 2, 0, 1, 2};
  auto g = backward(m, x, y, ClassWeights{}).grads;
  // Softmax is uniform; each class is 1/3 of the labels, so the mean of
  // (1/3 - onehot) is zero in every component.
  for (Eigen::Index c = 0; c < 3; ++c) EXPECT_NEAR(g.biases[1](c), 0.0, 1e-15);
  std::vector<std::int32_t> y2{0, 0, 0, 0, 1, 2};
  auto g2 = backward(m, x, y2, ClassWeights{}).grads;
  EXPECT_NEAR(g2.biases[1](0), 1.0 / 3 - 4.0 / 6, 1e-15);
  EXPECT_NEAR(g2.biases[1](1), 1.0 / 3 - 1.0 / 6, 1e-15);
  EXPECT_NEAR(g2.biases[1](2), 1.0 / 3 - 1.0 / 6, 1e-15);
}

TEST(Backward, DuplicatedBatchSameGradient) {
  auto m = MLPModel::create({4, 6, 3}, OutputMode::Softmax, InitScheme::HeUniform, 8);
  Matrix x = Matrix::Random(5, 4);
  std::vector<std::int32_t> y{0, 2, 1, 1, 0};
  Matrix xx(10, 4);
  xx << x, x;
  std::vector<std::int32_t> yy = y;
  yy.insert(yy.end(), y.begin(), y.end());
  auto a = backward(m, x, y, ClassWeights{}).grads;
  auto b = backward(m, xx, yy, ClassWeights{}).grads;
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    EXPECT_LT((a.weights[l] - b.weights[l]).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((a.biases[l] - b.biases[l]).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Adam, FirstStepIsLrTimesSign) {
  auto m = MLPModel::create({3, 2}, OutputMode::Softmax, InitScheme::HeUniform, 1);
  auto before = m;
  auto g = Gradients::zeros_like(m);
  g.weights[0] << 0.5, -2, 3, -0.01, 4, -1;
  g.biases[0] << 1e-3, -7;
  auto s = AdamState::for_model(m);
  const double lr = 0.01;
  adam_step(m, g, s, lr);
  EXPECT_EQ(s.step, 1u);
  for (Eigen::Index i = 0; i < g.weights[0].size(); ++i) {
    const double d = m.weights[0].data()[i] - before.weights[0].data()[i];
    EXPECT_NEAR(d, -lr * (g.weights[0].data()[i] > 0 ? 1 : -1), 1e-6);
  }
  for (Eigen::Index i = 0; i < 2; ++i) {
    EXPECT_NEAR(m.biases[0](i) - before.biases[0](i), -lr * (g.biases[0](i) > 0 ? 1 : -1), 1e-4 * lr + 1e-6);
  }
}

TEST(Adam, ZeroGradientAndBoundedDrift) {
  auto m = MLPModel::create({3, 2}, OutputMode::Softmax, InitScheme::HeUniform, 1);
  auto before = m;
  auto s = AdamState::for_model(m);
  auto g = Gradients::zeros_like(m);
  g.weights[0].setConstant(0.7);
  adam_step(m, g, s, 0.01);
  const double m_after_one = s.m.weights[0](0, 0);
  auto zero = Gradients::zeros_like(m);
  auto mid = m;
  adam_step(m, zero, s, 0.01);
  EXPECT_LT(std::fabs(s.m.weights[0](0, 0)), std::fabs(m_after_one));
  // Zero gradient from a fresh state leaves parameters unchanged.
  auto fresh = before;
  auto s2 = AdamState::for_model(fresh);
  adam_step(fresh, zero, s2, 0.01);
  EXPECT_EQ(fresh.weights[0], before.weights[0]);
  EXPECT_EQ(fresh.biases[0], before.biases[0]);
  // Gradient then its negative: drift stays below 2 lr.
  auto p = before;
  auto s3 = AdamState::for_model(p);
  adam_step(p, g, s3, 0.01);
  auto neg = g;
  neg.weights[0] *= -1;
  adam_step(p, neg, s3, 0.01);
  EXPECT_LT((p.weights[0] - before.weights[0]).cwiseAbs().maxCoeff(), 2 * 0.01);
  (void)mid;
}

TEST(Predict, ArgmaxTies) {
  Matrix p = rows({{0.2, 0.5, 0.3}, {0.5, 0.5, 0.0}, {0.1, 0.45, 0.45}});
  EXPECT_EQ(neural_detail::argmax_row(p, 0), 1);
  EXPECT_EQ(neural_detail::argmax_row(p, 1), 0);
  EXPECT_EQ(neural_detail::argmax_row(p, 2), 1);
  auto m = MLPModel::create({4, 7, 3}, OutputMode::Softmax, InitScheme::HeUniform, 2);
  Matrix x = Matrix::Random(20, 4);
  auto batch = predict_classes(m, x);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Matrix one = x.row(r);
    EXPECT_EQ(predict_classes(m, one)[0], batch[static_cast<std::size_t>(r)]);
  }
  auto lin = MLPModel::create({4, 3}, OutputMode::Linear, InitScheme::HeUniform, 2);
  EXPECT_THROW(predict_classes(lin, x), Error);
}

TEST(Checkpoint, RoundTripAndRejects) {
  auto m = MLPModel::create({5, 7, 4, 3}, OutputMode::Linear, InitScheme::GlorotUniform, 9);
  auto bytes = serialize_model(m);
  EXPECT_EQ(bytes.size(), 8u + 4 + 4 + 4 * 8 + 4 + 8 * m.parameter_count());
  auto back = deserialize_model(bytes);
  EXPECT_EQ(back.layer_sizes, m.layer_sizes);
  EXPECT_EQ(back.output_mode, m.output_mode);
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    EXPECT_EQ(back.weights[l], m.weights[l]);
    EXPECT_EQ(back.biases[l], m.biases[l]);
  }
  auto dir = temp_dir("ckpt");
  save_model(dir / "m.ckpt", m);
  EXPECT_EQ(serialize_model(load_model(dir / "m.ckpt")), bytes);

  auto wrong = bytes;
  wrong[8] = 2;
  try {
    deserialize_model(wrong);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::VersionMismatch);
  }
  EXPECT_THROW(deserialize_model(bytes.substr(0, bytes.size() - 3)), Error);
  EXPECT_THROW(deserialize_model(bytes + "x"), Error);
  EXPECT_THROW(deserialize_model("NOTAMODEL"), Error);
}

TEST(Encoder, StandardizesFromTrainingOnly) {
  DataTable train({numerical("a", {1, 2, 3, 4}), nominal("g", {3, 1, 3, 2}), text("note", {"x", "y", "z", "w"}),
                   target({0, 1, 2, 0})});
  auto enc = FeatureEncoder::fit(train);
  EXPECT_EQ(enc.width(), 2u);
  Matrix x = enc.encode(train);
  EXPECT_NEAR(x.col(0).mean(), 0.0, 1e-12);
  EXPECT_NEAR(x.col(0).squaredNorm() / 4, 1.0, 1e-12);
  EXPECT_EQ(x(0, 1), 3.0);
  DataTable other({numerical("a", {10}), nominal("g", {2}), target({0})});
  EXPECT_NEAR(enc.encode(other)(0, 0), (10 - 2.5) / std::sqrt(1.25), 1e-12);

  auto oh = FeatureEncoder::fit(train, NominalEncoding::OneHot);
  EXPECT_EQ(oh.width(), 4u);
  Matrix xo = oh.encode(train);
  EXPECT_EQ(xo.row(0).tail(3), (Eigen::RowVector3d(0, 0, 1)));
  auto back = FeatureEncoder::deserialize(oh.serialize());
  EXPECT_EQ(back.encode(train), xo);
  EXPECT_EQ(back.serialize(), oh.serialize());

  DataTable missing({numerical("a", {1, kMissingValue}), target({0, 1})});
  try {
    FeatureEncoder::fit(missing);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingValuesPresent);
  }
}

TEST(Train, SeparableBlobs) {
  auto [train, val] = blobs({1.0 / 3, 1.0 / 3, 1.0 / 3}, 3000, 4.0, 5);
  TrainConfig cfg;
  cfg.batch_size = 64;
  cfg.max_epochs = 50;
  cfg.learning_rate = 1e-2;
  cfg.seed = 5;
  auto [clf, log] = train_supervised(train, val, {16, 16}, cfg);
  EXPECT_LE(log.epochs.size(), 50u);
  EXPECT_GE(accuracy(clf.predict(val), target_labels(val)), 0.95);
  // Returned model is the best-validation one.
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : log.epochs) best = std::min(best, e.val_loss);
  EXPECT_EQ(log.best_val_loss, best);
  Matrix vp = forward(clf.model, clf.encoder.encode(val));
  EXPECT_NEAR(loss_weighted_sce(vp, target_labels(val), cfg.class_weights), best, 1e-12);
}

TEST(Train, EarlyStoppingOnPlateau) {
  auto [train, val] = blobs({1.0 / 3, 1.0 / 3, 1.0 / 3}, 600, 2.0, 1);
  TrainConfig cfg;
  cfg.batch_size = 64;
  cfg.max_epochs = 100;
  cfg.learning_rate = 0.0;  // loss never moves after epoch 1
  cfg.early_stopping_patience = 5;
  cfg.optimizer = OptimizerKind::Sgd;
  auto log = train_supervised(train, val, {8}, cfg).second;
  EXPECT_TRUE(log.stopped_early);
  EXPECT_EQ(log.best_epoch, 1u);
  EXPECT_LE(log.epochs.size(), log.best_epoch + 5);
}

TEST(Train, BitReproducible) {
  auto [train, val] = blobs({0.6, 0.3, 0.1}, 800, 2.0, 2);
  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.max_epochs = 5;
  cfg.seed = 11;
  auto a = train_supervised(train, val, {12}, cfg);
  auto b = train_supervised(train, val, {12}, cfg);
  EXPECT_EQ(serialize_model(a.first.model), serialize_model(b.first.model));
  EXPECT_EQ(format_training_log(a.second), format_training_log(b.second));
}

TEST(Train, ClassWeightsRaiseRareRecall) {
  // 90/9/1 imbalance with overlapping classes.
  auto [train, test] = blobs({0.90, 0.09, 0.01}, 6000, 1.5, 3);
  TrainConfig cfg;
  cfg.batch_size = 128;
  cfg.max_epochs = 20;
  cfg.early_stopping_patience = 20;
  cfg.learning_rate = 5e-3;
  cfg.seed = 3;
  auto unit = train_supervised(train, test, {16}, cfg).first;
  cfg.class_weights = class_weights(class_counts(train));
  auto weighted = train_supervised(train, test, {16}, cfg).first;
  auto truth = target_labels(test);
  EXPECT_GT(recall(weighted.predict(test), truth, 2), recall(unit.predict(test), truth, 2));
}

TEST(Train, WeightScaleEquivariance) {
  // With plain SGD, scaling the weights by k and the learning rate by 1/k leaves
  // every update unchanged; powers of two keep it exact.
  auto [train, val] = blobs({0.7, 0.2, 0.1}, 600, 2.0, 4);
  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.max_epochs = 6;
  cfg.early_stopping_patience = 6;
  cfg.optimizer = OptimizerKind::Sgd;
  cfg.learning_rate = 0.05;
  cfg.class_weights.weights = {0.5, 1.5, 3.0};
  cfg.seed = 4;
  auto a = train_supervised(train, val, {10}, cfg).second;
  cfg.class_weights = cfg.class_weights.scaled(4.0);
  cfg.learning_rate /= 4.0;
  auto b = train_supervised(train, val, {10}, cfg).second;
  ASSERT_EQ(a.epochs.size(), b.epochs.size());
  for (std::size_t e = 0; e < a.epochs.size(); ++e) EXPECT_EQ(a.epochs[e].val_predictions, b.epochs[e].val_predictions);
}

TEST(LogReg, SeparableAndRegularized) {
  auto [train, val] = blobs({1.0 / 3, 1.0 / 3, 1.0 / 3}, 3000, 4.0, 6);
  TrainConfig cfg;
  cfg.batch_size = 64;
  cfg.max_epochs = 30;
  cfg.learning_rate = 1e-2;
  cfg.seed = 6;
  auto [clf, log] = train_logreg(train, val, cfg, 0.0);
  EXPECT_EQ(clf.model.n_layers(), 1u);
  EXPECT_GE(accuracy(clf.predict(val), target_labels(val)), 0.95);

  // Zero penalty is exactly the no-hidden-layer network.
  auto plain = train_supervised(train, val, {}, cfg).second;
  ASSERT_EQ(plain.epochs.size(), log.epochs.size());
  for (std::size_t e = 0; e < log.epochs.size(); ++e) EXPECT_EQ(plain.epochs[e].val_loss, log.epochs[e].val_loss);

  double prev = std::numeric_limits<double>::infinity();
  for (double l2 : {0.01, 0.1, 1.0}) {
    auto m = train_logreg(train, val, cfg, l2).first.model;
    const double norm = m.weights[0].norm();
    EXPECT_LT(norm, prev) << "l2 " << l2;
    prev = norm;
  }
}
