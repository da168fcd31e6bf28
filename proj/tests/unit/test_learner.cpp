#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cflsim/dataset.hpp"
#include "cflsim/learner.hpp"
#include "helpers.hpp"

using namespace cflsim;
using testing_support::Gen;

namespace {

ModelShape logistic(int d, int c) { return ModelShape{ModelKind::logistic, d, c, 0}; }
ModelShape mlp(int d, int c, int h) { return ModelShape{ModelKind::mlp, d, c, h}; }

Samples random_samples(Gen& g, int n, int d, int c, double scale = 1.0) {
  Samples s;
  s.features = d;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) s.x.push_back(scale * g.normal());
    s.y.push_back(g.integer(0, c - 1));
  }
  return s;
}

ModelParams random_model(Gen& g, const ModelShape& shape, double scale = 0.5) {
  ModelParams m{shape, std::vector<double>(shape.num_params())};
  for (auto& w : m.weights) w = scale * g.normal();
  return m;
}

// Logits computed directly from the documented layout.
std::vector<double> oracle_logits(const ModelParams& m, std::span<const double> x) {
  const auto& s = m.shape;
  const auto d = static_cast<std::size_t>(s.features), c = static_cast<std::size_t>(s.classes);
  std::vector<double> out(c);
  if (s.kind == ModelKind::logistic) {
    for (std::size_t k = 0; k < c; ++k) {
      double z = m.weights[c * d + k];
      for (std::size_t j = 0; j < d; ++j) z += m.weights[k * d + j] * x[j];
      out[k] = z;
    }
    return out;
  }
  const auto h = static_cast<std::size_t>(s.hidden);
  const double* w1 = m.weights.data();
  const double* b1 = w1 + h * d;
  const double* w2 = b1 + h;
  const double* b2 = w2 + c * h;
  std::vector<double> a(h);
  for (std::size_t u = 0; u < h; ++u) {
    double z = b1[u];
    for (std::size_t j = 0; j < d; ++j) z += w1[u * d + j] * x[j];
    a[u] = std::tanh(z);
  }
  for (std::size_t k = 0; k < c; ++k) {
    double z = b2[k];
    for (std::size_t u = 0; u < h; ++u) z += w2[k * h + u] * a[u];
    out[k] = z;
  }
  return out;
}

ClientData client_from(Samples train, Samples test, int id = 0) {
  ClientData c;
  c.client_id = id;
  c.train = std::move(train);
  c.test = std::move(test);
  return c;
}

}  // namespace

TEST(InitModel, LogisticIsZero) {
  const auto m = init_model(logistic(2, 2), 1);
  EXPECT_EQ(m.weights, std::vector<double>(6, 0.0));
}

TEST(InitModel, MlpDeterministicInSeed) {
  const auto a = init_model(mlp(3, 4, 5), 9), b = init_model(mlp(3, 4, 5), 9);
  const auto c = init_model(mlp(3, 4, 5), 10);
  EXPECT_EQ(a, b);
  EXPECT_NE(a.weights, c.weights);
  EXPECT_EQ(a.weights.size(), mlp(3, 4, 5).num_params());
}

TEST(ModelShape, ParamCountsAndValidation) {
  EXPECT_EQ(logistic(16, 8).num_params(), 8u * 17u);
  EXPECT_EQ(mlp(4, 3, 5).num_params(), 5u * 4u + 5u + 3u * 5u + 3u);
  EXPECT_THROW(logistic(0, 2).validate(), std::invalid_argument);
  EXPECT_THROW(logistic(2, 1).validate(), std::invalid_argument);
  EXPECT_THROW(mlp(2, 2, 0).validate(), std::invalid_argument);
  for (const auto& s : {logistic(3, 4), mlp(3, 4, 6)}) EXPECT_EQ(ModelShape::from_layer_dims(s.layer_dims()), s);
}

TEST(LossGradient, ZeroWeightsGiveLogTwo) {
  Gen g(1);
  const auto data = random_samples(g, 17, 3, 2);
  const auto lg = loss_and_gradient(init_model(logistic(3, 2), 0), data);
  EXPECT_NEAR(lg.loss, std::log(2.0), 1e-15);
  EXPECT_EQ(lg.grad.size(), 8u);
}

TEST(LossGradient, MatchesCentralFiniteDifferences) {
  Gen g(2);
  const double h = 1e-5;
  for (int trial = 0; trial < 24; ++trial) {
    const int d = g.integer(1, 5), c = g.integer(2, 4);
    const auto shape = trial % 2 == 0 ? logistic(d, c) : mlp(d, c, g.integer(1, 4));
    auto m = random_model(g, shape);
    const auto data = random_samples(g, g.integer(1, 12), d, c);
    const auto lg = loss_and_gradient(m, data);
    for (std::size_t i = 0; i < m.weights.size(); ++i) {
      const double w = m.weights[i];
      m.weights[i] = w + h;
      const double up = mean_loss(m, data);
      m.weights[i] = w - h;
      const double down = mean_loss(m, data);
      m.weights[i] = w;
      const double fd = (up - down) / (2 * h);
      EXPECT_LT(std::abs(fd - lg.grad[i]), 1e-6 * std::max(1.0, std::abs(fd)))
          << "trial " << trial << " param " << i;
    }
  }
}

TEST(LossGradient, DuplicatingTheBatchChangesNothing) {
  Gen g(3);
  const auto m = random_model(g, logistic(3, 3));
  const auto data = random_samples(g, 9, 3, 3);
  std::vector<std::size_t> once(9), twice;
  std::iota(once.begin(), once.end(), std::size_t{0});
  for (auto i : once) {
    twice.push_back(i);
    twice.push_back(i);
  }
  const auto a = loss_and_gradient(m, data, once), b = loss_and_gradient(m, data, twice);
  EXPECT_NEAR(a.loss, b.loss, 1e-14);
  for (std::size_t i = 0; i < a.grad.size(); ++i) EXPECT_NEAR(a.grad[i], b.grad[i], 1e-14);
}

TEST(LossGradient, RejectsMismatchAndEmpty) {
  Gen g(4);
  const auto data = random_samples(g, 4, 3, 2);
  EXPECT_THROW(loss_and_gradient(init_model(logistic(2, 2), 0), data), std::invalid_argument);
  EXPECT_THROW(loss_and_gradient(init_model(logistic(3, 2), 0), data, {}), std::invalid_argument);
}

TEST(LossGradient, FiniteForLargeInputs) {
  Gen g(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto shape = trial % 2 ? logistic(4, 3) : mlp(4, 3, 3);
    const auto m = random_model(g, shape, 1.0);
    const auto data = random_samples(g, 8, 4, 3, 1e3 / 3);
    const auto lg = loss_and_gradient(m, data);
    EXPECT_TRUE(std::isfinite(lg.loss));
    EXPECT_GE(lg.loss, 0.0);
    EXPECT_TRUE(all_finite(lg.grad));
    auto client = client_from(data, data);
    TrainOptions o{2, 4, 1.0};
    const auto u = local_train(m, client, o, 1);
    EXPECT_TRUE(all_finite(u.delta));
  }
}

TEST(LocalTrain, RejectsNonPositiveLearningRate) {
  Gen g(6);
  const auto c = client_from(random_samples(g, 10, 2, 2), random_samples(g, 5, 2, 2));
  EXPECT_THROW(local_train(init_model(logistic(2, 2), 0), c, {1, 5, 0.0}, 1), std::invalid_argument);
  EXPECT_THROW(local_train(init_model(logistic(2, 2), 0), c, {1, 5, -1.0}, 1), std::invalid_argument);
}

TEST(LocalTrain, SingleFullBatchStepMatchesGradient) {
  Gen g(7);
  const auto c = client_from(random_samples(g, 30, 3, 3), random_samples(g, 5, 3, 3));
  const auto m = init_model(logistic(3, 3), 0);
  const TrainOptions o{1, 30, 0.1};
  const auto u = local_train(m, c, o, 99);
  const auto batch = minibatches(c, 30, 1, 99).front();
  const auto lg = loss_and_gradient(m, c.train, batch);
  for (std::size_t i = 0; i < u.delta.size(); ++i) EXPECT_EQ(u.delta[i], -0.1 * lg.grad[i]);
  const auto full = loss_and_gradient(m, c.train);
  for (std::size_t i = 0; i < u.delta.size(); ++i) EXPECT_NEAR(u.delta[i], -0.1 * full.grad[i], 1e-15);
  EXPECT_EQ(u.num_samples, 30);
  EXPECT_EQ(u.loss_before, full.loss);
}

TEST(LocalTrain, ReducesLossOnSeparableBlobs) {
  DatasetSpec s;
  s.clients = 2;
  s.latent_clusters = 1;
  s.classes = 2;
  s.labels_per_client = 2;
  s.features = 2;
  s.class_separation = 6.0;
  s.samples_min = s.samples_max = 100;
  const auto d = generate(s, 3);
  const auto u = local_train(init_model(logistic(2, 2), 0), d.clients[0], {10, 10, 0.05}, 4);
  EXPECT_LT(u.loss_after, u.loss_before);
}

TEST(LocalTrain, DeterministicInSeed) {
  Gen g(8);
  const auto c = client_from(random_samples(g, 40, 3, 3), random_samples(g, 5, 3, 3));
  const auto m = init_model(mlp(3, 3, 4), 2);
  const TrainOptions o{3, 7, 0.05};
  EXPECT_EQ(local_train(m, c, o, 5).delta, local_train(m, c, o, 5).delta);
}

TEST(Evaluate, ZeroModelPredictsClassZero) {
  Samples t;
  t.features = 1;
  t.x = {1, 2, 3, 4};
  t.y = {0, 1, 0, 1};
  EXPECT_DOUBLE_EQ(evaluate(init_model(logistic(1, 2), 0), t), 0.5);
  t.y = {0, 0, 0, 1};
  EXPECT_DOUBLE_EQ(evaluate(init_model(logistic(1, 2), 0), t), 0.75);
}

TEST(Evaluate, MemorisingModelScoresOne) {
  Samples t;
  t.features = 2;
  t.x = {0.5, -1.0};
  t.y = {2};
  ModelParams m = init_model(logistic(2, 3), 0);
  m.weights[3 * 2 + 2] = 5.0;  // bias of class 2
  EXPECT_DOUBLE_EQ(evaluate(m, t), 1.0);
}

TEST(Evaluate, MatchesBruteForceRecount) {
  Gen g(9);
  for (int trial = 0; trial < 10; ++trial) {
    const auto shape = trial % 2 ? logistic(3, 4) : mlp(3, 4, 5);
    const auto m = random_model(g, shape);
    const auto t = random_samples(g, 50, 3, 4);
    int correct = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto z = oracle_logits(m, t.row(i));
      const int pred = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
      EXPECT_EQ(predict(m, t.row(i)), pred);
      correct += pred == t.y[i];
    }
    EXPECT_DOUBLE_EQ(evaluate(m, t), correct / 50.0);
  }
}

TEST(Evaluate, RejectsEmptyTestSet) {
  Samples t;
  t.features = 2;
  EXPECT_THROW(evaluate(init_model(logistic(2, 2), 0), t), std::invalid_argument);
}

TEST(FedAvg, SingleUpdateIsIdentityWeight) {
  Gen g(10);
  const auto base = random_model(g, logistic(2, 2));
  ModelUpdate u{0, g.vec(6), 17, 0, 0};
  const auto out = fedavg(base, std::vector{u});
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(out.weights[i], base.weights[i] + u.delta[i]);
}

TEST(FedAvg, AntipodalUpdatesCancel) {
  Gen g(11);
  const auto base = random_model(g, logistic(2, 2));
  const auto d = g.vec(6);
  std::vector<double> neg(d);
  for (auto& v : neg) v = -v;
  const auto out = fedavg(base, std::vector{ModelUpdate{0, d, 5, 0, 0}, ModelUpdate{1, neg, 5, 0, 0}});
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(out.weights[i], base.weights[i], 1e-15);
}

TEST(FedAvg, SampleCountWeighting) {
  const auto base = init_model(logistic(1, 2), 0);  // 4 params
  const std::vector<double> u{0.5, -1.0, 2.0, 0.25};
  std::vector<double> four_u(u);
  for (auto& v : four_u) v *= 4;
  const auto out = fedavg(base, std::vector{ModelUpdate{0, four_u, 1, 0, 0},
                                            ModelUpdate{1, std::vector<double>(4, 0.0), 3, 0, 0}});
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(out.weights[i], u[i]);
}

TEST(FedAvg, PermutationInvariantAndWeightsSumToOne) {
  Gen g(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto base = random_model(g, logistic(3, 2));
    std::vector<ModelUpdate> ups;
    const int n = g.integer(1, 8);
    for (int k = 0; k < n; ++k) ups.push_back({k, g.vec(8), g.integer(1, 50), 0, 0});
    auto shuffled = ups;
    std::shuffle(shuffled.begin(), shuffled.end(), g.raw());
    const auto a = fedavg(base, ups), b = fedavg(base, shuffled);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(a.weights[i], b.weights[i], 1e-13);
    // identical deltas: a convex combination returns that delta
    auto same = ups;
    for (auto& u : same) u.delta = ups[0].delta;
    const auto c = fedavg(base, same);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(c.weights[i], base.weights[i] + ups[0].delta[i], 1e-13);
  }
}

TEST(FedAvg, RejectsEmptyAndMismatched) {
  const auto base = init_model(logistic(2, 2), 0);
  EXPECT_THROW(fedavg(base, std::vector<ModelUpdate>{}), std::invalid_argument);
  EXPECT_THROW(fedavg(base, std::vector{ModelUpdate{0, std::vector<double>(5), 1, 0, 0}}),
               std::invalid_argument);
}

TEST(Serialize, RoundTripAndSize) {
  Gen g(13);
  for (const auto& shape : {logistic(5, 3), mlp(4, 3, 7)}) {
    const auto m = random_model(g, shape);
    const auto bytes = serialize(m);
    EXPECT_EQ(bytes.size() * 8, serialized_size_bits(shape));
    EXPECT_EQ(deserialize(bytes), m);
  }
  std::vector<std::uint8_t> junk{1, 2, 3};
  EXPECT_THROW(deserialize(junk), std::invalid_argument);
}
