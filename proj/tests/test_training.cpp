#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "meltgraph/error.hpp"
#include "meltgraph/training.hpp"
#include "support/helpers.hpp"

using namespace meltgraph;
using namespace testing_support;

namespace {

// Plain scalar Adam, written out independently of adam_update.
struct ScalarAdam {
  double m = 0, v = 0;
  int t = 0;
  double step(double theta, double g, double lr = 1e-3, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return theta - lr * mh / (std::sqrt(vh) + eps);
  }
};

ScanGraph linear_target_graph(std::uint64_t seed) {
  auto layer = tiny_layer(1.0, 0.4, seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (auto& v : layer.features.data) v += 0.1 * normal(rng);
  const double w[4][4] = {{1.0, 0.5, -0.3, 2.0}, {0.2, -1.0, 0.4, 0.1}, {-0.7, 0.3, 1.5, 0.0}, {0.4, 0.8, -0.2, 1.1}};
  for (std::size_t i = 0; i < layer.size(); ++i)
    for (std::size_t c = 0; c < 4; ++c) {
      double y = 0;
      for (std::size_t f = 0; f < 4; ++f) y += layer.features(i, f) * w[f][c];
      layer.labels(i, c) = y;
    }
  return build_graph(std::move(layer));
}

}  // namespace

TEST(MseLoss, Examples) {
  Tape tape(false);
  const auto a = random_tensor({3, 2}, 1, false);
  EXPECT_EQ(mse_loss(tape, a, a).item(), 0.0);
  const auto b = Tensor::from_values({3, 2}, {a[0] + 1, a[1] + 1, a[2] + 1, a[3] + 1, a[4] + 1, a[5] + 1});
  EXPECT_NEAR(mse_loss(tape, b, a).item(), 1.0, 1e-15);

  const auto c = random_tensor({3, 2}, 2, false);
  double expected = 0;
  for (std::size_t i = 0; i < 6; ++i) expected += (a[i] - c[i]) * (a[i] - c[i]);
  EXPECT_DOUBLE_EQ(mse_loss(tape, a, c).item(), expected / 6);
  EXPECT_THROW(mse_loss(tape, a, random_tensor({2, 3}, 3, false)), DimensionError);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  std::vector<double> theta = {0.5, -2.0};
  const std::vector<double> g = {0.0, 0.0};
  AdamMoments moments;
  for (std::size_t t = 1; t <= 5; ++t) adam_update(theta, g, moments, t, TrainConfig{});
  EXPECT_EQ(theta, (std::vector<double>{0.5, -2.0}));
}

TEST(Adam, FirstStepIsLearningRate) {
  std::vector<double> theta = {0.0};
  AdamMoments moments;
  adam_update(theta, std::vector<double>{1.0}, moments, 1, TrainConfig{});
  EXPECT_NEAR(theta[0], -1e-3 / (1 + 1e-8), 1e-18);
}

TEST(Adam, TwoStepsMatchScalarReference) {
  std::vector<double> theta = {0.3, -0.1, 2.0};
  const std::vector<std::vector<double>> grads = {{0.5, -3.0, 1e-4}, {-0.2, 1.0, 7.0}};
  AdamMoments moments;
  std::vector<ScalarAdam> ref(3);
  std::vector<double> expected = theta;
  for (std::size_t t = 0; t < 2; ++t) {
    adam_update(theta, grads[t], moments, t + 1, TrainConfig{});
    for (std::size_t i = 0; i < 3; ++i) expected[i] = ref[i].step(expected[i], grads[t][i]);
  }
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(theta[i], expected[i], 1e-15);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  ModelSpec spec;
  spec.kind = ModelKind::kFc;
  spec.hidden_dim = 4;
  auto params = init_params(spec, 0);
  const auto before = to_vector(params.get("head.w"));
  AdamOptimizer opt(params, TrainConfig{});
  params.get("head.w").mutable_grad()[2] = std::nan("");
  try {
    opt.step(params);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("head.w"), std::string::npos) << e.what();
  }
  EXPECT_EQ(to_vector(params.get("head.w")), before);
  EXPECT_EQ(opt.steps_taken(), 0u);
}

TEST(TrainConfig, RejectsBadHyperparameters) {
  TrainConfig c;
  c.beta1 = 1.0;
  EXPECT_THROW(c.validate(), InvalidSpec);
  c = TrainConfig{};
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), InvalidSpec);
}

TEST(Standardizer, GaussianSampleHasUnitStatistics) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  Matrix y(20000, 3);
  for (auto& v : y.data) v = normal(rng);
  const std::vector<Matrix> layers = {y};
  const auto s = Standardizer::fit(layers);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(s.mean[c], 0.0, 0.03);
    EXPECT_NEAR(s.stddev[c], 1.0, 0.03);
  }
}

TEST(Standardizer, StandardizedTrainingDataIsUnitAndRoundTrips) {
  const auto a = tiny_layer(1.0, 0.4, 1).labels;
  const auto b = tiny_layer(1.0, 0.4, 2).labels;
  const std::vector<Matrix> layers = {a, b};
  const auto s = Standardizer::fit(layers);
  std::vector<double> sum(4, 0), sq(4, 0);
  for (const auto& m : layers) {
    const auto z = s.apply(m);
    for (std::size_t r = 0; r < z.rows; ++r)
      for (std::size_t c = 0; c < 4; ++c) {
        sum[c] += z(r, c);
        sq[c] += z(r, c) * z(r, c);
      }
    const auto back = s.invert(z);
    for (std::size_t k = 0; k < m.data.size(); ++k) EXPECT_NEAR(back.data[k], m.data[k], 1e-12);
  }
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_NEAR(sum[c] / 200, 0.0, 1e-10);
    EXPECT_NEAR(sq[c] / 200, 1.0, 1e-10);
  }
}

TEST(Standardizer, ConstantChannelIsNamed) {
  Matrix y = tiny_layer(1.0, 0.4, 1).labels;
  for (std::size_t r = 0; r < y.rows; ++r) y(r, kIntensity) = 3.0;
  const std::vector<Matrix> layers = {y};
  try {
    Standardizer::fit(layers);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("intensity"), std::string::npos) << e.what();
  }
}

TEST(Train, RefusesAnomalousLayers) {
  auto layer = tiny_layer(1.0, 0.4, 1);
  layer.anomaly_mask[17] = 1;
  const std::vector<ScanGraph> graphs = {build_graph(std::move(layer))};
  ModelSpec spec;
  spec.kind = ModelKind::kFc;
  EXPECT_THROW(train(spec, graphs, TrainConfig{}), DataContractError);
}

TEST(Train, ZeroEpochsReturnsInitialization) {
  const std::vector<ScanGraph> graphs = {build_graph(tiny_layer(1.0, 0.4, 1))};
  ModelSpec spec;
  spec.hidden_dim = 8;
  TrainConfig config;
  config.epochs = 0;
  config.seed = 12;
  const auto model = train(spec, graphs, config);
  EXPECT_TRUE(model.loss_history.empty());
  const auto init = init_params(spec, 12);
  auto it = init.begin();
  for (const auto& [name, t] : model.params) {
    EXPECT_EQ(name, it->first);
    EXPECT_EQ(to_vector(t), to_vector(it->second));
    ++it;
  }
}

TEST(Train, LinearTargetIsFitByLinearHead) {
  const std::vector<ScanGraph> graphs = {linear_target_graph(3)};
  ModelSpec spec;
  spec.kind = ModelKind::kFc;
  spec.n_message_layers = 0;
  TrainConfig config;
  config.epochs = 500;
  config.learning_rate = 0.05;
  const auto model = train(spec, graphs, config);
  EXPECT_LT(model.loss_history.back(), 1e-4);
  EXPECT_LT(evaluate_loss(model, graphs[0]), 1e-4);
}

TEST(Train, LinearAutoencoderFitsRankTwoData) {
  auto layer = tiny_layer(1.0, 0.4, 5);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal;
  const double mix[8][2] = {{1, 0}, {0, 1}, {1, 1}, {0.5, -1}, {2, 0.3}, {-1, 1}, {0.2, 0.2}, {1, -2}};
  for (std::size_t i = 0; i < layer.size(); ++i) {
    const double a = normal(rng), b = normal(rng);
    for (std::size_t c = 0; c < 4; ++c) layer.features(i, c) = mix[c][0] * a + mix[c][1] * b;
    for (std::size_t c = 0; c < 4; ++c) layer.labels(i, c) = mix[c + 4][0] * a + mix[c + 4][1] * b;
  }
  const std::vector<ScanGraph> graphs = {build_graph(std::move(layer))};
  ModelSpec spec;
  spec.kind = ModelKind::kAutoencoder;
  spec.hidden_dim = 8;
  spec.bottleneck_dim = 2;
  spec.activation = Activation::kIdentity;
  TrainConfig config;
  config.epochs = 1500;
  config.learning_rate = 0.01;
  const auto model = train(spec, graphs, config);
  EXPECT_LT(model.loss_history.back(), 1e-3);
}

TEST(Train, DeterministicAndDecreasingOnSyntheticLayer) {
  LayerSpec layer_spec;
  layer_spec.seed = 21;
  const std::vector<ScanGraph> graphs = {
      build_graph(generate_melt_signal(generate_scan_path(layer_spec), layer_spec))};
  ModelSpec spec;
  spec.kind = ModelKind::kFc;
  spec.hidden_dim = 16;
  TrainConfig config;
  config.epochs = 150;
  config.learning_rate = 1e-2;
  config.seed = 2;
  const auto a = train(spec, graphs, config);
  const auto b = train(spec, graphs, config);
  EXPECT_EQ(a.loss_history, b.loss_history);
  ASSERT_EQ(a.loss_history.size(), 150u);
  auto window_mean = [&](std::size_t start) {
    double s = 0;
    for (std::size_t e = start; e < start + 50; ++e) s += a.loss_history[e];
    return s / 50;
  };
  EXPECT_GE(window_mean(0), window_mean(50));
  EXPECT_GE(window_mean(50), window_mean(100));
}

TEST(Train, GraphsPerStepControlsUpdateCount) {
  const std::vector<ScanGraph> graphs = {build_graph(tiny_layer(1.0, 0.4, 1)), build_graph(tiny_layer(1.0, 0.4, 2)),
                                         build_graph(tiny_layer(1.0, 0.4, 3))};
  ModelSpec spec;
  spec.kind = ModelKind::kFc;
  spec.hidden_dim = 4;
  TrainConfig config;
  config.epochs = 2;
  const auto one = train(spec, graphs, config);
  config.graphs_per_step = 3;
  const auto all = train(spec, graphs, config);
  EXPECT_NE(to_vector(one.params.get("head.w")), to_vector(all.params.get("head.w")));
  // The first epoch's loss is computed before any update in the batched run.
  const auto init = train(spec, graphs, TrainConfig{.epochs = 0});
  double initial = 0;
  for (const auto& g : graphs) initial += evaluate_loss(init, g);
  EXPECT_NEAR(all.loss_history[0], initial / 3, 1e-12);
}
