#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "meltgraph/anomaly.hpp"
#include "meltgraph/error.hpp"
#include "meltgraph/metrics.hpp"
#include "support/helpers.hpp"

using namespace meltgraph;
using namespace testing_support;

namespace {

Matrix rows(std::size_t r, std::size_t c, std::vector<double> v) {
  Matrix m(r, c);
  m.data = std::move(v);
  return m;
}

std::vector<double> uniform(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

std::vector<std::uint8_t> bernoulli(std::size_t n, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution b(p);
  std::vector<std::uint8_t> y(n);
  do {
    for (auto& v : y) v = b(rng) ? 1 : 0;
  } while (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0);
  return y;
}

}  // namespace

TEST(Score, SignedExamples) {
  const auto y = rows(2, 2, {0.3, -0.2, 1.0, 5.0});
  EXPECT_EQ(score_signed(y, y), (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(score_signed(rows(1, 2, {1, 2}), rows(1, 2, {0, 1})), (std::vector<double>{2.0}));
  EXPECT_EQ(score_signed(rows(1, 2, {0, 0}), rows(1, 2, {1, -1})), (std::vector<double>{0.0}));
  EXPECT_THROW(score_signed(rows(1, 2, {0, 0}), rows(2, 1, {0, 0})), DimensionError);
}

TEST(Score, AbsoluteExamplesAndTriangleInequality) {
  const auto y = rows(2, 2, {0.3, -0.2, 1.0, 5.0});
  EXPECT_EQ(score_absolute(y, y), (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(score_absolute(rows(1, 2, {0, 0}), rows(1, 2, {1, -1})), (std::vector<double>{2.0}));

  const auto a = rows(50, 4, uniform(200, 1)), b = rows(50, 4, uniform(200, 2));
  const auto z = score_signed(a, b), za = score_absolute(a, b);
  for (std::size_t i = 0; i < 50; ++i) {
    double expected = 0;
    for (std::size_t c = 0; c < 4; ++c) expected += std::abs(a(i, c) - b(i, c));
    EXPECT_EQ(za[i], expected);
    EXPECT_GE(za[i], std::abs(z[i]));
  }
}

TEST(Threshold, SeparablePair) {
  const std::vector<double> s = {3, 1};
  const std::vector<std::uint8_t> y = {1, 0};
  const auto r = select_threshold(s, y);
  EXPECT_EQ(r.threshold, 3.0);
  EXPECT_EQ(r.f1, 1.0);
  EXPECT_EQ(r.empirical_fpr, 0.0);
}

TEST(Threshold, AllEqualScoresFlagEverything) {
  const std::vector<double> s(10, 0.7);
  const std::vector<std::uint8_t> y = {1, 0, 0, 1, 0, 0, 0, 1, 0, 0};
  const auto r = select_threshold(s, y);
  const double p = 0.3;
  EXPECT_NEAR(r.f1, 2 * p / (p + 1), 1e-15);
  EXPECT_EQ(r.threshold, 0.7);
  EXPECT_EQ(r.curve.size(), 1u);
}

TEST(Threshold, MatchesExhaustiveOracle) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto s = uniform(20, seed);
    if (seed % 3 == 0)
      for (auto& v : s) v = std::round(v * 3);  // heavy ties
    const auto y = bernoulli(20, 0.3, seed + 1000);
    const auto r = select_threshold(s, y);
    const auto [t, f1] = oracle::best_threshold(s, y);
    EXPECT_EQ(r.threshold, t) << seed;
    EXPECT_EQ(r.f1, f1) << seed;
    EXPECT_EQ(confusion(s, y, r.threshold).f1, r.f1) << seed;
  }
}

TEST(Threshold, CurveIsDescendingAndSingleClassRejected) {
  const auto s = uniform(30, 5);
  const auto y = bernoulli(30, 0.2, 6);
  const auto r = select_threshold(s, y);
  ASSERT_EQ(r.curve.size(), 30u);
  for (std::size_t k = 1; k < r.curve.size(); ++k) {
    EXPECT_GT(r.curve[k - 1].threshold, r.curve[k].threshold);
    EXPECT_LE(r.curve[k - 1].recall, r.curve[k].recall);
  }
  EXPECT_EQ(r.curve.back().recall, 1.0);
  const std::vector<std::uint8_t> none(30, 0);
  EXPECT_THROW(select_threshold(s, none), InvalidArgument);
}

TEST(Gaussian, TailProbabilitiesMatchTable) {
  EXPECT_NEAR(normal_upper_tail(3.0), 1.3498980316301e-3, 1e-13);
  EXPECT_NEAR(normal_upper_tail(3.42), 3.1310567858e-4, 1e-13);
  EXPECT_EQ(normal_upper_tail(0.0), 0.5);
  EXPECT_NEAR(normal_cdf(1.0), 0.8413447460685429, 1e-15);
  EXPECT_NEAR(normal_cdf(-2.0), 0.022750131948179195, 1e-16);
  EXPECT_NEAR(normal_upper_tail(8.0), 6.22096057427178e-16, 1e-28);
}

TEST(Gaussian, FprEstimateStandardizesThreshold) {
  // Symmetric sample with mean 0 and sample standard deviation exactly 1.
  const double a = std::sqrt(39.0 / 40.0);
  std::vector<double> s;
  for (int i = 0; i < 20; ++i) {
    s.push_back(a);
    s.push_back(-a);
  }
  EXPECT_NEAR(gaussian_fpr_estimate(s, 3.0), 1.35e-3, 1e-5);
  EXPECT_NEAR(gaussian_fpr_estimate(s, 3.42), 3.1e-4, 5e-6);
  EXPECT_NEAR(gaussian_fpr_estimate(s, 0.0), 0.5, 1e-15);
  for (auto& v : s) v = 2 * v + 5;
  EXPECT_NEAR(gaussian_fpr_estimate(s, 11.0), 1.35e-3, 1e-5);
  EXPECT_THROW(gaussian_fpr_estimate(std::vector<double>(10, 1.0), 0.0), InvalidArgument);
  EXPECT_THROW(gaussian_fpr_estimate(std::vector<double>(40, 1.0), 0.0), NumericalError);
}

TEST(Gaussian, QuantileMatchesKnownValuesAndInvertsCdf) {
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(normal_quantile(0.75), 0.6744897501960817, 1e-12);
  EXPECT_NEAR(normal_quantile(1e-9), -5.997807015007686, 1e-9);
  EXPECT_NEAR(normal_quantile(1 - 1e-9), 5.997807015007686, 1e-6);
  for (double p = 1e-9; p < 1.0; p = p < 0.01 ? p * 3 : p + 0.0137) {
    EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-12 * std::max(1.0, p / 1e-3)) << p;
  }
  EXPECT_THROW(normal_quantile(0.0), InvalidArgument);
  EXPECT_THROW(normal_quantile(1.0), InvalidArgument);
}

TEST(Qq, TwoPointQuartiles) {
  const std::vector<double> s = {-1.0, 1.0};
  const auto q = qq_points(s);
  ASSERT_EQ(q.size(), 2u);
  EXPECT_NEAR(q[0].theoretical, -0.6744897501960817, 1e-12);
  EXPECT_NEAR(q[1].theoretical, 0.6744897501960817, 1e-12);
  EXPECT_LT(q[0].empirical, 0.0);
}

// Central plotting positions only; the extreme order statistics of a
// 10,000-point sample scatter by about 0.3.
TEST(Qq, GaussianSampleHugsDiagonal) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal(3.0, 2.0);
  std::vector<double> s(10000);
  for (auto& v : s) v = normal(rng);
  const double edge = normal_quantile(0.99);
  double worst = 0;
  for (const auto& p : qq_points(s)) {
    if (std::abs(p.theoretical) <= edge) worst = std::max(worst, std::abs(p.theoretical - p.empirical));
  }
  EXPECT_LT(worst, 0.1);
}

TEST(Qq, HeavyLeftTailDeviatesInNegativeRegion) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  std::vector<double> s(5000);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = i % 20 == 0 ? -4.0 + normal(rng) : normal(rng);
  const auto q = qq_points(s);
  double worst_neg = 0, worst_pos = 0;
  for (const auto& p : q) {
    const double d = std::abs(p.theoretical - p.empirical);
    (p.theoretical < 0 ? worst_neg : worst_pos) = std::max(p.theoretical < 0 ? worst_neg : worst_pos, d);
  }
  EXPECT_GT(q.front().theoretical, q.front().empirical + 0.5);
  EXPECT_GT(worst_neg, worst_pos);
}

TEST(Pipeline, FourNodeChainMatchesHandComputation) {
  LayerSpec spec;
  spec.width_mm = 1.0;
  spec.height_mm = 1.0;
  spec.hatch_spacing_mm = 0.5;
  spec.node_spacing_mm = 0.5;
  auto scan = generate_melt_signal(generate_scan_path(spec), spec);
  const auto graph = make_graph(scan, {{0, 1}, {1, 2}, {2, 3}});

  TrainedModel model;
  model.spec.kind = ModelKind::kFc;
  model.spec.n_message_layers = 0;
  model.params = init_params(model.spec, 3);
  model.standardizer.mean = {0.1, 0.2, 0.3, 0.4};
  model.standardizer.stddev = {1.0, 2.0, 0.5, 1.5};

  const auto w = to_dense(model.params.get("head.w"));
  const auto b = to_vector(model.params.get("head.b"));
  std::vector<double> z(4, 0.0), za(4, 0.0);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t c = 0; c < 4; ++c) {
      double pred = b[c];
      for (std::size_t f = 0; f < 4; ++f) pred += scan.features(i, f) * w[f][c];
      const double obs = (scan.labels(i, c) - model.standardizer.mean[c]) / model.standardizer.stddev[c];
      z[i] += pred - obs;
      za[i] += std::abs(pred - obs);
    }
  }
  const auto s = oracle::smoothing(4, {{0, 1}, {1, 2}, {2, 3}}, true);
  std::vector<double> smoothed(4, 0.0), smoothed_abs(4, 0.0);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      smoothed[i] += s[i][j] * z[j];
      smoothed_abs[i] += s[i][j] * za[j];
    }

  const auto signed_scores = score_pipeline(model, graph);
  const auto abs_scores = score_pipeline(model, graph, {ScoreVariant::kAbsolute, 1});
  const auto raw_scores = score_pipeline(model, graph, {ScoreVariant::kSignedRaw, 1});
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(signed_scores.z[i], z[i], 1e-10);
    EXPECT_NEAR(signed_scores.z_abs[i], za[i], 1e-10);
    EXPECT_NEAR(signed_scores.z_smoothed[i], smoothed[i], 1e-10);
    EXPECT_NEAR(abs_scores.z_smoothed[i], smoothed_abs[i], 1e-10);
  }
  EXPECT_EQ(raw_scores.z_smoothed, raw_scores.z);
  EXPECT_EQ(raw_scores.z, signed_scores.z);
}

TEST(Pipeline, ZeroErrorGivesZeroScores) {
  LayerSpec spec;
  spec.width_mm = 1.0;
  spec.height_mm = 0.4;
  spec.noise_sigma = 0.0;
  auto graph = build_graph(generate_melt_signal(generate_scan_path(spec), spec));
  auto model = power_only_model({graph.scan});
  // Without noise the power-only fit is exact for shape and spatter; make
  // the observations equal to the predictions everywhere.
  graph.scan.labels = model.standardizer.invert(predict(model.spec, model.params, graph));
  const auto scores = score_pipeline(model, graph);
  for (double v : scores.z_smoothed) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Pipeline, AnomaliesRaiseSignedScoreOnDefaultLayers) {
  DatasetConfig config;
  config.seed = 17;
  config.train_layers = 2;
  const auto data = build_dataset(config);
  const auto model = power_only_model(data.train);
  for (const auto& layer : data.eval) {
    const auto graph = build_graph(layer);
    const auto scores = score_pipeline(model, graph);
    double sum_a = 0, sum_n = 0;
    for (std::size_t i = 0; i < graph.n_nodes(); ++i) (layer.anomaly_mask[i] ? sum_a : sum_n) += scores.z[i];
    const double n_a = static_cast<double>(layer.anomaly_count());
    EXPECT_GT(sum_a / n_a, sum_n / (static_cast<double>(layer.size()) - n_a));
  }
}

TEST(Variant, NamesRoundTrip) {
  for (auto v : {ScoreVariant::kSignedSmoothed, ScoreVariant::kSignedRaw, ScoreVariant::kAbsolute}) {
    EXPECT_EQ(parse_score_variant(to_string(v)), v);
  }
  EXPECT_THROW(parse_score_variant("bogus"), InvalidSpec);
}
