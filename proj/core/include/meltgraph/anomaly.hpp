#pragma once

// Prediction-error anomaly scores, graph smoothing of the scores, PR-curve
// threshold selection and Gaussian tail analysis.

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "meltgraph/graph_build.hpp"
#include "meltgraph/training.hpp"

namespace meltgraph {

enum class ScoreVariant {
  kSignedSmoothed,  // Graph-T
  kSignedRaw,       // Graph-T-Z: no smoothing
  kAbsolute,        // Graph-T-A: absolute errors, smoothed
};

std::string_view to_string(ScoreVariant variant);
ScoreVariant parse_score_variant(std::string_view name);

/// Z_i = sum_j (predicted_ij - observed_ij). Reduced observations give
/// positive scores.
std::vector<double> score_signed(const Matrix& predicted, const Matrix& observed);

/// Z_i = sum_j |predicted_ij - observed_ij|.
std::vector<double> score_absolute(const Matrix& predicted, const Matrix& observed);

struct AnomalyScores {
  std::vector<double> z;           // signed
  std::vector<double> z_abs;       // absolute
  std::vector<double> z_smoothed;  // score used for decisions
  ScoreVariant variant = ScoreVariant::kSignedSmoothed;
};

struct ScoringOptions {
  ScoreVariant variant = ScoreVariant::kSignedSmoothed;
  std::size_t smoothing_passes = 1;
};

/// predict -> signed or absolute error on the melt-pool channels ->
/// smoothing (skipped for kSignedRaw). The autoencoder scores the melt-pool
/// channels of its reconstruction.
AnomalyScores score_pipeline(const TrainedModel& model, const ScanGraph& graph, const ScoringOptions& options = {});

/// Same, with a features matrix substituted for the layer's own features.
AnomalyScores score_pipeline(const TrainedModel& model, const ScanGraph& graph, const Matrix& features,
                             const ScoringOptions& options);

struct PrPoint {
  double threshold;
  double precision;
  double recall;
};

struct ThresholdReport {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<PrPoint> curve;  // one point per distinct score, descending threshold
  double gaussian_fpr_estimate = 0.0;
  double empirical_fpr = 0.0;
};

/// Sweeps every distinct score as a threshold (flag when score >= t) and
/// keeps the maximum-F1 one, smallest threshold on ties. Throws
/// InvalidArgument unless both classes are present.
ThresholdReport select_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Standard normal CDF.
double normal_cdf(double x);
/// Standard normal upper tail 1 - Phi(x).
double normal_upper_tail(double x);
/// Inverse standard normal CDF for p in (0, 1).
double normal_quantile(double p);

/// Upper-tail probability of t after standardizing by the nominal scores'
/// mean and sample standard deviation.
double gaussian_fpr_estimate(std::span<const double> nominal_scores, double threshold);

struct QqPoint {
  double theoretical;
  double empirical;
};

/// Sorted standardized scores against Phi^{-1}((i - 0.5) / n).
std::vector<QqPoint> qq_points(std::span<const double> scores);

/// (mean, sample standard deviation).
std::pair<double, double> mean_stddev(std::span<const double> values);

}  // namespace meltgraph
