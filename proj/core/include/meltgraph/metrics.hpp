#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "meltgraph/anomaly.hpp"

namespace meltgraph {

/// Step-interpolated area under the PR curve; equal scores form one step.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// (#(pos > neg) + 0.5 #(pos == neg)) / (P N).
double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

/// Flags score >= t. Undefined precision/recall/F1 are reported as 0.
Confusion confusion(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold);

enum class ImportanceMetric { kAveragePrecision, kMse };

struct FeatureImportance {
  std::vector<double> importance;  // mean drop, clamped at 0
  std::vector<double> raw;         // mean drop, signed
  double baseline = 0.0;
};

/// Shuffles each input feature across nodes within each layer, rescoring
/// every time, and reports the mean drop of the metric. Throws
/// InvalidArgument when repeats < 1.
FeatureImportance permutation_importance(const TrainedModel& model, std::span<const ScanGraph> graphs,
                                         const ScoringOptions& scoring, ImportanceMetric metric,
                                         std::size_t repeats, std::uint64_t seed);

enum class ThresholdMode {
  kEval,     // select and report on all eval layers
  kHoldout,  // select on the first half of the eval layers, report on the rest
};

struct EvalOptions {
  ScoringOptions scoring;
  ThresholdMode threshold_mode = ThresholdMode::kEval;
  bool two_sided = false;
  std::size_t importance_repeats = 0;
  std::uint64_t importance_seed = 0;
};

struct EvalReport {
  std::string model;
  std::string variant;
  double ap = 0.0;
  double auroc = 0.0;
  double f1 = 0.0;
  std::size_t fp = 0, fn = 0, tp = 0, tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double threshold = 0.0;  // in units of nominal-standardized scores
  double loss = 0.0;
  double gaussian_fpr_estimate = 0.0;
  double empirical_fpr = 0.0;
  std::vector<double> feature_importances;
  std::vector<double> feature_importances_raw;

  std::vector<PrPoint> pr_curve;
  std::vector<QqPoint> qq_nominal;
  std::vector<QqPoint> qq_anomalous;
  /// Standardized decision scores per eval layer.
  std::vector<AnomalyScores> layer_scores;
};

/// Scores every eval layer, standardizes the decision scores by the nominal
/// nodes' mean and standard deviation and fills the report.
EvalReport evaluate_detection(const TrainedModel& model, std::span<const ScanGraph> eval_graphs,
                              const EvalOptions& options);

}  // namespace meltgraph
