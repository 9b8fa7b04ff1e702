#include "meltgraph/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "meltgraph/error.hpp"

namespace meltgraph {
namespace {

void check_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) {
    std::ostringstream msg;
    msg << op << ": shapes " << a.rows << "x" << a.cols << " and " << b.rows << "x" << b.cols << " differ";
    throw DimensionError(msg.str());
  }
}

void check_labels(const char* op, std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw DimensionError(std::string(op) + ": one label per score required");
  const auto positives = std::count_if(labels.begin(), labels.end(), [](std::uint8_t l) { return l != 0; });
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(labels.size())) {
    throw InvalidArgument(std::string(op) + ": labels must contain both classes");
  }
}

}  // namespace

std::string_view to_string(ScoreVariant variant) {
  switch (variant) {
    case ScoreVariant::kSignedSmoothed: return "signed_smoothed";
    case ScoreVariant::kSignedRaw: return "signed_raw";
    case ScoreVariant::kAbsolute: return "absolute";
  }
  return "unknown";
}

ScoreVariant parse_score_variant(std::string_view name) {
  for (auto v : {ScoreVariant::kSignedSmoothed, ScoreVariant::kSignedRaw, ScoreVariant::kAbsolute}) {
    if (to_string(v) == name) return v;
  }
  throw InvalidSpec("unknown score variant '" + std::string(name) + "'");
}

std::vector<double> score_signed(const Matrix& predicted, const Matrix& observed) {
  check_same_shape("score_signed", predicted, observed);
  std::vector<double> z(predicted.rows, 0.0);
  for (std::size_t i = 0; i < predicted.rows; ++i) {
    for (std::size_t j = 0; j < predicted.cols; ++j) z[i] += predicted(i, j) - observed(i, j);
  }
  return z;
}

std::vector<double> score_absolute(const Matrix& predicted, const Matrix& observed) {
  check_same_shape("score_absolute", predicted, observed);
  std::vector<double> z(predicted.rows, 0.0);
  for (std::size_t i = 0; i < predicted.rows; ++i) {
    for (std::size_t j = 0; j < predicted.cols; ++j) z[i] += std::abs(predicted(i, j) - observed(i, j));
  }
  return z;
}

AnomalyScores score_pipeline(const TrainedModel& model, const ScanGraph& graph, const Matrix& features,
                             const ScoringOptions& options) {
  const Matrix observed = model.standardizer.apply(graph.scan.labels);
  const Matrix predicted = predict(model.spec, model.params, make_graph_tensors(graph), features, &observed);

  AnomalyScores scores;
  scores.variant = options.variant;
  scores.z = score_signed(predicted, observed);
  scores.z_abs = score_absolute(predicted, observed);
  const auto& decision = options.variant == ScoreVariant::kAbsolute ? scores.z_abs : scores.z;
  scores.z_smoothed = options.variant == ScoreVariant::kSignedRaw
                          ? decision
                          : apply_smoothing(graph.smoothing, decision, options.smoothing_passes);
  return scores;
}

AnomalyScores score_pipeline(const TrainedModel& model, const ScanGraph& graph, const ScoringOptions& options) {
  return score_pipeline(model, graph, graph.scan.features, options);
}

ThresholdReport select_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_labels("select_threshold", scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto positives = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](std::uint8_t l) { return l != 0; }));
  const std::size_t negatives = n - positives;

  ThresholdReport report;
  std::size_t tp = 0, fp = 0;
  std::size_t best_fp = 0;
  double best_f1 = -1.0;
  for (std::size_t k = 0; k < n;) {
    const double t = scores[order[k]];
    for (; k < n && scores[order[k]] == t; ++k) (labels[order[k]] ? tp : fp) += 1;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    report.curve.push_back({t, precision, recall});
    const double f1 = static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + (positives - tp));
    if (f1 >= best_f1) {  // descending sweep: ties resolve to the smaller threshold
      best_f1 = f1;
      best_fp = fp;
      report.threshold = t;
      report.precision = precision;
      report.recall = recall;
    }
  }
  report.f1 = best_f1;
  report.empirical_fpr = static_cast<double>(best_fp) / static_cast<double>(negatives);

  std::vector<double> nominal;
  nominal.reserve(negatives);
  for (std::size_t i = 0; i < n; ++i) {
    if (!labels[i]) nominal.push_back(scores[i]);
  }
  if (nominal.size() >= 30 && mean_stddev(nominal).second > 0.0) {
    report.gaussian_fpr_estimate = gaussian_fpr_estimate(nominal, report.threshold);
  }
  return report;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_upper_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("normal_quantile: p must lie in (0, 1)");
  // Acklam's rational approximation followed by one Halley step.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = (p < 0.5 ? normal_cdf(x) - p : (1.0 - p) - normal_upper_tail(x));
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

std::pair<double, double> mean_stddev(std::span<const double> values) {
  if (values.size() < 2) throw InvalidArgument("mean_stddev: need at least 2 values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

double gaussian_fpr_estimate(std::span<const double> nominal_scores, double threshold) {
  if (nominal_scores.size() < 30) throw InvalidArgument("gaussian_fpr_estimate: need at least 30 nominal scores");
  const auto [mean, sd] = mean_stddev(nominal_scores);
  if (!(sd > 0.0)) throw NumericalError("gaussian_fpr_estimate: nominal scores have zero variance");
  return normal_upper_tail((threshold - mean) / sd);
}

std::vector<QqPoint> qq_points(std::span<const double> scores) {
  const auto [mean, sd] = mean_stddev(scores);
  if (!(sd > 0.0)) throw NumericalError("qq_points: scores have zero variance");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<QqPoint> points;
  points.reserve(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    points.push_back({normal_quantile((static_cast<double>(i) + 0.5) / n), (sorted[i] - mean) / sd});
  }
  return points;
}

}  // namespace meltgraph
