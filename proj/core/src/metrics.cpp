#include "meltgraph/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "meltgraph/error.hpp"
#include "meltgraph/scan_synth.hpp"

namespace meltgraph {
namespace {

std::size_t count_positive(std::span<const std::uint8_t> labels) {
  return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](std::uint8_t l) { return l != 0; }));
}

void check_binary(const char* op, std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw DimensionError(std::string(op) + ": one label per score required");
  const std::size_t positives = count_positive(labels);
  if (positives == 0 || positives == labels.size()) {
    throw InvalidArgument(std::string(op) + ": labels must contain both classes");
  }
}

std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

struct Pooled {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;

  void append(std::span<const double> s, std::span<const std::uint8_t> l) {
    scores.insert(scores.end(), s.begin(), s.end());
    labels.insert(labels.end(), l.begin(), l.end());
  }
};

double nominal_mse(const TrainedModel& model, const ScanGraph& graph, const Matrix& features) {
  const Matrix observed = model.standardizer.apply(graph.scan.labels);
  const Matrix predicted = predict(model.spec, model.params, make_graph_tensors(graph), features, &observed);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < observed.rows; ++i) {
    if (graph.scan.anomaly_mask[i]) continue;
    for (std::size_t c = 0; c < observed.cols; ++c) {
      const double d = predicted(i, c) - observed(i, c);
      total += d * d;
    }
    count += observed.cols;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

double score_metric(const TrainedModel& model, std::span<const ScanGraph> graphs, std::span<const Matrix> features,
                    const ScoringOptions& scoring, ImportanceMetric metric) {
  if (metric == ImportanceMetric::kMse) {
    double total = 0.0;
    for (std::size_t g = 0; g < graphs.size(); ++g) total += nominal_mse(model, graphs[g], features[g]);
    return total / static_cast<double>(graphs.size());
  }
  Pooled pooled;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const auto scores = score_pipeline(model, graphs[g], features[g], scoring);
    pooled.append(scores.z_smoothed, graphs[g].scan.anomaly_mask);
  }
  return average_precision(pooled.scores, pooled.labels);
}

}  // namespace

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_binary("average_precision", scores, labels);
  const auto order = descending_order(scores);
  const double positives = static_cast<double>(count_positive(labels));
  double ap = 0.0;
  std::size_t tp = 0, seen = 0;
  double previous_recall = 0.0;
  for (std::size_t k = 0; k < order.size();) {
    const double t = scores[order[k]];
    for (; k < order.size() && scores[order[k]] == t; ++k, ++seen) tp += labels[order[k]] != 0;
    const double recall = static_cast<double>(tp) / positives;
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - previous_recall) * precision;
    previous_recall = recall;
  }
  return ap;
}

double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_binary("auroc", scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney U from midranks.
  double rank_sum = 0.0;
  for (std::size_t k = 0; k < order.size();) {
    std::size_t end = k;
    while (end < order.size() && scores[order[end]] == scores[order[k]]) ++end;
    const double midrank = 0.5 * static_cast<double>(k + 1 + end);
    for (std::size_t j = k; j < end; ++j) {
      if (labels[order[j]]) rank_sum += midrank;
    }
    k = end;
  }
  const double p = static_cast<double>(count_positive(labels));
  const double n = static_cast<double>(labels.size()) - p;
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

Confusion confusion(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold) {
  if (scores.size() != labels.size()) throw DimensionError("confusion: one label per score required");
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool flagged = scores[i] >= threshold;
    if (labels[i]) {
      (flagged ? c.tp : c.fn) += 1;
    } else {
      (flagged ? c.fp : c.tn) += 1;
    }
  }
  const auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / b; };
  c.precision = ratio(c.tp, c.tp + c.fp);
  c.recall = ratio(c.tp, c.tp + c.fn);
  c.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return c;
}

FeatureImportance permutation_importance(const TrainedModel& model, std::span<const ScanGraph> graphs,
                                         const ScoringOptions& scoring, ImportanceMetric metric,
                                         std::size_t repeats, std::uint64_t seed) {
  if (repeats < 1) throw InvalidArgument("permutation_importance: repeats must be at least 1");
  if (graphs.empty()) throw InvalidArgument("permutation_importance: no graphs");
  std::vector<Matrix> features;
  for (const auto& g : graphs) features.push_back(g.scan.features);
  const std::size_t n_features = features.front().cols;

  FeatureImportance result;
  result.baseline = score_metric(model, graphs, features, scoring, metric);
  result.raw.assign(n_features, 0.0);
  for (std::size_t f = 0; f < n_features; ++f) {
    for (std::size_t r = 0; r < repeats; ++r) {
      std::mt19937_64 rng(layer_seed(seed, static_cast<int>(f), r));
      std::vector<Matrix> shuffled = features;
      for (auto& x : shuffled) {
        std::vector<double> column(x.rows);
        for (std::size_t i = 0; i < x.rows; ++i) column[i] = x(i, f);
        std::shuffle(column.begin(), column.end(), rng);
        for (std::size_t i = 0; i < x.rows; ++i) x(i, f) = column[i];
      }
      const double value = score_metric(model, graphs, shuffled, scoring, metric);
      result.raw[f] += metric == ImportanceMetric::kMse ? value - result.baseline : result.baseline - value;
    }
    result.raw[f] /= static_cast<double>(repeats);
  }
  result.importance.resize(n_features);
  std::transform(result.raw.begin(), result.raw.end(), result.importance.begin(),
                 [](double d) { return std::max(d, 0.0); });
  return result;
}

EvalReport evaluate_detection(const TrainedModel& model, std::span<const ScanGraph> eval_graphs,
                              const EvalOptions& options) {
  if (eval_graphs.empty()) throw InvalidArgument("evaluate_detection: no eval layers");
  const std::size_t n_layers = eval_graphs.size();
  if (options.threshold_mode == ThresholdMode::kHoldout && n_layers < 2) {
    throw InvalidArgument("evaluate_detection: holdout thresholds need at least 2 eval layers");
  }

  EvalReport report;
  report.model = std::string(to_string(model.spec.kind));
  report.variant = std::string(to_string(options.scoring.variant));

  std::vector<double> nominal;
  for (const auto& g : eval_graphs) {
    report.layer_scores.push_back(score_pipeline(model, g, options.scoring));
    const auto& z = report.layer_scores.back().z_smoothed;
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (!g.scan.anomaly_mask[i]) nominal.push_back(z[i]);
    }
  }
  const auto [mean, sd] = mean_stddev(nominal);
  if (!(sd > 0.0)) throw NumericalError("evaluate_detection: nominal scores have zero variance");
  for (auto& scores : report.layer_scores) {
    for (double& v : scores.z_smoothed) {
      v = (v - mean) / sd;
      if (options.two_sided) v = std::abs(v);
    }
  }

  const std::size_t split = options.threshold_mode == ThresholdMode::kHoldout ? n_layers / 2 : 0;
  Pooled select, held;
  for (std::size_t g = 0; g < n_layers; ++g) {
    const auto& z = report.layer_scores[g].z_smoothed;
    const auto& mask = eval_graphs[g].scan.anomaly_mask;
    if (g >= split) held.append(z, mask);
    if (g < split || split == 0) select.append(z, mask);
  }

  const ThresholdReport chosen = select_threshold(select.scores, select.labels);
  const ThresholdReport sweep = split == 0 ? chosen : select_threshold(held.scores, held.labels);
  const Confusion c = confusion(held.scores, held.labels, chosen.threshold);

  report.threshold = chosen.threshold;
  report.ap = average_precision(held.scores, held.labels);
  report.auroc = auroc(held.scores, held.labels);
  report.tp = c.tp;
  report.fp = c.fp;
  report.tn = c.tn;
  report.fn = c.fn;
  report.precision = c.precision;
  report.recall = c.recall;
  report.f1 = c.f1;
  report.empirical_fpr = static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
  report.pr_curve = sweep.curve;

  std::vector<double> held_nominal, held_anomalous;
  for (std::size_t i = 0; i < held.scores.size(); ++i) {
    (held.labels[i] ? held_anomalous : held_nominal).push_back(held.scores[i]);
  }
  if (held_nominal.size() >= 30) {
    report.gaussian_fpr_estimate = gaussian_fpr_estimate(held_nominal, report.threshold);
  }
  report.qq_nominal = qq_points(held_nominal);
  if (held_anomalous.size() >= 2) report.qq_anomalous = qq_points(held_anomalous);

  double loss_total = 0.0;
  std::size_t loss_nodes = 0;
  for (const auto& g : eval_graphs) {
    std::vector<std::uint32_t> nodes;
    for (std::size_t i = 0; i < g.n_nodes(); ++i) {
      if (!g.scan.anomaly_mask[i]) nodes.push_back(static_cast<std::uint32_t>(i));
    }
    if (nodes.empty()) continue;
    loss_total += evaluate_loss(model, g, nodes) * static_cast<double>(nodes.size());
    loss_nodes += nodes.size();
  }
  report.loss = loss_nodes == 0 ? 0.0 : loss_total / static_cast<double>(loss_nodes);

  if (options.importance_repeats > 0) {
    const auto importance = permutation_importance(model, eval_graphs, options.scoring,
                                                   ImportanceMetric::kAveragePrecision, options.importance_repeats,
                                                   options.importance_seed);
    report.feature_importances = importance.importance;
    report.feature_importances_raw = importance.raw;
  }
  return report;
}

}  // namespace meltgraph
