#include "meltgraph/training.hpp"

#include <cmath>
#include <sstream>

#include "meltgraph/error.hpp"
#include "meltgraph/scan_synth.hpp"

namespace meltgraph {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw InvalidSpec("TrainConfig: " + what); };
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
  if (!(beta1 > 0 && beta1 < 1)) fail("beta1 must lie in (0, 1)");
  if (!(beta2 > 0 && beta2 < 1)) fail("beta2 must lie in (0, 1)");
  if (!(eps_adam > 0)) fail("eps_adam must be positive");
  if (graphs_per_step == 0) fail("graphs_per_step must be positive");
}

// ---------------------------------------------------------------------------
// Standardizer

Standardizer Standardizer::fit(std::span<const Matrix> labels) {
  if (labels.empty()) throw InvalidArgument("Standardizer::fit: no data");
  const std::size_t channels = labels.front().cols;
  std::size_t count = 0;
  std::vector<double> sum(channels, 0.0);
  for (const auto& y : labels) {
    if (y.cols != channels) throw DimensionError("Standardizer::fit: channel count differs between layers");
    for (std::size_t r = 0; r < y.rows; ++r) {
      for (std::size_t c = 0; c < channels; ++c) sum[c] += y(r, c);
    }
    count += y.rows;
  }
  if (count < 2) throw InvalidArgument("Standardizer::fit: need at least 2 nodes");

  Standardizer s;
  s.mean.resize(channels);
  s.stddev.assign(channels, 0.0);
  for (std::size_t c = 0; c < channels; ++c) s.mean[c] = sum[c] / static_cast<double>(count);
  for (const auto& y : labels) {
    for (std::size_t r = 0; r < y.rows; ++r) {
      for (std::size_t c = 0; c < channels; ++c) {
        const double d = y(r, c) - s.mean[c];
        s.stddev[c] += d * d;
      }
    }
  }
  for (std::size_t c = 0; c < channels; ++c) {
    s.stddev[c] = std::sqrt(s.stddev[c] / static_cast<double>(count));
    if (!(s.stddev[c] > 1e-12 * std::max(1.0, std::abs(s.mean[c])))) {
      const std::string name = channels == kNumChannels ? kChannelNames[c] : "channel " + std::to_string(c);
      throw NumericalError("Standardizer::fit: channel '" + name + "' is constant");
    }
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& y) const {
  if (y.cols != mean.size()) throw DimensionError("Standardizer::apply: channel count mismatch");
  Matrix z = y;
  for (std::size_t r = 0; r < z.rows; ++r) {
    for (std::size_t c = 0; c < z.cols; ++c) z(r, c) = (y(r, c) - mean[c]) / stddev[c];
  }
  return z;
}

Matrix Standardizer::invert(const Matrix& z) const {
  if (z.cols != mean.size()) throw DimensionError("Standardizer::invert: channel count mismatch");
  Matrix y = z;
  for (std::size_t r = 0; r < y.rows; ++r) {
    for (std::size_t c = 0; c < y.cols; ++c) y(r, c) = z(r, c) * stddev[c] + mean[c];
  }
  return y;
}

// ---------------------------------------------------------------------------
// Loss and optimizer

Tensor mse_loss(Tape& tape, const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) {
    throw DimensionError("mse_loss: prediction " + shape_string(prediction.shape()) + " vs target " +
                         shape_string(target.shape()));
  }
  Tensor diff = sub(tape, prediction, target);
  return mean(tape, mul(tape, diff, diff));
}

void adam_update(std::span<double> theta, std::span<const double> grad, AdamMoments& moments, std::size_t t,
                 const TrainConfig& config) {
  if (t == 0) throw InvalidArgument("adam_update: step count starts at 1");
  if (grad.size() != theta.size()) throw DimensionError("adam_update: gradient length mismatch");
  if (moments.m.size() != theta.size()) {
    moments.m.assign(theta.size(), 0.0);
    moments.v.assign(theta.size(), 0.0);
  }
  const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    moments.m[i] = config.beta1 * moments.m[i] + (1.0 - config.beta1) * g;
    moments.v[i] = config.beta2 * moments.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = moments.m[i] / correction1;
    const double v_hat = moments.v[i] / correction2;
    theta[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps_adam);
  }
}

AdamOptimizer::AdamOptimizer(const ModelParams& params, TrainConfig config)
    : config_(config), moments_(params.size()) {
  config_.validate();
}

void AdamOptimizer::step(ModelParams& params) {
  if (params.size() != moments_.size()) throw InvalidArgument("AdamOptimizer: parameter set changed");
  for (auto& [name, tensor] : params) {
    if (!tensor.requires_grad() || !tensor.has_grad()) continue;
    const auto g = tensor.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        std::ostringstream msg;
        msg << "non-finite gradient " << g[i] << " in parameter '" << name << "' at index " << i << " (step "
            << t_ + 1 << ")";
        throw NumericalError(msg.str());
      }
    }
  }
  ++t_;
  std::size_t k = 0;
  for (auto& [name, tensor] : params) {
    if (tensor.requires_grad()) {
      std::vector<double> zeros;
      std::span<const double> g = tensor.grad();
      if (g.empty()) {
        zeros.assign(tensor.size(), 0.0);
        g = zeros;
      }
      adam_update(tensor.mutable_values(), g, moments_[k], t_, config_);
    }
    tensor.zero_grad();
    ++k;
  }
}

// ---------------------------------------------------------------------------
// Training

Tensor model_input(const ModelSpec& spec, const Matrix& features, const Matrix& standardized_labels) {
  if (spec.kind != ModelKind::kAutoencoder) return Tensor::from_matrix(features);
  Tape tape(false);
  const Tensor parts[] = {Tensor::from_matrix(features), Tensor::from_matrix(standardized_labels)};
  return concat(tape, parts);
}

Tensor model_target(const ModelSpec& spec, const Matrix& features, const Matrix& standardized_labels) {
  if (spec.kind == ModelKind::kAutoencoder) return model_input(spec, features, standardized_labels);
  return Tensor::from_matrix(standardized_labels);
}

TrainedModel train(const ModelSpec& spec, std::span<const ScanGraph> graphs, const TrainConfig& config,
                   const EpochCallback& on_epoch) {
  spec.validate();
  config.validate();
  if (graphs.empty()) throw InvalidArgument("train: no training graphs");
  std::vector<Matrix> labels;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const auto& scan = graphs[i].scan;
    if (const auto anomalous = scan.anomaly_count(); anomalous > 0) {
      std::ostringstream msg;
      msg << "train: training layer " << i << " has " << anomalous
          << " anomalous nodes; training requires nominal layers only";
      throw DataContractError(msg.str());
    }
    if (scan.features.cols != spec.in_dim || scan.labels.cols != spec.out_dim) {
      throw DimensionError("train: layer " + std::to_string(i) + " does not match the model's input/output widths");
    }
    labels.push_back(scan.labels);
  }

  TrainedModel model;
  model.spec = spec;
  model.standardizer = Standardizer::fit(labels);
  model.params = init_params(spec, config.seed);

  struct Prepared {
    GraphTensors graph;
    Tensor input;
    Tensor target;
  };
  std::vector<Prepared> prepared;
  prepared.reserve(graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const Matrix y = model.standardizer.apply(labels[i]);
    prepared.push_back({make_graph_tensors(graphs[i]), model_input(spec, graphs[i].scan.features, y),
                        model_target(spec, graphs[i].scan.features, y)});
  }

  AdamOptimizer optimizer(model.params, config);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t i = 0; i < prepared.size(); ++i) {
      Tape tape;
      Tensor prediction = forward(tape, spec, model.params, prepared[i].graph, prepared[i].input);
      Tensor loss = mse_loss(tape, prediction, prepared[i].target);
      if (!std::isfinite(loss.item())) {
        throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) + ", graph " +
                             std::to_string(i));
      }
      total += loss.item();
      tape.backward(loss);
      if ((i + 1) % config.graphs_per_step == 0 || i + 1 == prepared.size()) optimizer.step(model.params);
    }
    const double epoch_loss = total / static_cast<double>(prepared.size());
    model.loss_history.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  return model;
}

double evaluate_loss(const TrainedModel& model, const ScanGraph& graph, std::span<const std::uint32_t> nodes) {
  const Matrix y = model.standardizer.apply(graph.scan.labels);
  const auto& spec = model.spec;
  Tape tape(false);
  Tensor out = forward(tape, spec, model.params, make_graph_tensors(graph), model_input(spec, graph.scan.features, y));
  Tensor target = model_target(spec, graph.scan.features, y);
  const std::size_t width = out.cols();
  auto o = out.values();
  auto t = target.values();
  double total = 0.0;
  std::size_t count = 0;
  auto accumulate_row = [&](std::size_t r) {
    for (std::size_t c = 0; c < width; ++c) {
      const double d = o[r * width + c] - t[r * width + c];
      total += d * d;
    }
    count += width;
  };
  if (nodes.empty()) {
    for (std::size_t r = 0; r < out.rows(); ++r) accumulate_row(r);
  } else {
    for (auto r : nodes) accumulate_row(r);
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

}  // namespace meltgraph
