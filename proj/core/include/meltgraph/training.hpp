#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "meltgraph/graph_build.hpp"
#include "meltgraph/models.hpp"

namespace meltgraph {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  std::size_t epochs = 300;
  std::uint64_t seed = 0;
  std::size_t graphs_per_step = 1;

  void validate() const;
};

/// Per-channel mean and standard deviation of the training labels.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  /// Throws NumericalError naming the channel when a channel is constant.
  static Standardizer fit(std::span<const Matrix> labels);
  Matrix apply(const Matrix& y) const;
  Matrix invert(const Matrix& z) const;

  bool operator==(const Standardizer&) const = default;
};

/// mean((prediction - target)^2) over every entry.
Tensor mse_loss(Tape& tape, const Tensor& prediction, const Tensor& target);

/// First and second moment estimates for one parameter tensor.
struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

/// One bias-corrected Adam update at step t (t >= 1).
void adam_update(std::span<double> theta, std::span<const double> grad, AdamMoments& moments, std::size_t t,
                 const TrainConfig& config);

class AdamOptimizer {
 public:
  AdamOptimizer(const ModelParams& params, TrainConfig config);

  /// Applies one update from the gradients stored on the params, then
  /// zeroes them. Throws NumericalError naming the first parameter with a
  /// non-finite gradient; params are left untouched in that case.
  void step(ModelParams& params);
  std::size_t steps_taken() const { return t_; }

 private:
  TrainConfig config_;
  std::vector<AdamMoments> moments_;
  std::size_t t_ = 0;
};

/// Everything needed to score new layers with a fitted predictor.
struct TrainedModel {
  ModelSpec spec;
  ModelParams params;
  Standardizer standardizer;
  std::vector<double> loss_history;
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

/// Full-graph Adam on nominal layers: one gradient step per
/// `graphs_per_step` graphs, cycling the graphs in order each epoch. Throws
/// DataContractError if any node is marked anomalous.
TrainedModel train(const ModelSpec& spec, std::span<const ScanGraph> graphs, const TrainConfig& config,
                   const EpochCallback& on_epoch = {});

/// Model input tensor for a layer: features, or [features | standardized
/// labels] for the autoencoder.
Tensor model_input(const ModelSpec& spec, const Matrix& features, const Matrix& standardized_labels);

/// Regression target for a layer: standardized labels, or the full input
/// for the autoencoder.
Tensor model_target(const ModelSpec& spec, const Matrix& features, const Matrix& standardized_labels);

/// MSE of a fitted model on the given nodes of a layer (all nodes when
/// `nodes` is empty), in standardized units.
double evaluate_loss(const TrainedModel& model, const ScanGraph& graph, std::span<const std::uint32_t> nodes = {});

}  // namespace meltgraph
