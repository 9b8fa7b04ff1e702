#pragma once

// Predictors f_theta mapping laser inputs (and the layer graph) to expected
// melt-pool observations: a graph transformer, GAT, GCN, GIN, a per-node MLP
// and an autoencoder baseline.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "meltgraph/graph_build.hpp"
#include "meltgraph/tensor.hpp"

namespace meltgraph {

enum class ModelKind { kGraphTransformer, kGat, kGcn, kGin, kFc, kAutoencoder };
enum class Activation { kRelu, kIdentity };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);
std::string_view to_string(Activation activation);
Activation parse_activation(std::string_view name);

struct ModelSpec {
  ModelKind kind = ModelKind::kGraphTransformer;
  std::size_t in_dim = 4;
  std::size_t hidden_dim = 64;
  std::size_t out_dim = 4;
  std::size_t n_message_layers = 2;
  std::size_t n_heads = 4;
  std::size_t edge_dim = 2;  // number of edge classes, one-hot encoded
  double leaky_slope = 0.2;
  bool eps_learnable = true;
  Activation activation = Activation::kRelu;
  std::size_t bottleneck_dim = 3;  // autoencoder only

  void validate() const;
  /// Width of the model input: features, plus labels for the autoencoder.
  std::size_t input_width() const;
  std::size_t output_width() const;

  bool operator==(const ModelSpec&) const = default;
};

/// Named weight tensors in creation order.
class ModelParams {
 public:
  void add(std::string name, Tensor tensor);
  const Tensor& get(std::string_view name) const;
  Tensor& get(std::string_view name);
  bool contains(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  std::size_t parameter_count() const;
  void zero_grad();
  ModelParams clone() const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

/// Glorot-uniform weights, zero biases, zero GIN epsilon.
ModelParams init_params(const ModelSpec& spec, std::uint64_t seed);

/// Graph structure in the form the layers consume.
struct GraphTensors {
  std::size_t n_nodes = 0;
  EdgeIndex edges;            // message edges without self-loops
  Tensor edge_onehot;         // E x 2, class of each message edge
  EdgeIndex edges_with_self;  // message edges plus i -> i, for GAT
  CsrMatrix gcn_operator;     // D̃^{-1/2}(A + I)D̃^{-1/2}
  CsrMatrix adjacency;        // A, for GIN neighbour sums
};

GraphTensors make_graph_tensors(std::size_t n_nodes, const EdgeIndex& edges);
GraphTensors make_graph_tensors(const ScanGraph& graph);

// Per-layer weights. All weight matrices are (fan_in x fan_out).

struct TransformerWeights {
  Tensor wq, bq, wk, bk, wv, bv, we, ws, bs;
};

/// h'_i = W_s h_i + b_s + sum_j alpha_ij (W_v h_j + b_v + W_e e_ij), with
/// alpha_ij the per-head softmax over in-neighbours j of
/// (W_q h_i + b_q) . (W_k h_j + b_k + W_e e_ij) / sqrt(d_head).
Tensor graph_transformer_layer(Tape& tape, const Tensor& h, const EdgeIndex& edges, const Tensor& edge_onehot,
                               const TransformerWeights& w, std::size_t n_heads);

/// Attention coefficients of a transformer layer, E x n_heads.
Tensor graph_transformer_attention(Tape& tape, const Tensor& h, const EdgeIndex& edges, const Tensor& edge_onehot,
                                   const TransformerWeights& w, std::size_t n_heads);

struct GatWeights {
  Tensor w, att_dst, att_src, bias;
};

/// Edges must include self-loops. Returns per-head concatenation.
Tensor gat_layer(Tape& tape, const Tensor& h, const EdgeIndex& edges_with_self, const GatWeights& w,
                 std::size_t n_heads, double slope);
Tensor gat_attention(Tape& tape, const Tensor& h, const EdgeIndex& edges_with_self, const GatWeights& w,
                     std::size_t n_heads, double slope);

struct LinearWeights {
  Tensor w, b;
};

Tensor linear(Tape& tape, const Tensor& x, const LinearWeights& w);

/// S H W + b with S the self-looped symmetric-normalized adjacency.
Tensor gcn_layer(Tape& tape, const Tensor& h, const CsrMatrix& gcn_operator, const LinearWeights& w);

struct GinWeights {
  Tensor eps;
  LinearWeights mlp1, mlp2;
};

/// MLP((1 + eps) h_i + sum_{j in N(i)} h_j), relu between the MLP layers.
Tensor gin_layer(Tape& tape, const Tensor& h, const CsrMatrix& adjacency, const GinWeights& w);

TransformerWeights transformer_weights(const ModelParams& params, const std::string& prefix);
GatWeights gat_weights(const ModelParams& params, const std::string& prefix);
LinearWeights linear_weights(const ModelParams& params, const std::string& prefix);
GinWeights gin_weights(const ModelParams& params, const std::string& prefix);

/// Full forward pass. `input` is the node feature matrix, or for the
/// autoencoder the concatenation [features | standardized labels].
Tensor forward(Tape& tape, const ModelSpec& spec, const ModelParams& params, const GraphTensors& graph,
               const Tensor& input);

/// Per-node MLP on the features only; graph structure is not used.
Tensor fc_forward(Tape& tape, const ModelSpec& spec, const ModelParams& params, const Tensor& x);

Tensor autoencoder_forward(Tape& tape, const ModelSpec& spec, const ModelParams& params, const Tensor& xy);

/// Inference-only prediction on a layer graph. `standardized_labels` is
/// required for the autoencoder and ignored otherwise.
Matrix predict(const ModelSpec& spec, const ModelParams& params, const GraphTensors& graph, const Matrix& features,
               const Matrix* standardized_labels = nullptr);

Matrix predict(const ModelSpec& spec, const ModelParams& params, const ScanGraph& graph,
               const Matrix* standardized_labels = nullptr);

}  // namespace meltgraph
