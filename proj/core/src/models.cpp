#include "meltgraph/models.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "meltgraph/error.hpp"

namespace meltgraph {
namespace {

std::string layer_prefix(std::size_t layer) { return "mp" + std::to_string(layer) + "."; }

Tensor glorot(std::mt19937_64& rng, std::size_t fan_in, std::size_t fan_out, Shape shape) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (auto& v : t.mutable_values()) v = dist(rng);
  return t;
}

Tensor glorot_matrix(std::mt19937_64& rng, std::size_t fan_in, std::size_t fan_out) {
  return glorot(rng, fan_in, fan_out, {fan_in, fan_out});
}

Tensor zero_bias(std::size_t n) { return Tensor::zeros({n}, true); }

void add_linear(ModelParams& params, std::mt19937_64& rng, const std::string& prefix, std::size_t in,
                std::size_t out) {
  params.add(prefix + "w", glorot_matrix(rng, in, out));
  params.add(prefix + "b", zero_bias(out));
}

Tensor activate(Tape& tape, const Tensor& x, Activation activation) {
  return activation == Activation::kRelu ? relu(tape, x) : x;
}

Tensor edge_onehot(const EdgeIndex& edges, std::size_t n_classes) {
  Tensor t = Tensor::zeros({edges.size(), n_classes});
  auto v = t.mutable_values();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto cls = static_cast<std::size_t>(edges.edge_class[e]);
    if (cls >= n_classes) throw InvalidArgument("edge class exceeds edge_dim");
    v[e * n_classes + cls] = 1.0;
  }
  return t;
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kGraphTransformer: return "graph_transformer";
    case ModelKind::kGat: return "gat";
    case ModelKind::kGcn: return "gcn";
    case ModelKind::kGin: return "gin";
    case ModelKind::kFc: return "fc";
    case ModelKind::kAutoencoder: return "autoencoder";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  for (auto kind : {ModelKind::kGraphTransformer, ModelKind::kGat, ModelKind::kGcn, ModelKind::kGin, ModelKind::kFc,
                    ModelKind::kAutoencoder}) {
    if (to_string(kind) == name) return kind;
  }
  throw InvalidSpec("unknown model kind '" + std::string(name) + "'");
}

std::string_view to_string(Activation activation) {
  return activation == Activation::kRelu ? "relu" : "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  throw InvalidSpec("unknown activation '" + std::string(name) + "'");
}

void ModelSpec::validate() const {
  auto fail = [](const std::string& what) { throw InvalidSpec("ModelSpec: " + what); };
  if (in_dim == 0 || hidden_dim == 0 || out_dim == 0) fail("dimensions must be positive");
  if (n_heads == 0) fail("n_heads must be positive");
  if ((kind == ModelKind::kGraphTransformer || kind == ModelKind::kGat) && hidden_dim % n_heads != 0) {
    fail("n_heads must divide hidden_dim");
  }
  if (kind == ModelKind::kGraphTransformer && edge_dim == 0) fail("edge_dim must be positive");
  if (!(leaky_slope >= 0) || !std::isfinite(leaky_slope)) fail("leaky_slope must be non-negative");
  if (kind == ModelKind::kAutoencoder) {
    if (bottleneck_dim == 0 || bottleneck_dim >= in_dim + out_dim) {
      std::ostringstream msg;
      msg << "autoencoder bottleneck " << bottleneck_dim << " must be below the input width " << in_dim + out_dim;
      fail(msg.str());
    }
  }
}

std::size_t ModelSpec::input_width() const { return kind == ModelKind::kAutoencoder ? in_dim + out_dim : in_dim; }
std::size_t ModelSpec::output_width() const { return kind == ModelKind::kAutoencoder ? in_dim + out_dim : out_dim; }

// ---------------------------------------------------------------------------
// ModelParams

void ModelParams::add(std::string name, Tensor tensor) {
  if (contains(name)) throw InvalidArgument("ModelParams: duplicate parameter '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(tensor));
}

const Tensor& ModelParams::get(std::string_view name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw InvalidArgument("ModelParams: no parameter '" + std::string(name) + "'");
}

Tensor& ModelParams::get(std::string_view name) {
  return const_cast<Tensor&>(static_cast<const ModelParams&>(*this).get(name));
}

bool ModelParams::contains(std::string_view name) const {
  for (const auto& entry : entries_) {
    if (entry.first == name) return true;
  }
  return false;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& entry : entries_) n += entry.second.size();
  return n;
}

void ModelParams::zero_grad() {
  for (auto& entry : entries_) entry.second.zero_grad();
}

ModelParams ModelParams::clone() const {
  ModelParams copy;
  for (const auto& [name, tensor] : entries_) copy.add(name, tensor.clone());
  return copy;
}

ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  ModelParams params;
  const std::size_t h = spec.hidden_dim;
  auto layer_in = [&](std::size_t l) { return l == 0 ? spec.in_dim : h; };

  switch (spec.kind) {
    case ModelKind::kGraphTransformer:
      for (std::size_t l = 0; l < spec.n_message_layers; ++l) {
        const auto p = layer_prefix(l);
        const std::size_t in = layer_in(l);
        params.add(p + "wq", glorot_matrix(rng, in, h));
        params.add(p + "bq", zero_bias(h));
        params.add(p + "wk", glorot_matrix(rng, in, h));
        params.add(p + "bk", zero_bias(h));
        params.add(p + "wv", glorot_matrix(rng, in, h));
        params.add(p + "bv", zero_bias(h));
        params.add(p + "we", glorot_matrix(rng, spec.edge_dim, h));
        params.add(p + "ws", glorot_matrix(rng, in, h));
        params.add(p + "bs", zero_bias(h));
      }
      break;
    case ModelKind::kGat:
      for (std::size_t l = 0; l < spec.n_message_layers; ++l) {
        const auto p = layer_prefix(l);
        const std::size_t head_dim = h / spec.n_heads;
        params.add(p + "w", glorot_matrix(rng, layer_in(l), h));
        params.add(p + "att_dst", glorot(rng, head_dim, 1, {h}));
        params.add(p + "att_src", glorot(rng, head_dim, 1, {h}));
        params.add(p + "bias", zero_bias(h));
      }
      break;
    case ModelKind::kGcn:
      for (std::size_t l = 0; l < spec.n_message_layers; ++l) add_linear(params, rng, layer_prefix(l), layer_in(l), h);
      break;
    case ModelKind::kGin:
      for (std::size_t l = 0; l < spec.n_message_layers; ++l) {
        const auto p = layer_prefix(l);
        params.add(p + "eps", Tensor::zeros({1}, spec.eps_learnable));
        add_linear(params, rng, p + "mlp1.", layer_in(l), h);
        add_linear(params, rng, p + "mlp2.", h, h);
      }
      break;
    case ModelKind::kFc:
      for (std::size_t l = 0; l < spec.n_message_layers; ++l) {
        add_linear(params, rng, "dense" + std::to_string(l) + ".", layer_in(l), h);
      }
      break;
    case ModelKind::kAutoencoder: {
      const std::size_t width = spec.input_width();
      add_linear(params, rng, "enc0.", width, h);
      add_linear(params, rng, "enc1.", h, spec.bottleneck_dim);
      add_linear(params, rng, "dec0.", spec.bottleneck_dim, h);
      add_linear(params, rng, "dec1.", h, width);
      return params;
    }
  }
  const std::size_t head_in = spec.n_message_layers == 0 ? spec.in_dim : h;
  add_linear(params, rng, "head.", head_in, spec.out_dim);
  return params;
}

// ---------------------------------------------------------------------------
// Graph tensors

GraphTensors make_graph_tensors(std::size_t n_nodes, const EdgeIndex& edges) {
  GraphTensors g;
  g.n_nodes = n_nodes;
  g.edges = edges;
  g.edges.n_nodes = n_nodes;
  g.edge_onehot = edge_onehot(edges, 2);

  // Self-looped edge list, kept in (dst, src) order.
  g.edges_with_self.n_nodes = n_nodes;
  std::vector<std::size_t> in_degree(n_nodes, 0);
  for (auto d : edges.dst) ++in_degree[d];
  std::size_t e = 0;
  for (std::uint32_t i = 0; i < n_nodes; ++i) {
    bool self_done = false;
    for (; e < edges.size() && edges.dst[e] == i; ++e) {
      if (!self_done && edges.src[e] > i) {
        g.edges_with_self.src.push_back(i);
        g.edges_with_self.dst.push_back(i);
        g.edges_with_self.edge_class.push_back(EdgeClass::kSameTrack);
        self_done = true;
      }
      g.edges_with_self.src.push_back(edges.src[e]);
      g.edges_with_self.dst.push_back(i);
      g.edges_with_self.edge_class.push_back(edges.edge_class[e]);
    }
    if (!self_done) {
      g.edges_with_self.src.push_back(i);
      g.edges_with_self.dst.push_back(i);
      g.edges_with_self.edge_class.push_back(EdgeClass::kSameTrack);
    }
  }
  if (e != edges.size()) throw InvalidArgument("make_graph_tensors: edges must be sorted by destination");

  std::vector<CsrMatrix::Triplet> norm, adj;
  norm.reserve(edges.size() + n_nodes);
  adj.reserve(edges.size());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto s = edges.src[k], d = edges.dst[k];
    norm.push_back({d, s, 1.0 / std::sqrt(static_cast<double>((in_degree[d] + 1) * (in_degree[s] + 1)))});
    adj.push_back({d, s, 1.0});
  }
  for (std::uint32_t i = 0; i < n_nodes; ++i) norm.push_back({i, i, 1.0 / static_cast<double>(in_degree[i] + 1)});
  g.gcn_operator = CsrMatrix::from_triplets(n_nodes, n_nodes, std::move(norm));
  g.adjacency = CsrMatrix::from_triplets(n_nodes, n_nodes, std::move(adj));
  return g;
}

GraphTensors make_graph_tensors(const ScanGraph& graph) {
  return make_graph_tensors(graph.n_nodes(), graph.edge_index());
}

// ---------------------------------------------------------------------------
// Layers

Tensor linear(Tape& tape, const Tensor& x, const LinearWeights& w) { return add(tape, matmul(tape, x, w.w), w.b); }

namespace {

struct TransformerAttention {
  Tensor alpha;
  Tensor edge_embed;
};

TransformerAttention transformer_attention(Tape& tape, const Tensor& h, const EdgeIndex& edges,
                                           const Tensor& edge_onehot, const TransformerWeights& w,
                                           std::size_t n_heads) {
  const std::size_t head_dim = w.wq.cols() / n_heads;
  Tensor q = add(tape, matmul(tape, h, w.wq), w.bq);
  Tensor k = add(tape, matmul(tape, h, w.wk), w.bk);
  Tensor edge_embed = matmul(tape, edge_onehot, w.we);
  Tensor q_e = gather_rows(tape, q, edges.dst);
  Tensor k_e = add(tape, gather_rows(tape, k, edges.src), edge_embed);
  Tensor logits = scale(tape, sum_blocks(tape, mul(tape, q_e, k_e), n_heads),
                        1.0 / std::sqrt(static_cast<double>(head_dim)));
  return {segment_softmax(tape, logits, edges.dst, h.rows()), edge_embed};
}

struct GatAttention {
  Tensor alpha;
  Tensor wh;
};

GatAttention gat_scores(Tape& tape, const Tensor& h, const EdgeIndex& edges, const GatWeights& w,
                        std::size_t n_heads, double slope) {
  Tensor wh = matmul(tape, h, w.w);
  Tensor score_dst = sum_blocks(tape, mul(tape, wh, w.att_dst), n_heads);
  Tensor score_src = sum_blocks(tape, mul(tape, wh, w.att_src), n_heads);
  Tensor logits =
      leaky_relu(tape, add(tape, gather_rows(tape, score_dst, edges.dst), gather_rows(tape, score_src, edges.src)),
                 slope);
  return {segment_softmax(tape, logits, edges.dst, h.rows()), wh};
}

void check_heads(const char* op, std::size_t width, std::size_t n_heads) {
  if (n_heads == 0 || width % n_heads != 0) throw InvalidSpec(std::string(op) + ": heads must divide the layer width");
}

}  // namespace

Tensor graph_transformer_attention(Tape& tape, const Tensor& h, const EdgeIndex& edges, const Tensor& edge_onehot,
                                   const TransformerWeights& w, std::size_t n_heads) {
  check_heads("graph_transformer_attention", w.wq.cols(), n_heads);
  return transformer_attention(tape, h, edges, edge_onehot, w, n_heads).alpha;
}

Tensor graph_transformer_layer(Tape& tape, const Tensor& h, const EdgeIndex& edges, const Tensor& edge_onehot,
                               const TransformerWeights& w, std::size_t n_heads) {
  const std::size_t out_dim = w.wq.cols();
  check_heads("graph_transformer_layer", out_dim, n_heads);
  if (edge_onehot.rows() != edges.size()) throw DimensionError("graph_transformer_layer: one edge attribute per edge");
  Tensor skip = add(tape, matmul(tape, h, w.ws), w.bs);
  if (edges.size() == 0) return skip;

  auto [alpha, edge_embed] = transformer_attention(tape, h, edges, edge_onehot, w, n_heads);
  Tensor v = add(tape, matmul(tape, h, w.wv), w.bv);
  Tensor v_e = add(tape, gather_rows(tape, v, edges.src), edge_embed);
  Tensor messages = mul(tape, v_e, repeat_blocks(tape, alpha, out_dim / n_heads));
  return add(tape, skip, segment_sum(tape, messages, edges.dst, h.rows()));
}

Tensor gat_attention(Tape& tape, const Tensor& h, const EdgeIndex& edges_with_self, const GatWeights& w,
                     std::size_t n_heads, double slope) {
  check_heads("gat_attention", w.w.cols(), n_heads);
  return gat_scores(tape, h, edges_with_self, w, n_heads, slope).alpha;
}

Tensor gat_layer(Tape& tape, const Tensor& h, const EdgeIndex& edges_with_self, const GatWeights& w,
                 std::size_t n_heads, double slope) {
  const std::size_t out_dim = w.w.cols();
  check_heads("gat_layer", out_dim, n_heads);
  auto [alpha, wh] = gat_scores(tape, h, edges_with_self, w, n_heads, slope);
  Tensor messages =
      mul(tape, gather_rows(tape, wh, edges_with_self.src), repeat_blocks(tape, alpha, out_dim / n_heads));
  return add(tape, segment_sum(tape, messages, edges_with_self.dst, h.rows()), w.bias);
}

Tensor gcn_layer(Tape& tape, const Tensor& h, const CsrMatrix& gcn_operator, const LinearWeights& w) {
  return add(tape, spmm(tape, gcn_operator, matmul(tape, h, w.w)), w.b);
}

Tensor gin_layer(Tape& tape, const Tensor& h, const CsrMatrix& adjacency, const GinWeights& w) {
  Tensor combined = add(tape, add(tape, h, mul_scalar(tape, h, w.eps)), spmm(tape, adjacency, h));
  return linear(tape, relu(tape, linear(tape, combined, w.mlp1)), w.mlp2);
}

TransformerWeights transformer_weights(const ModelParams& p, const std::string& prefix) {
  return {p.get(prefix + "wq"), p.get(prefix + "bq"), p.get(prefix + "wk"), p.get(prefix + "bk"), p.get(prefix + "wv"),
          p.get(prefix + "bv"), p.get(prefix + "we"), p.get(prefix + "ws"), p.get(prefix + "bs")};
}

GatWeights gat_weights(const ModelParams& p, const std::string& prefix) {
  return {p.get(prefix + "w"), p.get(prefix + "att_dst"), p.get(prefix + "att_src"), p.get(prefix + "bias")};
}

LinearWeights linear_weights(const ModelParams& p, const std::string& prefix) {
  return {p.get(prefix + "w"), p.get(prefix + "b")};
}

GinWeights gin_weights(const ModelParams& p, const std::string& prefix) {
  return {p.get(prefix + "eps"), linear_weights(p, prefix + "mlp1."), linear_weights(p, prefix + "mlp2.")};
}

// ---------------------------------------------------------------------------
// Models

Tensor fc_forward(Tape& tape, const ModelSpec& spec, const ModelParams& params, const Tensor& x) {
  Tensor h = x;
  for (std::size_t l = 0; l < spec.n_message_layers; ++l) {
    h = activate(tape, linear(tape, h, linear_weights(params, "dense" + std::to_string(l) + ".")), spec.activation);
  }
  return linear(tape, h, linear_weights(params, "head."));
}

Tensor autoencoder_forward(Tape& tape, const ModelSpec& spec, const ModelParams& params, const Tensor& xy) {
  Tensor h = activate(tape, linear(tape, xy, linear_weights(params, "enc0.")), spec.activation);
  Tensor code = linear(tape, h, linear_weights(params, "enc1."));
  h = activate(tape, linear(tape, code, linear_weights(params, "dec0.")), spec.activation);
  return linear(tape, h, linear_weights(params, "dec1."));
}

Tensor forward(Tape& tape, const ModelSpec& spec, const ModelParams& params, const GraphTensors& graph,
               const Tensor& input) {
  if (input.rank() != 2 || input.cols() != spec.input_width()) {
    std::ostringstream msg;
    msg << "forward: model '" << to_string(spec.kind) << "' expects " << spec.input_width()
        << " input columns, got " << shape_string(input.shape());
    throw DimensionError(msg.str());
  }
  if (input.rows() != graph.n_nodes) {
    throw DimensionError("forward: input has " + std::to_string(input.rows()) + " rows but the graph has " +
                         std::to_string(graph.n_nodes) + " nodes");
  }
  if (spec.kind == ModelKind::kFc) return fc_forward(tape, spec, params, input);
  if (spec.kind == ModelKind::kAutoencoder) return autoencoder_forward(tape, spec, params, input);

  Tensor h = input;
  for (std::size_t l = 0; l < spec.n_message_layers; ++l) {
    const auto p = layer_prefix(l);
    switch (spec.kind) {
      case ModelKind::kGraphTransformer:
        h = graph_transformer_layer(tape, h, graph.edges, graph.edge_onehot, transformer_weights(params, p),
                                    spec.n_heads);
        break;
      case ModelKind::kGat:
        h = gat_layer(tape, h, graph.edges_with_self, gat_weights(params, p), spec.n_heads, spec.leaky_slope);
        break;
      case ModelKind::kGcn:
        h = gcn_layer(tape, h, graph.gcn_operator, linear_weights(params, p));
        break;
      case ModelKind::kGin:
        h = gin_layer(tape, h, graph.adjacency, gin_weights(params, p));
        break;
      default:
        break;
    }
    h = activate(tape, h, spec.activation);
  }
  return linear(tape, h, linear_weights(params, "head."));
}

Matrix predict(const ModelSpec& spec, const ModelParams& params, const GraphTensors& graph, const Matrix& features,
               const Matrix* standardized_labels) {
  if (features.cols != spec.in_dim) {
    throw DimensionError("predict: model expects " + std::to_string(spec.in_dim) + " features, layer has " +
                         std::to_string(features.cols));
  }
  Tape tape(false);
  Tensor input = Tensor::from_matrix(features);
  if (spec.kind == ModelKind::kAutoencoder) {
    if (standardized_labels == nullptr) throw InvalidArgument("predict: the autoencoder needs the observed labels");
    const Tensor parts[] = {input, Tensor::from_matrix(*standardized_labels)};
    Tensor out = forward(tape, spec, params, graph, concat(tape, parts));
    return slice_cols(tape, out, spec.in_dim, spec.in_dim + spec.out_dim).to_matrix();
  }
  return forward(tape, spec, params, graph, input).to_matrix();
}

Matrix predict(const ModelSpec& spec, const ModelParams& params, const ScanGraph& graph,
               const Matrix* standardized_labels) {
  return predict(spec, params, make_graph_tensors(graph), graph.scan.features, standardized_labels);
}

}  // namespace meltgraph
