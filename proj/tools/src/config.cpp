#include "meltgraph_cli/config.hpp"

#include <initializer_list>
#include <nlohmann/json.hpp>

#include "meltgraph/csv_io.hpp"
#include "meltgraph/error.hpp"

namespace meltgraph::cli {
namespace {

using nlohmann::json;

void reject_unknown(const json& section, std::string_view where, std::initializer_list<std::string_view> known) {
  if (!section.is_object()) {
    throw InvalidSpec(where.empty() ? "config: document must be an object"
                                    : "config: '" + std::string(where) + "' must be an object");
  }
  for (const auto& item : section.items()) {
    bool found = false;
    for (auto k : known) found = found || item.key() == k;
    if (!found) {
      const std::string path = where.empty() ? item.key() : std::string(where) + "." + item.key();
      throw InvalidSpec("config: unknown key '" + path + "'");
    }
  }
}

template <typename T>
void read(const json& section, const char* key, T& target) {
  if (section.contains(key)) target = section.at(key).get<T>();
}

void read_range(const json& section, const char* key, IntRange& target) {
  if (!section.contains(key)) return;
  const auto& r = section.at(key);
  if (!r.is_array() || r.size() != 2) throw InvalidSpec(std::string("config: '") + key + "' must be [min, max]");
  target = {r[0].get<std::int64_t>(), r[1].get<std::int64_t>()};
}

void parse_layer(const json& j, LayerSpec& s) {
  reject_unknown(j, "layer",
                 {"width_mm", "height_mm", "hatch_spacing_mm", "node_spacing_mm", "pwm_period_nodes", "pwm_duty",
                  "noise_sigma", "fluctuation_ratio", "fluctuation_correlation", "integer_spatter"});
  read(j, "width_mm", s.width_mm);
  read(j, "height_mm", s.height_mm);
  read(j, "hatch_spacing_mm", s.hatch_spacing_mm);
  read(j, "node_spacing_mm", s.node_spacing_mm);
  read(j, "pwm_period_nodes", s.pwm_period_nodes);
  read(j, "pwm_duty", s.pwm_duty);
  read(j, "noise_sigma", s.noise_sigma);
  read(j, "fluctuation_ratio", s.fluctuation_ratio);
  read(j, "fluctuation_correlation", s.fluctuation_correlation);
  read(j, "integer_spatter", s.integer_spatter);
}

void parse_anomaly(const json& j, AnomalySpec& s) {
  reject_unknown(j, "anomaly",
                 {"n_events", "run_length_nodes", "track_span", "intensity_scale", "spatter_boost", "target_imbalance"});
  if (j.contains("n_events")) {
    const auto& n = j.at("n_events");
    s.n_events = n.is_null() ? std::nullopt : std::optional<std::size_t>(n.get<std::size_t>());
  }
  read_range(j, "run_length_nodes", s.run_length_nodes);
  read_range(j, "track_span", s.track_span);
  read(j, "intensity_scale", s.intensity_scale);
  read(j, "spatter_boost", s.spatter_boost);
  read(j, "target_imbalance", s.target_imbalance);
}

void parse_model(const json& j, ModelSpec& s) {
  reject_unknown(j, "model",
                 {"kind", "hidden_dim", "n_message_layers", "n_heads", "leaky_slope", "eps_learnable", "activation",
                  "bottleneck_dim"});
  if (j.contains("kind")) s.kind = parse_model_kind(j.at("kind").get<std::string>());
  read(j, "hidden_dim", s.hidden_dim);
  read(j, "n_message_layers", s.n_message_layers);
  read(j, "n_heads", s.n_heads);
  read(j, "leaky_slope", s.leaky_slope);
  read(j, "eps_learnable", s.eps_learnable);
  if (j.contains("activation")) s.activation = parse_activation(j.at("activation").get<std::string>());
  read(j, "bottleneck_dim", s.bottleneck_dim);
}

void parse_train(const json& j, TrainConfig& s) {
  reject_unknown(j, "train", {"learning_rate", "beta1", "beta2", "eps_adam", "epochs", "graphs_per_step"});
  read(j, "learning_rate", s.learning_rate);
  read(j, "beta1", s.beta1);
  read(j, "beta2", s.beta2);
  read(j, "eps_adam", s.eps_adam);
  read(j, "epochs", s.epochs);
  read(j, "graphs_per_step", s.graphs_per_step);
}

void parse_graph(const json& j, GraphOptions& s) {
  reject_unknown(j, "graph", {"k", "self_loops", "smoothing_passes"});
  read(j, "k", s.k);
  read(j, "self_loops", s.self_loops);
  read(j, "smoothing_passes", s.smoothing_passes);
}

ThresholdMode parse_threshold_mode(std::string_view name) {
  if (name == "eval") return ThresholdMode::kEval;
  if (name == "holdout") return ThresholdMode::kHoldout;
  throw InvalidSpec("config: unknown threshold_mode '" + std::string(name) + "'");
}

void parse_eval(const json& j, EvalOptions& s) {
  reject_unknown(j, "eval", {"variant", "threshold_mode", "two_sided", "importance_repeats"});
  if (j.contains("variant")) s.scoring.variant = parse_score_variant(j.at("variant").get<std::string>());
  if (j.contains("threshold_mode")) s.threshold_mode = parse_threshold_mode(j.at("threshold_mode").get<std::string>());
  read(j, "two_sided", s.two_sided);
  read(j, "importance_repeats", s.importance_repeats);
}

}  // namespace

void RunConfig::propagate_seed() {
  data.seed = seed;
  train.seed = seed;
  eval.importance_seed = seed;
}

RunConfig parse_config(std::string_view json_text) {
  RunConfig config;
  try {
    const json doc = json::parse(json_text);
    reject_unknown(doc, "", {"seed", "train_layers", "eval_layers", "layer", "anomaly", "graph", "model", "train",
                                   "eval"});
    read(doc, "seed", config.seed);
    read(doc, "train_layers", config.data.train_layers);
    read(doc, "eval_layers", config.data.eval_layers);
    if (doc.contains("layer")) parse_layer(doc.at("layer"), config.data.layer);
    if (doc.contains("anomaly")) parse_anomaly(doc.at("anomaly"), config.data.anomaly);
    if (doc.contains("graph")) parse_graph(doc.at("graph"), config.graph);
    if (doc.contains("model")) parse_model(doc.at("model"), config.model);
    if (doc.contains("train")) parse_train(doc.at("train"), config.train);
    if (doc.contains("eval")) parse_eval(doc.at("eval"), config.eval);
  } catch (const json::exception& e) {
    throw InvalidSpec(std::string("config: ") + e.what());
  }
  config.eval.scoring.smoothing_passes = config.graph.smoothing_passes;
  config.propagate_seed();
  config.data.layer.validate();
  config.data.anomaly.validate();
  config.model.validate();
  config.train.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

std::string config_to_json(const RunConfig& c) {
  const auto& l = c.data.layer;
  const auto& a = c.data.anomaly;
  const json doc = {
      {"seed", c.seed},
      {"train_layers", c.data.train_layers},
      {"eval_layers", c.data.eval_layers},
      {"layer",
       {{"width_mm", l.width_mm},
        {"height_mm", l.height_mm},
        {"hatch_spacing_mm", l.hatch_spacing_mm},
        {"node_spacing_mm", l.node_spacing_mm},
        {"pwm_period_nodes", l.pwm_period_nodes},
        {"pwm_duty", l.pwm_duty},
        {"noise_sigma", l.noise_sigma},
        {"fluctuation_ratio", l.fluctuation_ratio},
        {"fluctuation_correlation", l.fluctuation_correlation},
        {"integer_spatter", l.integer_spatter}}},
      {"anomaly",
       {{"n_events", a.n_events ? json(*a.n_events) : json(nullptr)},
        {"run_length_nodes", {a.run_length_nodes.min, a.run_length_nodes.max}},
        {"track_span", {a.track_span.min, a.track_span.max}},
        {"intensity_scale", a.intensity_scale},
        {"spatter_boost", a.spatter_boost},
        {"target_imbalance", a.target_imbalance}}},
      {"graph", {{"k", c.graph.k}, {"self_loops", c.graph.self_loops}, {"smoothing_passes", c.graph.smoothing_passes}}},
      {"model",
       {{"kind", to_string(c.model.kind)},
        {"hidden_dim", c.model.hidden_dim},
        {"n_message_layers", c.model.n_message_layers},
        {"n_heads", c.model.n_heads},
        {"leaky_slope", c.model.leaky_slope},
        {"eps_learnable", c.model.eps_learnable},
        {"activation", to_string(c.model.activation)},
        {"bottleneck_dim", c.model.bottleneck_dim}}},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"beta1", c.train.beta1},
        {"beta2", c.train.beta2},
        {"eps_adam", c.train.eps_adam},
        {"epochs", c.train.epochs},
        {"graphs_per_step", c.train.graphs_per_step}}},
      {"eval",
       {{"variant", to_string(c.eval.scoring.variant)},
        {"threshold_mode", c.eval.threshold_mode == ThresholdMode::kEval ? "eval" : "holdout"},
        {"two_sided", c.eval.two_sided},
        {"importance_repeats", c.eval.importance_repeats}}}};
  return doc.dump(2) + "\n";
}

}  // namespace meltgraph::cli
