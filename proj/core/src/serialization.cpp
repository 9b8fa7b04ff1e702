#include "meltgraph/serialization.hpp"

#include <nlohmann/json.hpp>

#include "meltgraph/error.hpp"

namespace meltgraph {
namespace {

using nlohmann::json;

constexpr std::string_view kModelFormat = "meltgraph-model";
constexpr int kModelVersion = 1;

json spec_json(const ModelSpec& spec) {
  return {{"kind", to_string(spec.kind)},
          {"in_dim", spec.in_dim},
          {"hidden_dim", spec.hidden_dim},
          {"out_dim", spec.out_dim},
          {"n_message_layers", spec.n_message_layers},
          {"n_heads", spec.n_heads},
          {"edge_dim", spec.edge_dim},
          {"leaky_slope", spec.leaky_slope},
          {"eps_learnable", spec.eps_learnable},
          {"activation", to_string(spec.activation)},
          {"bottleneck_dim", spec.bottleneck_dim}};
}

ModelSpec spec_from(const json& j) {
  ModelSpec spec;
  spec.kind = parse_model_kind(j.at("kind").get<std::string>());
  spec.in_dim = j.at("in_dim").get<std::size_t>();
  spec.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  spec.out_dim = j.at("out_dim").get<std::size_t>();
  spec.n_message_layers = j.at("n_message_layers").get<std::size_t>();
  spec.n_heads = j.at("n_heads").get<std::size_t>();
  spec.edge_dim = j.at("edge_dim").get<std::size_t>();
  spec.leaky_slope = j.at("leaky_slope").get<double>();
  spec.eps_learnable = j.at("eps_learnable").get<bool>();
  spec.activation = parse_activation(j.at("activation").get<std::string>());
  spec.bottleneck_dim = j.at("bottleneck_dim").get<std::size_t>();
  spec.validate();
  return spec;
}

}  // namespace

std::string model_spec_to_json(const ModelSpec& spec) { return spec_json(spec).dump(2); }

std::string model_to_json(const TrainedModel& model) {
  json params = json::array();
  for (const auto& [name, tensor] : model.params) {
    const auto values = tensor.values();
    params.push_back({{"name", name},
                      {"shape", tensor.shape()},
                      {"values", std::vector<double>(values.begin(), values.end())}});
  }
  const json doc = {{"format", kModelFormat},
                    {"version", kModelVersion},
                    {"spec", spec_json(model.spec)},
                    {"standardizer", {{"mean", model.standardizer.mean}, {"stddev", model.standardizer.stddev}}},
                    {"loss_history", model.loss_history},
                    {"params", params}};
  return doc.dump();
}

TrainedModel model_from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format").get<std::string>() != kModelFormat) throw DataContractError("not a meltgraph model file");
    if (doc.at("version").get<int>() != kModelVersion) {
      throw DataContractError("unsupported model file version " + doc.at("version").dump());
    }
    TrainedModel model;
    model.spec = spec_from(doc.at("spec"));
    model.standardizer.mean = doc.at("standardizer").at("mean").get<std::vector<double>>();
    model.standardizer.stddev = doc.at("standardizer").at("stddev").get<std::vector<double>>();
    model.loss_history = doc.at("loss_history").get<std::vector<double>>();

    const ModelParams expected = init_params(model.spec, 0);
    for (const auto& entry : doc.at("params")) {
      auto name = entry.at("name").get<std::string>();
      auto shape = entry.at("shape").get<Shape>();
      auto values = entry.at("values").get<std::vector<double>>();
      if (!expected.contains(name)) throw DataContractError("model file has unexpected parameter '" + name + "'");
      if (expected.get(name).shape() != shape) {
        throw DataContractError("parameter '" + name + "' has shape " + shape_string(shape) + ", expected " +
                                shape_string(expected.get(name).shape()));
      }
      model.params.add(std::move(name), Tensor::from_values(std::move(shape), std::move(values), true));
    }
    if (model.params.size() != expected.size()) throw DataContractError("model file is missing parameters");
    if (model.standardizer.mean.size() != model.spec.out_dim ||
        model.standardizer.stddev.size() != model.spec.out_dim) {
      throw DataContractError("standardizer width does not match the model output");
    }
    return model;
  } catch (const json::exception& e) {
    throw DataContractError(std::string("malformed model file: ") + e.what());
  }
}

std::string report_to_json(const EvalReport& report) {
  json importance = json::object();
  for (std::size_t f = 0; f < report.feature_importances.size() && f < kNumFeatures; ++f) {
    importance[kFeatureNames[f]] = {{"importance", report.feature_importances[f]},
                                    {"raw", report.feature_importances_raw[f]}};
  }
  const json doc = {{"model", report.model},
                    {"variant", report.variant},
                    {"ap", report.ap},
                    {"auroc", report.auroc},
                    {"f1", report.f1},
                    {"precision", report.precision},
                    {"recall", report.recall},
                    {"tp", report.tp},
                    {"fp", report.fp},
                    {"tn", report.tn},
                    {"fn", report.fn},
                    {"threshold", report.threshold},
                    {"loss", report.loss},
                    {"gaussian_fpr_estimate", report.gaussian_fpr_estimate},
                    {"empirical_fpr", report.empirical_fpr},
                    {"feature_importance", importance}};
  return doc.dump(2);
}

}  // namespace meltgraph
