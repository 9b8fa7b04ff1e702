#include "meltgraph_cli/commands.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <map>
#include <nlohmann/json.hpp>
#include <thread>

#include "meltgraph/csv_io.hpp"
#include "meltgraph/error.hpp"
#include "meltgraph/serialization.hpp"

namespace meltgraph::cli {
namespace {

using nlohmann::json;

std::string layer_file(Split split, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%02zu.csv", split == Split::kTrain ? "train" : "eval", index);
  return buf;
}

void prepare_output_dir(const fs::path& out, bool force) {
  std::error_code ec;
  if (fs::exists(out, ec)) {
    if (!fs::is_directory(out, ec)) throw IoError("'" + out.string() + "' exists and is not a directory");
    if (!force && !fs::is_empty(out, ec)) throw IoError("'" + out.string() + "' exists; pass --force to overwrite");
  }
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create '" + out.string() + "': " + ec.message());
}

void check_output_file(const fs::path& out, bool force) {
  std::error_code ec;
  if (!force && fs::exists(out, ec)) throw IoError("'" + out.string() + "' exists; pass --force to overwrite");
  if (out.has_parent_path()) fs::create_directories(out.parent_path(), ec);
}

std::vector<ScanGraph> build_graphs(std::vector<LayerScan> layers, const GraphOptions& options) {
  std::vector<ScanGraph> graphs;
  graphs.reserve(layers.size());
  for (auto& layer : layers) graphs.push_back(build_graph(std::move(layer), options));
  return graphs;
}

TrainedModel train_logged(const ModelSpec& spec, std::span<const ScanGraph> graphs, const TrainConfig& config) {
  spdlog::info("training {} for {} epochs on {} layers", to_string(spec.kind), config.epochs, graphs.size());
  auto log_epoch = [&](std::size_t epoch, double loss) {
    if ((epoch + 1) % 10 == 0 || epoch + 1 == config.epochs) {
      spdlog::debug("{} epoch {} loss {}", to_string(spec.kind), epoch + 1, format_number(loss));
    }
  };
  return train(spec, graphs, config, log_epoch);
}

json layer_entry(const std::string& file, std::uint64_t seed, const LayerScan& scan) {
  return {{"file", file}, {"seed", seed}, {"nodes", scan.size()}, {"anomalous", scan.anomaly_count()}};
}

}  // namespace

std::vector<LayerScan> load_split(const fs::path& dataset, Split split) {
  json manifest;
  try {
    manifest = json::parse(read_file(dataset / "manifest.json"));
  } catch (const json::exception& e) {
    throw DataContractError("malformed manifest in '" + dataset.string() + "': " + e.what());
  }
  const char* key = split == Split::kTrain ? "train" : "eval";
  if (!manifest.contains(key) || !manifest.at(key).is_array()) {
    throw DataContractError("manifest has no '" + std::string(key) + "' list");
  }
  std::vector<LayerScan> layers;
  for (const auto& entry : manifest.at(key)) {
    const auto file = entry.at("file").get<std::string>();
    layers.push_back(layer_from_csv(read_file(dataset / file)));
    spdlog::debug("loaded {} ({} nodes)", file, layers.back().size());
  }
  return layers;
}

void cmd_generate(const RunConfig& config, const fs::path& out, bool force) {
  prepare_output_dir(out, force);
  const Dataset dataset = build_dataset(config.data);
  json manifest = {{"seed", config.seed}, {"config", json::parse(config_to_json(config))}};
  json train_entries = json::array();
  json eval_entries = json::array();
  for (std::size_t i = 0; i < dataset.train.size(); ++i) {
    const auto file = layer_file(Split::kTrain, i);
    write_file_atomic(out / file, layer_to_csv(dataset.train[i]));
    train_entries.push_back(layer_entry(file, layer_seed(config.data.seed, 0, i), dataset.train[i]));
  }
  for (std::size_t i = 0; i < dataset.eval.size(); ++i) {
    const auto file = layer_file(Split::kEval, i);
    write_file_atomic(out / file, layer_to_csv(dataset.eval[i]));
    eval_entries.push_back(layer_entry(file, layer_seed(config.data.seed, 1, i), dataset.eval[i]));
  }
  manifest["train"] = std::move(train_entries);
  manifest["eval"] = std::move(eval_entries);
  write_file_atomic(out / "manifest.json", manifest.dump(2) + "\n");
  spdlog::info("wrote {} train and {} eval layers to {}", dataset.train.size(), dataset.eval.size(), out.string());
}

void cmd_train(const RunConfig& config, const fs::path& dataset, const fs::path& out, bool force, Split split) {
  auto layers = load_split(dataset, split);
  if (layers.empty()) throw InvalidArgument("no layers to train on in '" + dataset.string() + "'");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (const auto n = layers[i].anomaly_count(); n > 0) {
      throw DataContractError(layer_file(split, i) + " has " + std::to_string(n) +
                              " anomalous nodes; training requires nominal layers only");
    }
  }
  prepare_output_dir(out, force);
  const auto graphs = build_graphs(std::move(layers), config.graph);
  const TrainedModel model = train_logged(config.model, graphs, config.train);
  write_file_atomic(out / "model.json", model_to_json(model));
  write_file_atomic(out / "loss.csv", loss_history_to_csv(model.loss_history));
  if (!model.loss_history.empty()) {
    spdlog::info("final loss {}", format_number(model.loss_history.back()));
  }
}

void cmd_evaluate(const RunConfig& config, const fs::path& dataset, const fs::path& model_file, const fs::path& out,
                  std::span<const ScoreVariant> variants, bool force) {
  const TrainedModel model = model_from_json(read_file(model_file));
  const auto graphs = build_graphs(load_split(dataset, Split::kEval), config.graph);
  if (graphs.empty()) throw InvalidArgument("dataset '" + dataset.string() + "' has no eval layers");
  prepare_output_dir(out, force);
  for (const auto variant : variants) {
    EvalOptions options = config.eval;
    options.scoring.variant = variant;
    const EvalReport report = evaluate_detection(model, graphs, options);
    const std::string tag(to_string(variant));
    write_file_atomic(out / ("report_" + tag + ".json"), report_to_json(report) + "\n");
    write_file_atomic(out / ("pr_" + tag + ".csv"), pr_curve_to_csv(report.pr_curve));
    write_file_atomic(out / ("qq_" + tag + ".csv"), qq_to_csv(report.qq_nominal, report.qq_anomalous));
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      write_file_atomic(out / ("scores_" + tag + "_" + layer_file(Split::kEval, i)),
                        scores_to_csv(graphs[i].scan, report.layer_scores[i], report.threshold));
    }
    spdlog::info("{} {}: ap {} f1 {}", report.model, tag, format_number(report.ap), format_number(report.f1));
  }
}

const std::vector<std::string>& comparison_rows() {
  static const std::vector<std::string> rows = {"AE", "FC", "GAT", "GCN", "GIN", "Graph-T-A", "Graph-T-Z", "Graph-T"};
  return rows;
}

namespace {

struct RowPlan {
  ModelKind kind;
  ScoreVariant variant;
};

RowPlan plan_row(const std::string& row) {
  if (row == "AE") return {ModelKind::kAutoencoder, ScoreVariant::kSignedSmoothed};
  if (row == "FC") return {ModelKind::kFc, ScoreVariant::kSignedSmoothed};
  if (row == "GAT") return {ModelKind::kGat, ScoreVariant::kSignedSmoothed};
  if (row == "GCN") return {ModelKind::kGcn, ScoreVariant::kSignedSmoothed};
  if (row == "GIN") return {ModelKind::kGin, ScoreVariant::kSignedSmoothed};
  if (row == "Graph-T-A") return {ModelKind::kGraphTransformer, ScoreVariant::kAbsolute};
  if (row == "Graph-T-Z") return {ModelKind::kGraphTransformer, ScoreVariant::kSignedRaw};
  return {ModelKind::kGraphTransformer, ScoreVariant::kSignedSmoothed};
}

std::string canonical_row(const std::string& name) {
  std::string lower;
  for (char c : name) lower += static_cast<char>(c == '_' ? '-' : std::tolower(static_cast<unsigned char>(c)));
  static const std::map<std::string, std::string> aliases = {
      {"ae", "AE"},           {"autoencoder", "AE"},     {"fc", "FC"},
      {"gat", "GAT"},         {"gcn", "GCN"},            {"gin", "GIN"},
      {"graph-t-a", "Graph-T-A"}, {"graph-t-z", "Graph-T-Z"}, {"graph-t", "Graph-T"},
      {"graph-transformer", "Graph-T"}};
  const auto it = aliases.find(lower);
  if (it == aliases.end()) throw InvalidSpec("unknown model '" + name + "' for compare");
  return it->second;
}

}  // namespace

void cmd_compare(const RunConfig& config, const fs::path& dataset, const fs::path& out_csv,
                 std::span<const std::string> rows, std::size_t jobs, bool force) {
  std::vector<std::string> selected;
  for (const auto& r : rows) {
    const auto name = canonical_row(r);
    if (std::find(selected.begin(), selected.end(), name) == selected.end()) selected.push_back(name);
  }
  if (selected.empty()) selected = comparison_rows();
  std::vector<std::string> ordered;
  for (const auto& r : comparison_rows()) {
    if (std::find(selected.begin(), selected.end(), r) != selected.end()) ordered.push_back(r);
  }
  check_output_file(out_csv, force);

  const auto train_graphs = build_graphs(load_split(dataset, Split::kTrain), config.graph);
  const auto eval_graphs = build_graphs(load_split(dataset, Split::kEval), config.graph);
  if (eval_graphs.empty()) throw InvalidArgument("dataset '" + dataset.string() + "' has no eval layers");

  std::vector<ModelKind> kinds;
  for (const auto& r : ordered) {
    const auto kind = plan_row(r).kind;
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) kinds.push_back(kind);
  }

  // Each kind trains from the shared seed, so results do not depend on jobs.
  std::vector<TrainedModel> models(kinds.size());
  std::vector<std::exception_ptr> failures(kinds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < kinds.size(); i = next++) {
      try {
        ModelSpec spec = config.model;
        spec.kind = kinds[i];
        models[i] = train_logged(spec, train_graphs, config.train);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, kinds.size());
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  std::string csv = "model,ap,auroc,f1,fp,fn,tp,tn,loss\n";
  for (const auto& r : ordered) {
    const auto plan = plan_row(r);
    const auto k = static_cast<std::size_t>(std::find(kinds.begin(), kinds.end(), plan.kind) - kinds.begin());
    EvalOptions options = config.eval;
    options.scoring.variant = plan.variant;
    options.importance_repeats = 0;
    const EvalReport rep = evaluate_detection(models[k], eval_graphs, options);
    csv += r + ',' + format_number(rep.ap) + ',' + format_number(rep.auroc) + ',' + format_number(rep.f1) + ',' +
           std::to_string(rep.fp) + ',' + std::to_string(rep.fn) + ',' + std::to_string(rep.tp) + ',' +
           std::to_string(rep.tn) + ',' + format_number(rep.loss) + '\n';
    spdlog::info("{}: ap {} f1 {}", r, format_number(rep.ap), format_number(rep.f1));
  }
  write_file_atomic(out_csv, csv);
}

}  // namespace meltgraph::cli
