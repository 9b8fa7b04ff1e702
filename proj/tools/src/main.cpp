#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "meltgraph/error.hpp"
#include "meltgraph_cli/commands.hpp"

namespace {

using namespace meltgraph;
using namespace meltgraph::cli;

constexpr int kExitConfig = 2;
constexpr int kExitDataContract = 3;
constexpr int kExitNumerical = 4;

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("meltgraph");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("MELTGRAPH_LOG")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
}

void tune_allocator() {
#if defined(__GLIBC__)
  // Training churns through large same-sized buffers; keep them on the heap.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--config", common.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", common.seed, "override the configuration seed");
  cmd->add_flag("--force", common.force, "overwrite existing outputs");
}

RunConfig resolve(const Common& common) {
  RunConfig config = common.config.empty() ? parse_config("{}") : load_config(common.config);
  if (common.seed) {
    config.seed = *common.seed;
    config.propagate_seed();
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  configure_logging();

  CLI::App app{"Graph-based melt-pool anomaly detection on synthetic powder-bed layers"};
  app.require_subcommand(1);

  Common common;
  std::string out, data, model_file;
  std::optional<std::size_t> layers, eval_layers, epochs;
  std::string kind;
  std::string split = "train";
  std::vector<std::string> variants;
  std::vector<std::string> models;
  std::size_t jobs = 1;

  auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
  add_common(gen, common);
  gen->add_option("--out", out, "dataset directory")->required();
  gen->add_option("--layers", layers, "number of nominal training layers");
  gen->add_option("--eval-layers", eval_layers, "number of eval layers with injected anomalies");

  auto* trn = app.add_subcommand("train", "train a model on a dataset's nominal layers");
  add_common(trn, common);
  trn->add_option("--data", data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  trn->add_option("--out", out, "output directory for model.json and loss.csv")->required();
  trn->add_option("--model", kind, "model kind (graph_transformer, gat, gcn, gin, fc, autoencoder)");
  trn->add_option("--epochs", epochs, "override the epoch budget");
  trn->add_option("--split", split, "dataset split to train on")->check(CLI::IsMember({"train", "eval"}));

  auto* evl = app.add_subcommand("evaluate", "score eval layers and write reports and plot data");
  add_common(evl, common);
  evl->add_option("--data", data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  evl->add_option("--model-file", model_file, "model.json written by train")->required()->check(CLI::ExistingFile);
  evl->add_option("--out", out, "output directory")->required();
  evl->add_option("--variant", variants, "score variant(s): signed_smoothed, signed_raw, absolute, all")
      ->delimiter(',');

  auto* cmp = app.add_subcommand("compare", "train every model kind and write the comparison table");
  add_common(cmp, common);
  cmp->add_option("--data", data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  cmp->add_option("--out", out, "comparison CSV path")->required();
  cmp->add_option("--models", models, "subset of rows, e.g. fc,gcn")->delimiter(',');
  cmp->add_option("--epochs", epochs, "override the epoch budget");
  cmp->add_option("--jobs", jobs, "models trained in parallel")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    RunConfig config = resolve(common);
    if (epochs) config.train.epochs = *epochs;
    if (gen->parsed()) {
      if (layers) config.data.train_layers = *layers;
      if (eval_layers) config.data.eval_layers = *eval_layers;
      cmd_generate(config, out, common.force);
    } else if (trn->parsed()) {
      if (!kind.empty()) config.model.kind = parse_model_kind(kind);
      cmd_train(config, data, out, common.force, split == "eval" ? Split::kEval : Split::kTrain);
    } else if (evl->parsed()) {
      std::vector<ScoreVariant> selected;
      for (const auto& v : variants) {
        if (v == "all") {
          selected = {ScoreVariant::kSignedSmoothed, ScoreVariant::kAbsolute, ScoreVariant::kSignedRaw};
          break;
        }
        selected.push_back(parse_score_variant(v));
      }
      if (selected.empty()) selected.push_back(config.eval.scoring.variant);
      cmd_evaluate(config, data, model_file, out, selected, common.force);
    } else if (cmp->parsed()) {
      cmd_compare(config, data, out, models, jobs, common.force);
    }
  } catch (const InvalidSpec& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const DataContractError& e) {
    spdlog::error("{}", e.what());
    return kExitDataContract;
  } catch (const DimensionError& e) {
    spdlog::error("{}", e.what());
    return kExitDataContract;
  } catch (const NumericalError& e) {
    spdlog::error("{}", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
