#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "meltgraph/anomaly.hpp"
#include "meltgraph_cli/config.hpp"

namespace meltgraph::cli {

namespace fs = std::filesystem;

enum class Split { kTrain, kEval };

/// Layers of one split as listed in a dataset manifest.
std::vector<LayerScan> load_split(const fs::path& dataset, Split split);

/// Writes train_XX.csv, eval_XX.csv and manifest.json into `out`.
void cmd_generate(const RunConfig& config, const fs::path& out, bool force);

/// Writes model.json and loss.csv into `out`.
void cmd_train(const RunConfig& config, const fs::path& dataset, const fs::path& out, bool force,
               Split split = Split::kTrain);

/// For every variant writes report_<variant>.json, pr_<variant>.csv,
/// qq_<variant>.csv and scores_<variant>_eval_XX.csv into `out`.
void cmd_evaluate(const RunConfig& config, const fs::path& dataset, const fs::path& model_file, const fs::path& out,
                  std::span<const ScoreVariant> variants, bool force);

/// Row labels of the comparison table, in output order.
const std::vector<std::string>& comparison_rows();

/// Trains each requested model kind on the dataset and writes one row per
/// model to `out_csv`. `rows` empty selects all of comparison_rows().
void cmd_compare(const RunConfig& config, const fs::path& dataset, const fs::path& out_csv,
                 std::span<const std::string> rows, std::size_t jobs, bool force);

}  // namespace meltgraph::cli
