#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "meltgraph/graph_build.hpp"
#include "meltgraph/metrics.hpp"
#include "meltgraph/models.hpp"
#include "meltgraph/scan_synth.hpp"
#include "meltgraph/training.hpp"

namespace meltgraph::cli {

/// Everything a command needs besides paths. Read from a JSON document whose
/// sections mirror the member names; absent keys keep their defaults and
/// unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  DatasetConfig data;
  GraphOptions graph;
  ModelSpec model;
  TrainConfig train;
  EvalOptions eval;

  /// Copies `seed` into every seeded component.
  void propagate_seed();
};

RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const RunConfig& config);

}  // namespace meltgraph::cli
