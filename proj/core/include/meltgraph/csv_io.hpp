#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "meltgraph/anomaly.hpp"
#include "meltgraph/graph_build.hpp"
#include "meltgraph/scan_synth.hpp"

namespace meltgraph {

/// Shortest round-trip decimal, independent of the C++ locale.
std::string format_number(double value);

inline constexpr std::string_view kLayerCsvHeader =
    "node_id,track_id,x_mm,y_mm,power,scan_direction,node_number,track_number,size,shape,intensity,spatter,anomaly";

std::string layer_to_csv(const LayerScan& scan);
LayerScan layer_from_csv(std::string_view text);

std::string edges_to_csv(std::span<const Edge> edges, std::span<const EdgeClass> classes);
std::string loss_history_to_csv(std::span<const double> losses);
std::string scores_to_csv(const LayerScan& scan, const AnomalyScores& scores, double threshold);
std::string pr_curve_to_csv(std::span<const PrPoint> curve);
std::string qq_to_csv(std::span<const QqPoint> nominal, std::span<const QqPoint> anomalous);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace meltgraph
