#include "meltgraph/csv_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "meltgraph/error.hpp"

namespace meltgraph {
namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

[[noreturn]] void bad_row(std::size_t line, const std::string& what) {
  throw DataContractError("layer csv line " + std::to_string(line) + ": " + what);
}

template <typename T>
T parse_field(std::string_view field, std::size_t line, std::string_view column) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc{} || ptr != end || field.empty()) {
    bad_row(line, "cannot parse " + std::string(column) + " value '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw Error("format_number: conversion failed");
  return std::string(buf, ptr);
}

std::string layer_to_csv(const LayerScan& scan) {
  std::string out(kLayerCsvHeader);
  out += '\n';
  for (std::size_t i = 0; i < scan.size(); ++i) {
    out += std::to_string(scan.node_id[i]);
    out += ',';
    out += std::to_string(scan.track_id[i]);
    for (double v : scan.positions.row(i)) out += ',' + format_number(v);
    for (double v : scan.features.row(i)) out += ',' + format_number(v);
    for (double v : scan.labels.row(i)) out += ',' + format_number(v);
    out += scan.anomaly_mask[i] ? ",1\n" : ",0\n";
  }
  return out;
}

LayerScan layer_from_csv(std::string_view text) {
  const auto columns = split(kLayerCsvHeader, ',');
  std::vector<std::string_view> lines;
  for (auto line : split(text, '\n')) lines.push_back(trim_cr(line));
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || lines.front() != kLayerCsvHeader) {
    throw DataContractError("layer csv: header must be '" + std::string(kLayerCsvHeader) + "'");
  }

  const std::size_t n = lines.size() - 1;
  LayerScan scan;
  scan.positions = Matrix(n, 2);
  scan.features = Matrix(n, kNumFeatures);
  scan.labels = Matrix(n, kNumChannels);
  scan.track_id.resize(n);
  scan.node_id.resize(n);
  scan.anomaly_mask.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t line = i + 2;
    const auto fields = split(lines[i + 1], ',');
    if (fields.size() != columns.size()) {
      bad_row(line, "expected " + std::to_string(columns.size()) + " fields, got " + std::to_string(fields.size()));
    }
    scan.node_id[i] = parse_field<std::int64_t>(fields[0], line, columns[0]);
    if (scan.node_id[i] != static_cast<std::int64_t>(i)) bad_row(line, "node_id must equal the row index");
    scan.track_id[i] = parse_field<std::int64_t>(fields[1], line, columns[1]);
    std::size_t f = 2;
    for (std::size_t c = 0; c < 2; ++c, ++f) scan.positions(i, c) = parse_field<double>(fields[f], line, columns[f]);
    for (std::size_t c = 0; c < kNumFeatures; ++c, ++f) {
      scan.features(i, c) = parse_field<double>(fields[f], line, columns[f]);
    }
    for (std::size_t c = 0; c < kNumChannels; ++c, ++f) {
      scan.labels(i, c) = parse_field<double>(fields[f], line, columns[f]);
    }
    const auto flag = parse_field<int>(fields[f], line, columns[f]);
    if (flag != 0 && flag != 1) bad_row(line, "anomaly must be 0 or 1");
    scan.anomaly_mask[i] = static_cast<std::uint8_t>(flag);
  }
  return scan;
}

std::string edges_to_csv(std::span<const Edge> edges, std::span<const EdgeClass> classes) {
  if (edges.size() != classes.size()) throw DimensionError("edges_to_csv: one class per edge required");
  std::string out = "src,dst,class\n";
  for (std::size_t e = 0; e < edges.size(); ++e) {
    out += std::to_string(edges[e].u) + ',' + std::to_string(edges[e].v) + ',' +
           std::to_string(static_cast<int>(classes[e])) + '\n';
  }
  return out;
}

std::string loss_history_to_csv(std::span<const double> losses) {
  std::string out = "epoch,loss\n";
  for (std::size_t e = 0; e < losses.size(); ++e) out += std::to_string(e) + ',' + format_number(losses[e]) + '\n';
  return out;
}

std::string scores_to_csv(const LayerScan& scan, const AnomalyScores& scores, double threshold) {
  if (scores.z.size() != scan.size() || scores.z_smoothed.size() != scan.size()) {
    throw DimensionError("scores_to_csv: one score per node required");
  }
  std::string out = "node_id,z,z_smoothed,label,flagged\n";
  for (std::size_t i = 0; i < scan.size(); ++i) {
    out += std::to_string(scan.node_id[i]) + ',' + format_number(scores.z[i]) + ',' +
           format_number(scores.z_smoothed[i]) + (scan.anomaly_mask[i] ? ",1" : ",0") +
           (scores.z_smoothed[i] >= threshold ? ",1\n" : ",0\n");
  }
  return out;
}

std::string pr_curve_to_csv(std::span<const PrPoint> curve) {
  std::string out = "threshold,precision,recall\n";
  for (const auto& p : curve) {
    out += format_number(p.threshold) + ',' + format_number(p.precision) + ',' + format_number(p.recall) + '\n';
  }
  return out;
}

std::string qq_to_csv(std::span<const QqPoint> nominal, std::span<const QqPoint> anomalous) {
  std::string out = "group,theoretical,empirical\n";
  for (const auto& p : nominal) out += "nominal," + format_number(p.theoretical) + ',' + format_number(p.empirical) + '\n';
  for (const auto& p : anomalous) {
    out += "anomalous," + format_number(p.theoretical) + ',' + format_number(p.empirical) + '\n';
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return buffer.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "'");
  }
}

}  // namespace meltgraph
