#pragma once

// Synthetic laser powder-bed-fusion layers: serpentine scan paths with a
// pulse-width-modulated laser, melt-pool observations driven by the laser
// inputs, and injected runs of reduced-signal defects.

#include <cstdint>
#include <optional>
#include <vector>

#include "meltgraph/matrix.hpp"

namespace meltgraph {

/// Input feature columns of LayerScan::features.
enum FeatureColumn : std::size_t { kPower = 0, kScanDirection = 1, kNodeNumber = 2, kTrackNumber = 3 };
inline constexpr std::size_t kNumFeatures = 4;

/// Melt-pool channels of LayerScan::labels.
enum MeltChannel : std::size_t { kSize = 0, kShape = 1, kIntensity = 2, kSpatter = 3 };
inline constexpr std::size_t kNumChannels = 4;

inline constexpr const char* kFeatureNames[kNumFeatures] = {"power", "scan_direction", "node_number",
                                                            "track_number"};
inline constexpr const char* kChannelNames[kNumChannels] = {"size", "shape", "intensity", "spatter"};

struct LayerSpec {
  double width_mm = 4.0;
  double height_mm = 5.0;
  double hatch_spacing_mm = 0.1;
  double node_spacing_mm = 0.04;
  std::size_t pwm_period_nodes = 8;
  double pwm_duty = 0.75;
  double noise_sigma = 0.1;
  // Scan-correlated process fluctuation that trades melt-pool size against
  // intensity. Its standard deviation is fluctuation_ratio * noise_sigma.
  double fluctuation_ratio = 2.0;
  double fluctuation_correlation = 0.9;
  // Draw spatter as a Poisson count instead of its expected value plus noise.
  bool integer_spatter = false;
  std::uint64_t seed = 0;

  /// Throws InvalidSpec when a field is out of range.
  void validate() const;
  std::size_t track_count() const;
  std::size_t nodes_per_track() const;
  std::size_t node_count() const { return track_count() * nodes_per_track(); }
};

/// One layer as a node table in scan order.
struct LayerScan {
  Matrix positions;                        // N x 2, millimetres
  std::vector<std::int64_t> track_id;      // 0-based
  std::vector<std::int64_t> node_id;       // 0-based scan order
  Matrix features;                         // N x kNumFeatures
  Matrix labels;                           // N x kNumChannels
  std::vector<std::uint8_t> anomaly_mask;  // 1 = anomalous

  std::size_t size() const { return node_id.size(); }
  std::size_t anomaly_count() const;
  bool operator==(const LayerScan&) const = default;
};

struct IntRange {
  std::int64_t min = 0;
  std::int64_t max = 0;
};

struct AnomalySpec {
  // nullopt places events until node_count / target_imbalance nodes are anomalous.
  std::optional<std::size_t> n_events;
  IntRange run_length_nodes{10, 40};
  IntRange track_span{1, 3};
  double intensity_scale = 0.6;
  double spatter_boost = 0.0;
  double target_imbalance = 40.6;

  void validate() const;
};

/// Channel values of a node with the laser off and no noise.
std::vector<double> laser_off_baseline();

/// Noise-free melt-pool response for one node.
std::vector<double> melt_pool_response(double power, double direction, double node_number, double track_number);

LayerScan generate_scan_path(const LayerSpec& spec);

/// Fills labels from the forward model plus noise seeded by spec.seed.
LayerScan generate_melt_signal(LayerScan scan, const LayerSpec& spec);

/// Scales intensity and size on contiguous runs spanning adjacent tracks.
/// Features are never modified. Throws InvalidArgument if the requested
/// number of events cannot be placed.
LayerScan inject_anomalies(LayerScan scan, const AnomalySpec& spec, std::uint64_t seed);

/// Largest number of disjoint minimal events a layer can hold.
std::size_t anomaly_capacity(const LayerScan& scan, const AnomalySpec& spec);

struct DatasetConfig {
  LayerSpec layer;
  AnomalySpec anomaly;
  std::size_t train_layers = 8;
  std::size_t eval_layers = 4;
  std::uint64_t seed = 0;
};

struct Dataset {
  std::vector<LayerScan> train;
  std::vector<LayerScan> eval;
};

/// Seed of the i-th layer of a split (0 = train, 1 = eval).
std::uint64_t layer_seed(std::uint64_t base, int split, std::size_t index);

Dataset build_dataset(const DatasetConfig& config);

}  // namespace meltgraph
