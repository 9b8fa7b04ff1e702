#include "meltgraph/scan_synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "meltgraph/error.hpp"

namespace meltgraph {
namespace {

// floor(a / b) tolerant of representation error, e.g. 5.0 / 0.1.
std::size_t count_fitting(double length, double pitch) {
  return static_cast<std::size_t>(std::floor(length / pitch + 1e-9));
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream)));
}

struct TrackRange {
  std::size_t begin;
  std::size_t end;
  std::size_t size() const { return end - begin; }
};

std::vector<TrackRange> track_ranges(const LayerScan& scan) {
  std::vector<TrackRange> ranges;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    if (ranges.empty() || scan.track_id[i] != scan.track_id[ranges.back().begin]) {
      ranges.push_back({i, i + 1});
    } else {
      ranges.back().end = i + 1;
    }
  }
  return ranges;
}

std::int64_t uniform_int(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

}  // namespace

void LayerSpec::validate() const {
  auto fail = [](const std::string& what) { throw InvalidSpec("LayerSpec: " + what); };
  if (!(width_mm > 0) || !(height_mm > 0)) fail("width_mm and height_mm must be positive");
  if (!(hatch_spacing_mm > 0) || !(node_spacing_mm > 0)) fail("spacings must be positive");
  if (node_spacing_mm > hatch_spacing_mm) fail("node_spacing_mm must not exceed hatch_spacing_mm");
  if (pwm_period_nodes == 0) fail("pwm_period_nodes must be positive");
  if (!(pwm_duty > 0) || pwm_duty > 1) fail("pwm_duty must lie in (0, 1]");
  if (!(noise_sigma >= 0) || !std::isfinite(noise_sigma)) fail("noise_sigma must be non-negative");
  if (!(fluctuation_ratio >= 0) || !std::isfinite(fluctuation_ratio)) fail("fluctuation_ratio must be non-negative");
  if (!(fluctuation_correlation >= 0) || !(fluctuation_correlation < 1)) {
    fail("fluctuation_correlation must lie in [0, 1)");
  }
}

std::size_t LayerSpec::track_count() const { return count_fitting(height_mm, hatch_spacing_mm); }
std::size_t LayerSpec::nodes_per_track() const { return count_fitting(width_mm, node_spacing_mm); }

std::size_t LayerScan::anomaly_count() const {
  return static_cast<std::size_t>(std::count(anomaly_mask.begin(), anomaly_mask.end(), std::uint8_t{1}));
}

void AnomalySpec::validate() const {
  auto fail = [](const std::string& what) { throw InvalidSpec("AnomalySpec: " + what); };
  if (run_length_nodes.min < 1 || run_length_nodes.max < run_length_nodes.min) fail("bad run_length_nodes range");
  if (track_span.min < 1 || track_span.max < track_span.min) fail("bad track_span range");
  if (!(intensity_scale > 0) || intensity_scale > 1) fail("intensity_scale must lie in (0, 1]");
  if (!(spatter_boost >= 0) || !std::isfinite(spatter_boost)) fail("spatter_boost must be non-negative");
  if (!(target_imbalance > 0) || !std::isfinite(target_imbalance)) fail("target_imbalance must be positive");
}

std::vector<double> laser_off_baseline() { return melt_pool_response(0.0, 1.0, 0.0, 0.0); }

std::vector<double> melt_pool_response(double power, double direction, double node_number, double track_number) {
  std::vector<double> y(kNumChannels);
  y[kSize] = power * (0.8 + 0.1 * node_number) + 0.5;
  y[kShape] = 0.5 + power * (0.2 + 0.01 * direction);
  y[kIntensity] = power * (1.0 + 0.1 * std::sin(2.0 * std::numbers::pi * track_number)) + 0.5;
  y[kSpatter] = 0.5 + power;
  return y;
}

LayerScan generate_scan_path(const LayerSpec& spec) {
  spec.validate();
  const std::size_t tracks = spec.track_count();
  const std::size_t per_track = spec.nodes_per_track();
  const std::size_t n = tracks * per_track;
  if (n == 0) throw InvalidSpec("LayerSpec: degenerate dimensions give zero nodes");

  const auto on_nodes = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(spec.pwm_duty * static_cast<double>(spec.pwm_period_nodes))), 1,
      spec.pwm_period_nodes);

  LayerScan scan;
  scan.positions = Matrix(n, 2);
  scan.features = Matrix(n, kNumFeatures);
  scan.labels = Matrix(n, kNumChannels);
  scan.track_id.resize(n);
  scan.node_id.resize(n);
  scan.anomaly_mask.assign(n, 0);

  for (std::size_t t = 0; t < tracks; ++t) {
    const double direction = t % 2 == 0 ? 1.0 : -1.0;
    for (std::size_t k = 0; k < per_track; ++k) {
      const std::size_t i = t * per_track + k;
      const std::size_t column = direction > 0 ? k : per_track - 1 - k;
      scan.positions(i, 0) = (static_cast<double>(column) + 0.5) * spec.node_spacing_mm;
      scan.positions(i, 1) = (static_cast<double>(t) + 0.5) * spec.hatch_spacing_mm;
      scan.track_id[i] = static_cast<std::int64_t>(t);
      scan.node_id[i] = static_cast<std::int64_t>(i);
      scan.features(i, kPower) = (i % spec.pwm_period_nodes) < on_nodes ? 1.0 : 0.0;
      scan.features(i, kScanDirection) = direction;
      scan.features(i, kNodeNumber) = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
      scan.features(i, kTrackNumber) =
          tracks > 1 ? static_cast<double>(t) / static_cast<double>(tracks - 1) : 0.0;
    }
  }
  return scan;
}

LayerScan generate_melt_signal(LayerScan scan, const LayerSpec& spec) {
  spec.validate();
  const std::size_t n = scan.size();
  auto rng = stream_rng(spec.seed, 1);
  std::normal_distribution<double> normal(0.0, 1.0);

  // AR(1) along scan order with stationary standard deviation fluct_sd.
  const double fluct_sd = spec.fluctuation_ratio * spec.noise_sigma;
  const double rho = spec.fluctuation_correlation;
  const double innovation = std::sqrt(1.0 - rho * rho);
  std::vector<double> fluctuation(n);
  double f = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = normal(rng);
    f = i == 0 ? e : rho * f + innovation * e;
    fluctuation[i] = fluct_sd * f;
  }

  scan.labels = Matrix(n, kNumChannels);
  for (std::size_t i = 0; i < n; ++i) {
    const auto mean = melt_pool_response(scan.features(i, kPower), scan.features(i, kScanDirection),
                                         scan.features(i, kNodeNumber), scan.features(i, kTrackNumber));
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      scan.labels(i, c) = mean[c] + spec.noise_sigma * normal(rng);
    }
    scan.labels(i, kSize) += 0.8 * fluctuation[i];
    scan.labels(i, kIntensity) -= fluctuation[i];
    if (spec.integer_spatter) {
      std::poisson_distribution<int> poisson(mean[kSpatter]);
      scan.labels(i, kSpatter) = static_cast<double>(poisson(rng));
    }
  }
  return scan;
}

std::size_t anomaly_capacity(const LayerScan& scan, const AnomalySpec& spec) {
  const auto ranges = track_ranges(scan);
  if (ranges.empty()) return 0;
  std::size_t shortest = ranges.front().size();
  for (const auto& r : ranges) shortest = std::min(shortest, r.size());
  const auto span = static_cast<std::size_t>(spec.track_span.min);
  const auto run = static_cast<std::size_t>(spec.run_length_nodes.min);
  return (ranges.size() / span) * (shortest / run);
}

LayerScan inject_anomalies(LayerScan scan, const AnomalySpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t n = scan.size();
  scan.anomaly_mask.assign(n, 0);
  if (spec.n_events && *spec.n_events == 0) return scan;

  const auto ranges = track_ranges(scan);
  const auto n_tracks = static_cast<std::int64_t>(ranges.size());
  if (spec.n_events) {
    const std::size_t capacity = anomaly_capacity(scan, spec);
    if (*spec.n_events > capacity) {
      std::ostringstream msg;
      msg << "inject_anomalies: requested " << *spec.n_events << " events but the layer holds at most " << capacity;
      throw InvalidArgument(msg.str());
    }
  }
  if (spec.track_span.min > n_tracks) throw InvalidArgument("inject_anomalies: track_span exceeds track count");

  const auto target = static_cast<std::int64_t>(std::llround(static_cast<double>(n) / spec.target_imbalance));
  auto rng = stream_rng(seed, 2);
  std::int64_t marked = 0;
  std::size_t placed = 0;
  constexpr std::size_t kMaxAttempts = 100000;
  std::size_t attempts = 0;
  std::vector<std::size_t> members;

  auto done = [&] { return spec.n_events ? placed >= *spec.n_events : marked >= target; };
  while (!done()) {
    if (++attempts > kMaxAttempts) {
      std::ostringstream msg;
      msg << "inject_anomalies: could only place " << placed << " disjoint events";
      throw InvalidArgument(msg.str());
    }
    const auto span = uniform_int(rng, spec.track_span.min, std::min(spec.track_span.max, n_tracks));
    auto length = uniform_int(rng, spec.run_length_nodes.min, spec.run_length_nodes.max);
    if (!spec.n_events) {
      const auto remaining = target - marked;
      length = std::max<std::int64_t>(1, std::min(length, (remaining + span - 1) / span));
    }
    const auto t0 = static_cast<std::size_t>(uniform_int(rng, 0, n_tracks - span));
    const auto& base = ranges[t0];
    length = std::min<std::int64_t>(length, static_cast<std::int64_t>(base.size()));
    const auto start = base.begin + static_cast<std::size_t>(
                                        uniform_int(rng, 0, static_cast<std::int64_t>(base.size()) - length));

    members.clear();
    double x_lo = scan.positions(start, 0);
    double x_hi = x_lo;
    for (std::size_t i = start; i < start + static_cast<std::size_t>(length); ++i) {
      members.push_back(i);
      x_lo = std::min(x_lo, scan.positions(i, 0));
      x_hi = std::max(x_hi, scan.positions(i, 0));
    }
    constexpr double kTol = 1e-9;
    for (std::size_t t = t0 + 1; t < t0 + static_cast<std::size_t>(span); ++t) {
      for (std::size_t i = ranges[t].begin; i < ranges[t].end; ++i) {
        const double x = scan.positions(i, 0);
        if (x >= x_lo - kTol && x <= x_hi + kTol) members.push_back(i);
      }
    }
    if (std::any_of(members.begin(), members.end(), [&](std::size_t i) { return scan.anomaly_mask[i]; })) {
      continue;
    }
    for (std::size_t i : members) {
      scan.anomaly_mask[i] = 1;
      scan.labels(i, kIntensity) *= spec.intensity_scale;
      scan.labels(i, kSize) *= spec.intensity_scale;
      scan.labels(i, kSpatter) += spec.spatter_boost;
    }
    marked += static_cast<std::int64_t>(members.size());
    ++placed;
  }
  return scan;
}

std::uint64_t layer_seed(std::uint64_t base, int split, std::size_t index) {
  return splitmix64(base ^ splitmix64((static_cast<std::uint64_t>(split) << 32) + index + 1));
}

Dataset build_dataset(const DatasetConfig& config) {
  config.layer.validate();
  config.anomaly.validate();
  Dataset data;
  for (std::size_t i = 0; i < config.train_layers; ++i) {
    LayerSpec spec = config.layer;
    spec.seed = layer_seed(config.seed, 0, i);
    data.train.push_back(generate_melt_signal(generate_scan_path(spec), spec));
  }
  for (std::size_t i = 0; i < config.eval_layers; ++i) {
    LayerSpec spec = config.layer;
    spec.seed = layer_seed(config.seed, 1, i);
    auto scan = generate_melt_signal(generate_scan_path(spec), spec);
    data.eval.push_back(inject_anomalies(std::move(scan), config.anomaly, layer_seed(config.seed, 2, i)));
  }
  return data;
}

}  // namespace meltgraph
