#pragma once

// Temporal Cluster Matching: per-layer footprint vs neighbourhood cluster
// distributions, their KL divergence, and the first-crossing decision.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "clustering.hpp"
#include "error.hpp"
#include "geom_raster.hpp"
#include "hash.hpp"

namespace tcm {

struct DiscreteDistribution {
  std::vector<double> probabilities;

  std::size_t support() const { return probabilities.size(); }
};

enum class Region { footprint, neighborhood };

struct DivergenceSeries {
  std::string id;
  std::vector<double> values;  // nats, one per layer
  std::vector<int> years;

  std::size_t size() const { return values.size(); }
  friend bool operator==(const DivergenceSeries&, const DivergenceSeries&) = default;
};

struct TcmParams {
  int k = 16;
  double radius = 1.0;
  double theta = 0.0;
  PixelFeatureConfig features;
  double epsilon = 1.0;
  std::uint64_t seed = 0;
};

struct FirstCrossing {
  int index = 0;  // 1-based layer
  bool crossed = false;
};

struct DetectionResult {
  std::string id;
  int index = 0;  // 1-based
  int year = 0;
  bool crossed = false;  // false when no layer exceeded theta and the last layer was returned
  DivergenceSeries series;
  TcmParams params;
};

inline DiscreteDistribution cluster_distribution(std::span<const int> labels, const Mask& mask, Region region, int k,
                                                 double epsilon) {
  require(k >= 1, "InvalidClusterCount", "k must be >= 1", ErrorKind::config);
  require(epsilon >= 0.0, "InvalidEpsilon", "smoothing constant must be >= 0", ErrorKind::config);
  require(labels.size() == mask.size(), "ShapeMismatch", "cluster map and mask differ in size");
  const std::uint8_t want = region == Region::footprint ? 1 : 0;

  std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if ((mask.data[i] != 0 ? 1 : 0) != want) continue;
    const int c = labels[i];
    require(c >= 0 && c < k, "LabelOutOfRange", "cluster index outside [0, k)");
    counts[static_cast<std::size_t>(c)] += 1.0;
    ++n;
  }
  if (n == 0) fail("EmptyRegion", region == Region::footprint ? "footprint has no pixels" : "neighborhood has no pixels");

  double total = 0.0;
  for (auto& c : counts) {
    c += epsilon;
    total += c;
  }
  for (auto& c : counts) c /= total;
  return {std::move(counts)};
}

inline DiscreteDistribution cluster_distribution(const ClusterMap& cmap, const Mask& mask, Region region, int k,
                                                 double epsilon) {
  require(cmap.height == mask.height && cmap.width == mask.width, "ShapeMismatch", "cluster map and mask differ in shape");
  return cluster_distribution(std::span<const int>(cmap.labels), mask, region, k, epsilon);
}

// KL(p || q) in nats with 0 * ln(0 / q) = 0. Infinite when p puts mass where q has none.
inline double kl_divergence(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  if (p.support() != q.support()) fail("SupportMismatch", "distributions have different support sizes");
  double d = 0.0;
  for (std::size_t i = 0; i < p.support(); ++i) {
    const double pi = p.probabilities[i];
    if (pi <= 0.0) continue;
    const double qi = q.probabilities[i];
    if (qi <= 0.0) return std::numeric_limits<double>::infinity();
    d += pi * std::log(pi / qi);
  }
  // Rounding can leave tiny negatives for p ~= q.
  return d < 0.0 ? 0.0 : d;
}

// Seed used to cluster layer `layer` (0-based) of footprint `id`.
inline std::uint64_t layer_seed(std::uint64_t seed, std::string_view id, std::size_t layer) {
  return stable_hash(seed, id, layer);
}

inline double layer_divergence(const Raster& layer, const Mask& mask, int k, const PixelFeatureConfig& features,
                               std::uint64_t seed, double epsilon) {
  const FeatureMatrix fm = extract_features(layer, features);
  const ClusterModel model = fit_kmeans(fm, k, seed, features);
  const std::vector<int> labels = assign_features(model, fm);
  const auto fp = cluster_distribution(labels, mask, Region::footprint, k, epsilon);
  const auto nb = cluster_distribution(labels, mask, Region::neighborhood, k, epsilon);
  return kl_divergence(fp, nb);
}

inline DivergenceSeries divergence_series(const ChipStack& chips, int k, const PixelFeatureConfig& features,
                                          std::uint64_t seed, double epsilon = 1.0) {
  require(epsilon > 0.0, "InvalidEpsilon", "smoothing constant must be > 0 for finite divergences", ErrorKind::config);
  require(!chips.layers.empty(), "EmptyChipStack", "chip stack has no layers");
  DivergenceSeries s;
  s.id = chips.id;
  s.years = chips.years;
  s.values.reserve(chips.layers.size());
  for (std::size_t l = 0; l < chips.layers.size(); ++l) {
    s.values.push_back(layer_divergence(chips.layers[l], chips.mask, k, features, layer_seed(seed, chips.id, l), epsilon));
  }
  return s;
}

// Smallest 1-based l with values[l-1] > theta; the last layer when none does.
inline FirstCrossing first_crossing(std::span<const double> values, double theta) {
  require(!values.empty(), "EmptySeries", "cannot threshold an empty series");
  for (std::size_t l = 0; l < values.size(); ++l) {
    if (values[l] > theta) return {static_cast<int>(l) + 1, true};
  }
  return {static_cast<int>(values.size()), false};
}

inline FirstCrossing first_crossing(const DivergenceSeries& series, double theta) {
  return first_crossing(std::span<const double>(series.values), theta);
}

inline DetectionResult detection_from_series(DivergenceSeries series, const TcmParams& params) {
  const FirstCrossing fc = first_crossing(series, params.theta);
  DetectionResult r;
  r.id = series.id;
  r.index = fc.index;
  r.crossed = fc.crossed;
  r.year = series.years.empty() ? fc.index : series.years[static_cast<std::size_t>(fc.index - 1)];
  r.series = std::move(series);
  r.params = params;
  return r;
}

// Runs the full per-footprint algorithm on a chip stack already cropped with params.radius.
inline DetectionResult detect(const ChipStack& chips, const TcmParams& params) {
  require(params.theta >= 0.0, "InvalidTheta", "theta must be >= 0", ErrorKind::config);
  return detection_from_series(divergence_series(chips, params.k, params.features, params.seed, params.epsilon), params);
}

}  // namespace tcm
