#pragma once

// Per-pixel features and seeded k-means (Lloyd with k-means++ seeding).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "raster.hpp"

namespace tcm {

enum class FeatureMode { spectral, spectral_window };

inline const char* to_string(FeatureMode m) { return m == FeatureMode::spectral ? "spectral" : "spectral_window"; }

inline FeatureMode feature_mode_from_string(const std::string& s) {
  if (s == "spectral") return FeatureMode::spectral;
  if (s == "spectral_window") return FeatureMode::spectral_window;
  fail("InvalidFeatureMode", "unknown feature mode '" + s + "'", ErrorKind::config);
}

struct PixelFeatureConfig {
  FeatureMode mode = FeatureMode::spectral;
  int window_half = 1;  // only used by spectral_window

  void validate() const {
    if (mode == FeatureMode::spectral_window) {
      require(window_half >= 1, "InvalidFeatureConfig", "window half-size must be >= 1", ErrorKind::config);
    }
  }
  int dim(int channels) const {
    if (mode == FeatureMode::spectral) return channels;
    const int side = 2 * window_half + 1;
    return channels * side * side;
  }
  friend bool operator==(const PixelFeatureConfig&, const PixelFeatureConfig&) = default;
};

// Row-major (rows x dim) matrix.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * dim, dim}; }
};

struct ClusterModel {
  int k = 0;
  std::size_t dim = 0;
  std::vector<double> centroids;  // k x dim
  PixelFeatureConfig features;
  std::uint64_t seed = 0;
  int iterations = 0;
  double inertia = 0.0;
  std::vector<double> inertia_trace;  // after each assignment step

  std::span<const double> centroid(int j) const {
    return {centroids.data() + static_cast<std::size_t>(j) * dim, dim};
  }
};

struct ClusterMap {
  int height = 0;
  int width = 0;
  std::vector<int> labels;

  int at(int row, int col) const { return labels[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) + static_cast<std::size_t>(col)]; }
};

// Row-major flattening of pixel features. spectral_window concatenates the
// (2w+1)^2 neighbours in row-major order, replicating edge pixels.
inline FeatureMatrix extract_features(const Raster& image, const PixelFeatureConfig& config = {}) {
  require(!image.empty(), "EmptyImage", "cannot extract features from an empty image");
  config.validate();
  FeatureMatrix fm;
  fm.rows = image.pixel_count();
  fm.dim = static_cast<std::size_t>(config.dim(image.channels));
  fm.data.resize(fm.rows * fm.dim);

  if (config.mode == FeatureMode::spectral) {
    std::transform(image.data.begin(), image.data.end(), fm.data.begin(),
                   [](float v) { return static_cast<double>(v); });
    return fm;
  }

  const int w = config.window_half;
  std::size_t i = 0;
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c, ++i) {
      double* out = fm.data.data() + i * fm.dim;
      for (int dr = -w; dr <= w; ++dr) {
        const int rr = std::clamp(r + dr, 0, image.height - 1);
        for (int dc = -w; dc <= w; ++dc) {
          const int cc = std::clamp(c + dc, 0, image.width - 1);
          for (float v : image.pixel(rr, cc)) *out++ = v;
        }
      }
    }
  }
  return fm;
}

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Nearest centroid, ties to the lowest index.
inline int nearest(std::span<const double> x, const std::vector<double>& centroids, int k, std::size_t dim,
                   double* best_dist = nullptr) {
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (int j = 0; j < k; ++j) {
    const double d = squared_distance(x, {centroids.data() + static_cast<std::size_t>(j) * dim, dim});
    if (d < bd) {
      bd = d;
      best = j;
    }
  }
  if (best_dist) *best_dist = bd;
  return best;
}

inline std::vector<double> kmeanspp_init(const FeatureMatrix& x, int k, std::mt19937_64& rng) {
  const std::size_t n = x.rows, dim = x.dim;
  std::vector<double> centroids;
  centroids.reserve(static_cast<std::size_t>(k) * dim);
  auto push = [&](std::size_t i) {
    auto r = x.row(i);
    centroids.insert(centroids.end(), r.begin(), r.end());
  };

  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  push(pick(rng));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x.row(i), {centroids.data(), dim});

  for (int j = 1; j < k; ++j) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0.0 && d2[i] > 0.0) {
          chosen = i;
          break;
        }
      }
      while (d2[chosen] == 0.0 && chosen > 0) --chosen;
    } else {
      chosen = pick(rng);
    }
    push(chosen);
    const std::span<const double> c{centroids.data() + static_cast<std::size_t>(j) * dim, dim};
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(x.row(i), c));
  }
  return centroids;
}

}  // namespace detail

inline constexpr double kKMeansTolerance = 1e-4;
inline constexpr int kKMeansMaxIterations = 50;

// Lloyd's algorithm from a k-means++ start. Stops when no centroid moves by
// kKMeansTolerance or more, or after kKMeansMaxIterations. An empty cluster is
// moved onto the point farthest from its assigned centroid.
inline ClusterModel fit_kmeans(const FeatureMatrix& x, int k, std::uint64_t seed,
                               const PixelFeatureConfig& config = {}) {
  require(k >= 1, "InvalidClusterCount", "k must be >= 1", ErrorKind::config);
  if (x.rows < static_cast<std::size_t>(k)) {
    fail("TooFewPixels", std::to_string(x.rows) + " feature rows for k=" + std::to_string(k));
  }
  const std::size_t n = x.rows, dim = x.dim;
  std::mt19937_64 rng(seed);

  ClusterModel model;
  model.k = k;
  model.dim = dim;
  model.features = config;
  model.seed = seed;
  model.centroids = detail::kmeanspp_init(x, k, rng);

  std::vector<int> assign(n, 0);
  std::vector<double> dist(n, 0.0);
  std::vector<double> sums(static_cast<std::size_t>(k) * dim);
  std::vector<std::size_t> counts(static_cast<std::size_t>(k));

  for (int it = 0; it < kKMeansMaxIterations; ++it) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      assign[i] = detail::nearest(x.row(i), model.centroids, k, dim, &dist[i]);
      inertia += dist[i];
    }
    if (!model.inertia_trace.empty()) {
      // Lloyd steps never increase the objective; allow rounding slack only.
      const double prev = model.inertia_trace.back();
      if (inertia > prev + 1e-9 * std::max(1.0, prev)) {
        fail("KMeansDiverged", "inertia increased during Lloyd iterations", ErrorKind::internal);
      }
    }
    model.inertia_trace.push_back(inertia);
    model.inertia = inertia;
    model.iterations = it + 1;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(assign[i]);
      ++counts[j];
      auto r = x.row(i);
      for (std::size_t t = 0; t < dim; ++t) sums[j * dim + t] += r[t];
    }

    double max_move = 0.0;
    for (int j = 0; j < k; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      double* c = model.centroids.data() + ju * dim;
      if (counts[ju] == 0) {
        std::size_t far = 0;
        for (std::size_t i = 1; i < n; ++i) {
          if (dist[i] > dist[far]) far = i;
        }
        auto r = x.row(far);
        max_move = std::max(max_move, std::sqrt(detail::squared_distance({c, dim}, r)));
        std::copy(r.begin(), r.end(), c);
        dist[far] = 0.0;
        continue;
      }
      double move = 0.0;
      for (std::size_t t = 0; t < dim; ++t) {
        const double v = sums[ju * dim + t] / static_cast<double>(counts[ju]);
        move += (v - c[t]) * (v - c[t]);
        c[t] = v;
      }
      max_move = std::max(max_move, std::sqrt(move));
    }
    if (max_move < kKMeansTolerance) break;
  }
  for (double v : model.centroids) {
    require(std::isfinite(v), "KMeansDiverged", "non-finite centroid", ErrorKind::internal);
  }
  return model;
}

inline std::vector<int> assign_features(const ClusterModel& model, const FeatureMatrix& x) {
  if (x.dim != model.dim) {
    fail("FeatureDimMismatch",
         "features have dimension " + std::to_string(x.dim) + ", model expects " + std::to_string(model.dim));
  }
  std::vector<int> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) out[i] = detail::nearest(x.row(i), model.centroids, model.k, model.dim);
  return out;
}

inline ClusterMap assign_clusters(const ClusterModel& model, const Raster& image) {
  if (static_cast<std::size_t>(model.features.dim(image.channels)) != model.dim) {
    fail("FeatureDimMismatch", "image channel count does not match the cluster model");
  }
  ClusterMap map;
  map.height = image.height;
  map.width = image.width;
  map.labels = assign_features(model, extract_features(image, model.features));
  return map;
}

}  // namespace tcm
