#pragma once

// Label-free choice of (k, r, theta): compare divergences of the known
// footprints at the last layer against divergences of randomly placed
// footprint-shaped polygons, and keep the grid cell whose two histograms
// overlap least.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "geom_raster.hpp"
#include "hash.hpp"
#include "parallel.hpp"
#include "tcm_core.hpp"

namespace tcm {

// Uniform bins over [0, d_max]; values >= d_max land in the last bin.
struct Histogram {
  double d_max = 1.0;
  std::vector<double> masses;

  std::size_t bins() const { return masses.size(); }
  std::vector<double> edges() const {
    std::vector<double> e(masses.size() + 1);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = d_max * static_cast<double>(i) / static_cast<double>(masses.size());
    return e;
  }
};

inline Histogram make_histogram(std::span<const double> samples, std::size_t n_bins, double d_max) {
  require(n_bins >= 1, "InvalidBinCount", "histogram needs at least one bin", ErrorKind::config);
  require(d_max > 0.0 && std::isfinite(d_max), "InvalidRange", "histogram range must be positive");
  require(!samples.empty(), "EmptySamples", "cannot bin an empty sample");
  Histogram h;
  h.d_max = d_max;
  h.masses.assign(n_bins, 0.0);
  const double width = d_max / static_cast<double>(n_bins);
  for (double v : samples) {
    auto bin = v <= 0.0 ? std::size_t{0} : static_cast<std::size_t>(std::floor(v / width));
    bin = std::min(bin, n_bins - 1);
    h.masses[bin] += 1.0;
  }
  for (auto& m : h.masses) m /= static_cast<double>(samples.size());
  return h;
}

struct PqHistograms {
  Histogram p;
  Histogram q;
};

// p: each footprint's last-layer divergence. q: every layer of every random
// polygon. Both share bins over [0, d_max]; d_max defaults to the largest sample.
inline PqHistograms build_pq(std::span<const DivergenceSeries> footprints, std::span<const DivergenceSeries> randoms,
                             std::size_t n_bins, std::optional<double> d_max = std::nullopt) {
  std::vector<double> p_samples, q_samples;
  for (const auto& s : footprints) {
    require(!s.values.empty(), "EmptySeries", "footprint series is empty");
    p_samples.push_back(s.values.back());
  }
  for (const auto& s : randoms) q_samples.insert(q_samples.end(), s.values.begin(), s.values.end());
  require(!p_samples.empty() && !q_samples.empty(), "EmptySamples", "p and q both need samples");

  double hi = 0.0;
  if (d_max) {
    hi = *d_max;
  } else {
    for (double v : p_samples) hi = std::max(hi, v);
    for (double v : q_samples) hi = std::max(hi, v);
    if (hi <= 0.0) hi = 1.0;
  }
  return {make_histogram(p_samples, n_bins, hi), make_histogram(q_samples, n_bins, hi)};
}

inline double bhattacharyya(const Histogram& p, const Histogram& q) {
  if (p.bins() != q.bins() || p.d_max != q.d_max) fail("BinMismatch", "histograms use different binnings");
  double bc = 0.0;
  for (std::size_t i = 0; i < p.bins(); ++i) bc += std::sqrt(p.masses[i] * q.masses[i]);
  return std::clamp(bc, 0.0, 1.0);
}

// Nearest-rank percentile: the ceil(pct/100 * n)-th smallest sample.
inline double percentile_threshold(std::vector<double> samples, double pct) {
  require(!samples.empty(), "EmptySamples", "percentile of an empty sample");
  require(pct > 0.0 && pct < 100.0, "InvalidPercentile", "percentile must lie in (0, 100)", ErrorKind::config);
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  auto rank = static_cast<std::size_t>(std::ceil(pct * n / 100.0 - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, samples.size());
  return samples[rank - 1];
}

struct RandomPolygonOptions {
  double radius = 0.0;  // buffered extent must stay inside the study extent
  bool avoid_footprints = true;  // reject placements whose box meets a known footprint's box
  int max_attempts = 1000;
};

// Each polygon is a uniformly chosen footprint shape, translated so its
// centroid lands on a uniform point of the study extent.
inline std::vector<Polygon> sample_random_polygons(std::span<const Polygon> footprints, const Rect& study_extent,
                                                   std::size_t n, std::uint64_t seed,
                                                   const RandomPolygonOptions& opt = {}) {
  require(n >= 1, "InvalidRandomCount", "need at least one random polygon", ErrorKind::config);
  require(!footprints.empty(), "NoFootprints", "random polygons are shaped after footprints");
  require(!study_extent.empty(), "EmptyStudyExtent", "study extent is empty");

  std::vector<Rect> known;
  known.reserve(footprints.size());
  for (const auto& f : footprints) {
    validate_polygon(f);
    known.push_back(bounding_box(f));
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, footprints.size() - 1);
  std::uniform_real_distribution<double> ux(study_extent.min_x, study_extent.max_x);
  std::uniform_real_distribution<double> uy(study_extent.min_y, study_extent.max_y);

  std::vector<Polygon> out;
  out.reserve(n);
  char name[32];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(name, sizeof(name), "random_%06zu", i);
    bool placed = false;
    for (int attempt = 0; attempt < opt.max_attempts && !placed; ++attempt) {
      const Polygon& shape = footprints[pick(rng)];
      const Point c = centroid(shape);
      const double tx = ux(rng), ty = uy(rng);
      Polygon cand = translated(shape, tx - c.x, ty - c.y, name);
      Rect box = bounding_box(cand);
      if (opt.radius > 0.0) {
        box = {box.min_x - opt.radius, box.min_y - opt.radius, box.max_x + opt.radius, box.max_y + opt.radius};
      }
      if (!study_extent.contains(box)) continue;
      if (opt.avoid_footprints) {
        const Rect own = bounding_box(cand);
        if (std::any_of(known.begin(), known.end(), [&](const Rect& k) { return k.intersects(own); })) continue;
      }
      out.push_back(std::move(cand));
      placed = true;
    }
    if (!placed) fail("PlacementFailed", "could not place random polygon " + std::to_string(i));
  }
  return out;
}

struct CalibrationOptions {
  std::vector<int> k_grid{16, 32, 64};
  std::vector<double> r_grid{100.0, 200.0, 400.0};
  std::size_t n_random = 1000;
  std::size_t n_bins = 50;
  double percentile = 98.0;
  PixelFeatureConfig features;
  double epsilon = 1.0;
  bool avoid_footprints = true;
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const {
    require(!k_grid.empty() && !r_grid.empty(), "EmptyGrid", "k and r grids must be nonempty", ErrorKind::config);
    for (int k : k_grid) require(k >= 1, "InvalidClusterCount", "k must be >= 1", ErrorKind::config);
    for (double r : r_grid) require(r > 0.0, "InvalidRadius", "r must be > 0", ErrorKind::config);
    require(n_random >= 1, "InvalidRandomCount", "n_random must be >= 1", ErrorKind::config);
    require(n_bins >= 1, "InvalidBinCount", "n_bins must be >= 1", ErrorKind::config);
    require(percentile > 0.0 && percentile < 100.0, "InvalidPercentile", "percentile must lie in (0, 100)",
            ErrorKind::config);
    features.validate();
  }
};

// Divergence series of all footprints and all random polygons for one (k, r).
struct GridCell {
  int k = 0;
  double r = 0.0;
  std::vector<DivergenceSeries> footprints;  // dataset order
  std::vector<DivergenceSeries> randoms;
};

struct GridSeries {
  std::vector<Polygon> random_polygons;
  std::vector<GridCell> cells;  // k-major, then r, in grid order

  const GridCell& cell(int k, double r) const {
    for (const auto& c : cells) {
      if (c.k == k && c.r == r) return c;
    }
    fail("UnknownGridCell", "no cell for k=" + std::to_string(k) + " r=" + std::to_string(r), ErrorKind::internal);
  }
};

struct CalibrationRecord {
  int k = 0;
  double r = 0.0;
  double bc = 0.0;
  double theta = 0.0;
  Histogram p;
  Histogram q;
  std::optional<double> accuracy;  // only with labels
};

struct CalibrationReport {
  std::vector<CalibrationRecord> records;
  std::size_t chosen = 0;
  std::uint64_t seed = 0;
  std::size_t n_random = 0;
  double percentile = 98.0;
  PixelFeatureConfig features;
  double epsilon = 1.0;

  const CalibrationRecord& best() const { return records.at(chosen); }
};

inline std::uint64_t random_polygon_seed(std::uint64_t seed) { return stable_hash(seed, "random-polygons", 0); }

// The random polygons are placed once, with the largest radius, and reused by
// every cell so all cells see the same q sample locations.
inline GridSeries compute_grid_series(const Dataset& ds, const CalibrationOptions& opt) {
  opt.validate();
  ds.validate();
  require(!ds.footprints.empty(), "NoFootprints", "calibration needs footprints");

  GridSeries gs;
  const double r_max = *std::max_element(opt.r_grid.begin(), opt.r_grid.end());
  gs.random_polygons = sample_random_polygons(ds.footprints, scene_extent(ds.scenes.back()), opt.n_random,
                                              random_polygon_seed(opt.seed), {r_max, opt.avoid_footprints});

  for (int k : opt.k_grid) {
    for (double r : opt.r_grid) {
      GridCell c;
      c.k = k;
      c.r = r;
      c.footprints.resize(ds.footprints.size());
      c.randoms.resize(gs.random_polygons.size());
      gs.cells.push_back(std::move(c));
    }
  }

  // Chips depend only on r; one task per (r, polygon) serves every k.
  const std::size_t n_fp = ds.footprints.size();
  const std::size_t n_poly = n_fp + gs.random_polygons.size();
  const std::size_t n_r = opt.r_grid.size();
  parallel_for(n_r * n_poly, opt.workers, [&](std::size_t task) {
    const std::size_t ri = task / n_poly;
    const std::size_t pi = task % n_poly;
    const bool is_fp = pi < n_fp;
    const Polygon& poly = is_fp ? ds.footprints[pi] : gs.random_polygons[pi - n_fp];
    const ChipStack chips = extract_chip_stack(ds.scenes, poly, opt.r_grid[ri]);
    for (std::size_t ki = 0; ki < opt.k_grid.size(); ++ki) {
      GridCell& cell = gs.cells[ki * n_r + ri];
      auto s = divergence_series(chips, cell.k, opt.features, opt.seed, opt.epsilon);
      if (is_fp) {
        cell.footprints[pi] = std::move(s);
      } else {
        cell.randoms[pi - n_fp] = std::move(s);
      }
    }
  });
  return gs;
}

// Fraction of labeled footprints whose first crossing of theta hits the label year.
inline double threshold_accuracy(std::span<const DivergenceSeries> series, double theta,
                                 const std::map<std::string, int>& labels) {
  std::map<std::string, int> preds;
  std::map<std::string, int> used;
  for (const auto& s : series) {
    auto it = labels.find(s.id);
    if (it == labels.end()) continue;
    const auto fc = first_crossing(s, theta);
    preds[s.id] = s.years[static_cast<std::size_t>(fc.index - 1)];
    used[s.id] = it->second;
  }
  if (used.empty()) return std::nan("");
  return score(preds, used).accuracy;
}

inline CalibrationReport calibrate_from_series(const GridSeries& gs, const CalibrationOptions& opt,
                                               const std::map<std::string, int>& labels = {}) {
  CalibrationReport rep;
  rep.seed = opt.seed;
  rep.n_random = gs.random_polygons.size();
  rep.percentile = opt.percentile;
  rep.features = opt.features;
  rep.epsilon = opt.epsilon;

  for (const auto& cell : gs.cells) {
    CalibrationRecord rec;
    rec.k = cell.k;
    rec.r = cell.r;
    auto pq = build_pq(cell.footprints, cell.randoms, opt.n_bins);
    rec.bc = bhattacharyya(pq.p, pq.q);
    rec.p = std::move(pq.p);
    rec.q = std::move(pq.q);
    std::vector<double> q_raw;
    for (const auto& s : cell.randoms) q_raw.insert(q_raw.end(), s.values.begin(), s.values.end());
    rec.theta = percentile_threshold(std::move(q_raw), opt.percentile);
    if (!labels.empty()) {
      const double acc = threshold_accuracy(cell.footprints, rec.theta, labels);
      if (!std::isnan(acc)) rec.accuracy = acc;
    }
    rep.records.push_back(std::move(rec));
  }

  // argmin BC; ties go to the smaller k, then the smaller r.
  for (std::size_t i = 1; i < rep.records.size(); ++i) {
    const auto& a = rep.records[i];
    const auto& b = rep.records[rep.chosen];
    if (a.bc < b.bc || (a.bc == b.bc && (a.k < b.k || (a.k == b.k && a.r < b.r)))) rep.chosen = i;
  }
  return rep;
}

inline CalibrationReport calibrate(const Dataset& ds, const CalibrationOptions& opt) {
  return calibrate_from_series(compute_grid_series(ds, opt), opt, ds.label_years);
}

}  // namespace tcm
