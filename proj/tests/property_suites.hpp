#pragma once

// Randomized property checks with independent oracles. Each suite returns a
// verdict plus a one-line detail so unit tests and the acceptance runner
// can share them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tcm/calibration.hpp"
#include "tcm/clustering.hpp"
#include "tcm/geom_raster.hpp"
#include "tcm/supervised.hpp"
#include "tcm/tcm_core.hpp"

namespace tcm_test {

struct SuiteResult {
  bool ok = true;
  std::string detail;
};

inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n, bool allow_zeros) {
  std::exponential_distribution<double> ex(1.0);
  std::bernoulli_distribution zero(0.2);
  std::vector<double> p(n);
  double s = 0.0;
  for (auto& v : p) {
    v = (allow_zeros && zero(rng)) ? 0.0 : ex(rng);
    s += v;
  }
  if (s == 0.0) {
    p[0] = 1.0;
    s = 1.0;
  }
  for (auto& v : p) v /= s;
  return p;
}

// KL(p||p) = 0 and KL(p||q) >= 0 over random pairs; q strictly positive so
// the divergence is finite.
inline SuiteResult kl_suite(int pairs = 10000, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> support(1, 16);
  double worst_self = 0.0, worst_neg = 0.0;
  for (int i = 0; i < pairs; ++i) {
    const std::size_t n = support(rng);
    const tcm::DiscreteDistribution p{random_simplex(rng, n, true)};
    const tcm::DiscreteDistribution q{random_simplex(rng, n, false)};
    worst_self = std::max(worst_self, std::abs(tcm::kl_divergence(p, p)));
    worst_neg = std::min(worst_neg, tcm::kl_divergence(p, q));
  }
  std::ostringstream os;
  os << pairs << " pairs, max |KL(p,p)| = " << worst_self << ", min KL(p,q) = " << worst_neg;
  return {worst_self <= 1e-12 && worst_neg >= -1e-12, os.str()};
}

inline SuiteResult bc_suite(int pairs = 10000, std::uint64_t seed = 11) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> bins(1, 64);
  double worst_self = 0.0, lo = 1.0, hi = 0.0;
  for (int i = 0; i < pairs; ++i) {
    const std::size_t n = bins(rng);
    tcm::Histogram p{2.5, random_simplex(rng, n, true)};
    tcm::Histogram q{2.5, random_simplex(rng, n, true)};
    worst_self = std::max(worst_self, std::abs(tcm::bhattacharyya(p, p) - 1.0));
    const double bc = tcm::bhattacharyya(p, q);
    lo = std::min(lo, bc);
    hi = std::max(hi, bc);
  }
  std::ostringstream os;
  os << pairs << " pairs, max |BC(p,p)-1| = " << worst_self << ", BC range [" << lo << ", " << hi << "]";
  return {worst_self <= 1e-12 && lo >= 0.0 && hi <= 1.0, os.str()};
}

// Minimum within-cluster sum of squares over every assignment of n points to
// k labels, with each label used at least once.
struct PartitionOracle {
  double sse = std::numeric_limits<double>::infinity();
  std::vector<int> labels;
};

inline PartitionOracle exhaustive_partition(const tcm::FeatureMatrix& x, int k) {
  const std::size_t n = x.rows, dim = x.dim;
  PartitionOracle best;
  std::vector<int> a(n, 0);
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= static_cast<std::size_t>(k);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<int>(c % static_cast<std::size_t>(k));
      c /= static_cast<std::size_t>(k);
    }
    std::vector<double> sum(static_cast<std::size_t>(k) * dim, 0.0);
    std::vector<int> cnt(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++cnt[static_cast<std::size_t>(a[i])];
      for (std::size_t t = 0; t < dim; ++t) sum[static_cast<std::size_t>(a[i]) * dim + t] += x.row(i)[t];
    }
    if (std::any_of(cnt.begin(), cnt.end(), [](int v) { return v == 0; })) continue;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(a[i]);
      for (std::size_t t = 0; t < dim; ++t) {
        const double d = x.row(i)[t] - sum[j * dim + t] / cnt[j];
        sse += d * d;
      }
    }
    if (sse < best.sse - 1e-12) best = {sse, a};
  }
  return best;
}

// True when two labelings induce the same set partition.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
    }
  }
  return true;
}

// Instances: k in {1,2,3}, n in [k, 8], points drawn around k centres 100
// units apart with every centre used at least once.
inline SuiteResult kmeans_suite(int per_shape = 12, std::uint64_t seed = 13) {
  std::mt19937_64 rng(seed);
  int instances = 0, mismatches = 0;
  for (int k = 1; k <= 3; ++k) {
    for (std::size_t n = static_cast<std::size_t>(k); n <= 8; ++n) {
      for (std::size_t dim = 1; dim <= 2; ++dim) {
        for (int rep = 0; rep < per_shape; ++rep) {
          std::uniform_real_distribution<double> spread(-0.5, 0.5);
          tcm::FeatureMatrix x;
          x.rows = n;
          x.dim = dim;
          x.data.resize(n * dim);
          std::vector<std::size_t> blob(n);
          for (std::size_t i = 0; i < n; ++i) blob[i] = i < static_cast<std::size_t>(k) ? i : rng() % static_cast<std::size_t>(k);
          std::shuffle(blob.begin(), blob.end(), rng);
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t t = 0; t < dim; ++t) x.row(i)[t] = 100.0 * static_cast<double>(blob[i]) + spread(rng);
          }
          const auto oracle = exhaustive_partition(x, k);
          const auto model = tcm::fit_kmeans(x, k, rng());
          const auto labels = tcm::assign_features(model, x);
          ++instances;
          if (!same_partition(labels, oracle.labels) || std::abs(model.inertia - oracle.sse) > 1e-9 * (1.0 + oracle.sse)) {
            ++mismatches;
          }
        }
      }
    }
  }
  std::ostringstream os;
  os << instances << " instances (n <= 8, k <= 3), " << mismatches << " differ from the exhaustive optimum";
  return {mismatches == 0, os.str()};
}

// Winding number of (px, py) around a closed ring; nonzero means inside for
// the simple polygons used here.
inline int winding_number(const tcm::Ring& ring, double px, double py) {
  int wn = 0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = ring[i];
    const auto& b = ring[(i + 1) % n];
    const double cross = (b.x - a.x) * (py - a.y) - (px - a.x) * (b.y - a.y);
    if (a.y <= py) {
      if (b.y > py && cross > 0) ++wn;
    } else {
      if (b.y <= py && cross < 0) --wn;
    }
  }
  return wn;
}

inline double segment_distance(const tcm::Point& a, const tcm::Point& b, double px, double py) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((px - a.x) * vx + (py - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(a.x + t * vx - px, a.y + t * vy - py);
}

// Convex polygons (sorted-angle hull of random points on an ellipse) and
// star-shaped polygons (random radii at increasing angles) under a random
// rotated, anisotropic geotransform.
inline tcm::Polygon random_test_polygon(std::mt19937_64& rng, bool convex, double cx, double cy, double scale) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 3 + static_cast<int>(rng() % 10);
  std::vector<double> angles(static_cast<std::size_t>(n));
  for (auto& a : angles) a = 2.0 * M_PI * u(rng);
  std::sort(angles.begin(), angles.end());
  angles.erase(std::unique(angles.begin(), angles.end()), angles.end());
  tcm::Polygon poly;
  poly.id = convex ? "convex" : "star";
  const double rx = scale * (0.3 + 0.7 * u(rng)), ry = scale * (0.3 + 0.7 * u(rng));
  for (double a : angles) {
    const double rad = convex ? 1.0 : 0.25 + 0.75 * u(rng);
    poly.exterior.push_back({cx + rad * rx * std::cos(a), cy + rad * ry * std::sin(a)});
  }
  return poly;
}

inline SuiteResult raster_suite(int polygons = 100, std::uint64_t seed = 17) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mismatched_pixels = 0, tested = 0, empties = 0, empty_mismatch = 0;
  long long pixels = 0;
  while (tested < polygons) {
    const int h = 8 + static_cast<int>(rng() % 57), w = 8 + static_cast<int>(rng() % 57);
    const double ang = 0.6 * (u(rng) - 0.5), sx = 0.5 + 2.0 * u(rng), sy = 0.5 + 2.0 * u(rng);
    const tcm::AffineGeoTransform gt{sx * std::cos(ang), -sy * std::sin(ang), 1000.0 * u(rng),
                                     sx * std::sin(ang), sy * std::cos(ang),  -500.0 * u(rng)};
    const tcm::Point mid = gt.to_world(0.5 * w, 0.5 * h);
    const double scale = 0.45 * std::min(h * sx, w * sy) * (0.2 + 0.8 * u(rng));
    tcm::Polygon poly = random_test_polygon(rng, tested % 2 == 0, mid.x, mid.y, scale);
    if (poly.exterior.size() < 3 || std::abs(tcm::ring_signed_area(poly.exterior)) < 1e-6) continue;
    ++tested;

    // Oracle mask, skipping centres within 1e-7 of an edge where the two
    // boundary conventions may legitimately disagree.
    std::vector<int> expect(static_cast<std::size_t>(h * w));
    std::vector<bool> ambiguous(static_cast<std::size_t>(h * w), false);
    int inside = 0;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const tcm::Point p = gt.to_world(c + 0.5, r + 0.5);
        const std::size_t i = static_cast<std::size_t>(r * w + c);
        expect[i] = winding_number(poly.exterior, p.x, p.y) != 0;
        inside += expect[i];
        for (std::size_t e = 0; e < poly.exterior.size(); ++e) {
          if (segment_distance(poly.exterior[e], poly.exterior[(e + 1) % poly.exterior.size()], p.x, p.y) < 1e-7) {
            ambiguous[i] = true;
          }
        }
      }
    }
    const tcm::Rect extent = tcm::bounding_box(poly);
    try {
      const tcm::Mask m = tcm::rasterize_polygon(poly, extent, gt, h, w);
      for (std::size_t i = 0; i < expect.size(); ++i) {
        if (!ambiguous[i] && (m.data[i] != 0) != (expect[i] != 0)) ++mismatched_pixels;
      }
      pixels += static_cast<long long>(expect.size());
    } catch (const tcm::Error& e) {
      ++empties;
      if (e.code() != "EmptyFootprintMask" || inside != 0) ++empty_mismatch;
    }
  }
  std::ostringstream os;
  os << tested << " polygons, " << pixels << " pixel centres, " << mismatched_pixels << " mismatches, " << empties
     << " empty masks (" << empty_mismatch << " unexpected)";
  return {mismatched_pixels == 0 && empty_mismatch == 0, os.str()};
}

// Analytic LR gradient against central differences; also checks the
// training loss trace never increases.
inline SuiteResult lr_gradient_suite(int problems = 20, std::uint64_t seed = 19) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  bool monotone = true;
  for (int prob = 0; prob < problems; ++prob) {
    const int classes = 2 + static_cast<int>(rng() % 4);
    const std::size_t dim = 1 + rng() % 5, n = 10 + rng() % 30;
    tcm::FeatureMatrix x;
    x.rows = n;
    x.dim = dim;
    x.data.resize(n * dim);
    for (auto& v : x.data) v = g(rng);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % static_cast<std::size_t>(classes));
    std::vector<double> w(static_cast<std::size_t>(classes) * dim), b(static_cast<std::size_t>(classes));
    for (auto& v : w) v = g(rng);
    for (auto& v : b) v = g(rng);
    const double lambda = 0.01 * (prob % 3);
    std::vector<double> gw, gb;
    tcm::lr_objective(w, b, x, y, classes, lambda, &gw, &gb);
    const double h = 1e-5;
    for (std::size_t i = 0; i < w.size(); ++i) {
      auto wp = w, wm = w;
      wp[i] += h;
      wm[i] -= h;
      const double fd = (tcm::lr_objective(wp, b, x, y, classes, lambda) - tcm::lr_objective(wm, b, x, y, classes, lambda)) / (2 * h);
      worst = std::max(worst, std::abs(fd - gw[i]));
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
      auto bp = b, bm = b;
      bp[i] += h;
      bm[i] -= h;
      const double fd = (tcm::lr_objective(w, bp, x, y, classes, lambda) - tcm::lr_objective(w, bm, x, y, classes, lambda)) / (2 * h);
      worst = std::max(worst, std::abs(fd - gb[i]));
    }
    const auto model = tcm::fit_lr(x, y, classes);
    for (std::size_t i = 1; i < model.loss_trace.size(); ++i) {
      if (model.loss_trace[i] > model.loss_trace[i - 1] + 1e-12) monotone = false;
    }
  }
  std::ostringstream os;
  os << problems << " problems, max |analytic - central difference| = " << worst
     << (monotone ? ", loss non-increasing" : ", loss increased");
  return {worst <= 1e-5 && monotone, os.str()};
}

inline SuiteResult first_crossing_suite(int series = 1000, std::uint64_t seed = 23) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  int violations = 0;
  for (int s = 0; s < series; ++s) {
    std::vector<double> v(1 + rng() % 10);
    for (auto& x : v) x = u(rng);
    std::vector<double> thetas(20);
    for (auto& t : thetas) t = u(rng);
    thetas.push_back(v[rng() % v.size()]);  // exact ties with observed values
    std::sort(thetas.begin(), thetas.end());
    int prev = 0;
    for (double t : thetas) {
      const int l = tcm::first_crossing(v, t).index;
      if (l < prev) ++violations;
      prev = l;
    }
  }
  std::ostringstream os;
  os << series << " series, " << violations << " monotonicity violations";
  return {violations == 0, os.str()};
}

}  // namespace tcm_test
