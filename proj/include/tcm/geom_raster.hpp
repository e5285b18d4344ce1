#pragma once

// Footprint polygons, buffered extents, rasterization and chip extraction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "raster.hpp"

namespace tcm {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

// Rings are stored open: the closing vertex is not repeated.
using Ring = std::vector<Point>;

struct Polygon {
  std::string id;
  Ring exterior;
  std::vector<Ring> holes;
  friend bool operator==(const Polygon&, const Polygon&) = default;
};

struct Rect {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
  bool empty() const { return !(max_x > min_x && max_y > min_y); }
  bool contains(const Rect& o) const {
    return o.min_x >= min_x && o.max_x <= max_x && o.min_y >= min_y && o.max_y <= max_y;
  }
  bool intersects(const Rect& o) const {
    return o.min_x < max_x && o.max_x > min_x && o.min_y < max_y && o.max_y > min_y;
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

// Pixel (col, row) -> world (x, y):
//   x = a*col + b*row + c
//   y = d*col + e*row + f
// (col, row) = (0, 0) is the upper-left corner of the first pixel.
struct AffineGeoTransform {
  double a = 1.0, b = 0.0, c = 0.0;
  double d = 0.0, e = 1.0, f = 0.0;

  static AffineGeoTransform from_array(std::span<const double> v) {
    require(v.size() == 6, "InvalidGeoTransform", "geotransform needs 6 coefficients");
    AffineGeoTransform g{v[0], v[1], v[2], v[3], v[4], v[5]};
    g.validate();
    return g;
  }
  std::array<double, 6> to_array() const { return {a, b, c, d, e, f}; }

  double determinant() const { return a * e - b * d; }
  void validate() const {
    require(std::isfinite(determinant()) && determinant() != 0.0, "InvalidGeoTransform",
            "geotransform linear part is singular");
  }

  Point to_world(double col, double row) const { return {a * col + b * row + c, d * col + e * row + f}; }
  Point to_pixel(double x, double y) const {
    const double det = determinant();
    const double dx = x - c;
    const double dy = y - f;
    return {(e * dx - b * dy) / det, (a * dy - d * dx) / det};
  }
  // Transform of the sub-grid whose upper-left pixel is (col0, row0).
  AffineGeoTransform shifted(int col0, int row0) const {
    AffineGeoTransform g = *this;
    g.c = a * col0 + b * row0 + c;
    g.f = d * col0 + e * row0 + f;
    return g;
  }
  friend bool operator==(const AffineGeoTransform&, const AffineGeoTransform&) = default;
};

struct Scene {
  Raster image;
  int year = 0;
  AffineGeoTransform transform;
};

// One footprint cropped from every layer of a time series.
struct ChipStack {
  std::string id;
  std::vector<Raster> layers;
  Mask mask;
  std::vector<int> years;
  double radius = 0.0;
  AffineGeoTransform transform;  // of the chip grid

  std::size_t size() const { return layers.size(); }
  friend bool operator==(const ChipStack&, const ChipStack&) = default;
};

// ---------------------------------------------------------------------------
// Polygon helpers

inline double ring_signed_area(const Ring& ring) {
  double s = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& p = ring[i];
    const Point& q = ring[(i + 1) % n];
    s += p.x * q.y - q.x * p.y;
  }
  return 0.5 * s;
}

// Drops a repeated closing vertex and consecutive duplicates.
inline Ring normalize_ring(Ring ring) {
  Ring out;
  out.reserve(ring.size());
  for (const auto& p : ring) {
    if (out.empty() || !(out.back() == p)) out.push_back(p);
  }
  while (out.size() > 1 && out.front() == out.back()) out.pop_back();
  return out;
}

inline Polygon normalize_polygon(Polygon poly) {
  poly.exterior = normalize_ring(std::move(poly.exterior));
  for (auto& h : poly.holes) h = normalize_ring(std::move(h));
  return poly;
}

inline void validate_polygon(const Polygon& poly) {
  for (const auto& p : poly.exterior) {
    require(std::isfinite(p.x) && std::isfinite(p.y), "DegeneratePolygon",
            "polygon '" + poly.id + "' has non-finite coordinates");
  }
  require(poly.exterior.size() >= 3, "DegeneratePolygon",
          "polygon '" + poly.id + "' has fewer than 3 distinct vertices");
  require(ring_signed_area(poly.exterior) != 0.0, "DegeneratePolygon",
          "polygon '" + poly.id + "' has zero area");
}

inline Rect bounding_box(const Polygon& poly) {
  Rect r{poly.exterior.front().x, poly.exterior.front().y, poly.exterior.front().x, poly.exterior.front().y};
  for (const auto& p : poly.exterior) {
    r.min_x = std::min(r.min_x, p.x);
    r.max_x = std::max(r.max_x, p.x);
    r.min_y = std::min(r.min_y, p.y);
    r.max_y = std::max(r.max_y, p.y);
  }
  return r;
}

inline Point centroid(const Polygon& poly) {
  const Ring& ring = poly.exterior;
  double a = 0.0, cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const Point& p = ring[i];
    const Point& q = ring[(i + 1) % ring.size()];
    const double cr = p.x * q.y - q.x * p.y;
    a += cr;
    cx += (p.x + q.x) * cr;
    cy += (p.y + q.y) * cr;
  }
  if (a == 0.0) return ring.front();
  return {cx / (3.0 * a), cy / (3.0 * a)};
}

inline Polygon translated(const Polygon& poly, double dx, double dy, std::string id) {
  Polygon out;
  out.id = std::move(id);
  out.exterior.reserve(poly.exterior.size());
  for (const auto& p : poly.exterior) out.exterior.push_back({p.x + dx, p.y + dy});
  for (const auto& h : poly.holes) {
    Ring r;
    r.reserve(h.size());
    for (const auto& p : h) r.push_back({p.x + dx, p.y + dy});
    out.holes.push_back(std::move(r));
  }
  return out;
}

// Even-odd crossing test over the exterior and all holes.
inline bool point_in_polygon(const Polygon& poly, double px, double py) {
  bool inside = false;
  auto scan = [&](const Ring& ring) {
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Point& pi = ring[i];
      const Point& pj = ring[j];
      if ((pi.y > py) != (pj.y > py)) {
        const double xc = pi.x + (py - pi.y) * (pj.x - pi.x) / (pj.y - pi.y);
        if (px < xc) inside = !inside;
      }
    }
  };
  scan(poly.exterior);
  for (const auto& h : poly.holes) scan(h);
  return inside;
}

// ---------------------------------------------------------------------------
// Operations

// Axis-aligned bounding box grown by r on every side.
inline Rect buffered_extent(const Polygon& poly, double r) {
  require(r > 0.0 && std::isfinite(r), "InvalidRadius", "buffer radius must be positive", ErrorKind::config);
  validate_polygon(poly);
  Rect box = bounding_box(poly);
  return {box.min_x - r, box.min_y - r, box.max_x + r, box.max_y + r};
}

// Pixel window of `grid` covering a world rectangle. Not clipped.
struct PixelWindow {
  int col0 = 0, row0 = 0, cols = 0, rows = 0;
  bool empty() const { return cols <= 0 || rows <= 0; }
};

inline PixelWindow window_for_extent(const Rect& extent, const AffineGeoTransform& grid) {
  constexpr double snap = 1e-9;
  const Point corners[4] = {grid.to_pixel(extent.min_x, extent.min_y), grid.to_pixel(extent.max_x, extent.min_y),
                            grid.to_pixel(extent.min_x, extent.max_y), grid.to_pixel(extent.max_x, extent.max_y)};
  double cmin = corners[0].x, cmax = corners[0].x, rmin = corners[0].y, rmax = corners[0].y;
  for (const auto& p : corners) {
    cmin = std::min(cmin, p.x);
    cmax = std::max(cmax, p.x);
    rmin = std::min(rmin, p.y);
    rmax = std::max(rmax, p.y);
  }
  PixelWindow w;
  w.col0 = static_cast<int>(std::floor(cmin + snap));
  w.row0 = static_cast<int>(std::floor(rmin + snap));
  w.cols = static_cast<int>(std::ceil(cmax - snap)) - w.col0;
  w.rows = static_cast<int>(std::ceil(rmax - snap)) - w.row0;
  return w;
}

inline PixelWindow clip_window(PixelWindow w, int height, int width) {
  const int c1 = std::min(w.col0 + w.cols, width);
  const int r1 = std::min(w.row0 + w.rows, height);
  w.col0 = std::max(w.col0, 0);
  w.row0 = std::max(w.row0, 0);
  w.cols = c1 - w.col0;
  w.rows = r1 - w.row0;
  return w;
}

// mask(row, col) = 1 iff the pixel center lies inside the polygon (even-odd,
// holes excluded). `transform` is the mask grid's own pixel->world map.
inline Mask rasterize_polygon(const Polygon& poly, const Rect& extent, const AffineGeoTransform& transform,
                              int height, int width) {
  validate_polygon(poly);
  transform.validate();
  require(height >= 1 && width >= 1, "InvalidRaster", "mask shape must be positive");
  Mask mask(height, width);
  if (!bounding_box(poly).intersects(extent)) {
    fail("EmptyFootprintMask", "polygon '" + poly.id + "' lies outside the extent");
  }

  // Work in pixel space; affine maps preserve inside/outside.
  auto to_px = [&](const Ring& ring) {
    Ring out;
    out.reserve(ring.size());
    for (const auto& p : ring) out.push_back(transform.to_pixel(p.x, p.y));
    return out;
  };
  std::vector<Ring> rings;
  rings.push_back(to_px(poly.exterior));
  for (const auto& h : poly.holes) rings.push_back(to_px(h));

  std::vector<double> xs;
  for (int row = 0; row < height; ++row) {
    const double py = row + 0.5;
    xs.clear();
    for (const auto& ring : rings) {
      const std::size_t n = ring.size();
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point& pi = ring[i];
        const Point& pj = ring[j];
        if ((pi.y > py) != (pj.y > py)) xs.push_back(pi.x + (py - pi.y) * (pj.x - pi.x) / (pj.y - pi.y));
      }
    }
    if (xs.empty()) continue;
    std::sort(xs.begin(), xs.end());
    // Center px is inside iff an odd number of crossings lie strictly right of it.
    std::size_t first_right = 0;
    for (int col = 0; col < width; ++col) {
      const double px = col + 0.5;
      while (first_right < xs.size() && xs[first_right] <= px) ++first_right;
      if ((xs.size() - first_right) % 2 == 1) mask.at(row, col) = 1;
    }
  }
  if (mask.count() == 0) fail("EmptyFootprintMask", "no pixel center of polygon '" + poly.id + "' inside the grid");
  return mask;
}

namespace detail {

inline Raster crop_nearest(const Scene& scene, const AffineGeoTransform& chip_transform, int rows, int cols) {
  Raster out(rows, cols, scene.image.channels);
  const auto& img = scene.image;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const Point w = chip_transform.to_world(c + 0.5, r + 0.5);
      const Point p = scene.transform.to_pixel(w.x, w.y);
      const int sc = std::clamp(static_cast<int>(std::floor(p.x)), 0, img.width - 1);
      const int sr = std::clamp(static_cast<int>(std::floor(p.y)), 0, img.height - 1);
      auto src = img.pixel(sr, sc);
      std::copy(src.begin(), src.end(), out.pixel(r, c).begin());
    }
  }
  return out;
}

inline Raster crop_direct(const Raster& img, const PixelWindow& w) {
  Raster out(w.rows, w.cols, img.channels);
  const std::size_t row_len = static_cast<std::size_t>(w.cols) * static_cast<std::size_t>(img.channels);
  for (int r = 0; r < w.rows; ++r) {
    const float* src = img.data.data() + img.offset(w.row0 + r, w.col0);
    std::copy(src, src + row_len, out.data.data() + out.offset(r, 0));
  }
  return out;
}

}  // namespace detail

// Crops the buffered extent of `poly` from every scene. The last scene's
// grid is the reference; scenes on a different grid are resampled by nearest
// neighbour. Windows reaching past the imagery are clipped.
inline ChipStack extract_chip_stack(std::span<const Scene> scenes, const Polygon& poly, double r) {
  require(!scenes.empty(), "NoScenes", "at least one scene is required");
  const Rect extent = buffered_extent(poly, r);
  const Scene& ref = scenes.back();
  const int channels = ref.image.channels;
  for (const auto& s : scenes) {
    require(s.image.channels == channels, "ChannelMismatch", "all scenes must share a channel count");
  }

  PixelWindow win = clip_window(window_for_extent(extent, ref.transform), ref.image.height, ref.image.width);
  if (win.empty()) fail("FootprintOutsideImagery", "buffered extent of '" + poly.id + "' misses the imagery");

  ChipStack chips;
  chips.id = poly.id;
  chips.radius = r;
  chips.transform = ref.transform.shifted(win.col0, win.row0);
  try {
    chips.mask = rasterize_polygon(poly, extent, chips.transform, win.rows, win.cols);
  } catch (const Error& e) {
    if (e.code() == "EmptyFootprintMask") {
      fail("FootprintOutsideImagery", "footprint '" + poly.id + "' has no pixels inside the imagery");
    }
    throw;
  }
  if (chips.mask.count() == chips.mask.size()) {
    fail("EmptyNeighborhood", "footprint '" + poly.id + "' covers its whole buffered extent");
  }

  chips.layers.reserve(scenes.size());
  chips.years.reserve(scenes.size());
  for (const auto& s : scenes) {
    const bool same_grid = s.transform == ref.transform && s.image.height == ref.image.height &&
                           s.image.width == ref.image.width;
    chips.layers.push_back(same_grid ? detail::crop_direct(s.image, win)
                                     : detail::crop_nearest(s, chips.transform, win.rows, win.cols));
    chips.years.push_back(s.year);
  }
  return chips;
}

inline Rect scene_extent(const Scene& scene) {
  const auto& g = scene.transform;
  const Point pts[4] = {g.to_world(0, 0), g.to_world(scene.image.width, 0), g.to_world(0, scene.image.height),
                        g.to_world(scene.image.width, scene.image.height)};
  Rect r{pts[0].x, pts[0].y, pts[0].x, pts[0].y};
  for (const auto& p : pts) {
    r.min_x = std::min(r.min_x, p.x);
    r.max_x = std::max(r.max_x, p.x);
    r.min_y = std::min(r.min_y, p.y);
    r.max_y = std::max(r.max_y, p.y);
  }
  return r;
}

}  // namespace tcm
