#pragma once

// Deterministic synthetic study areas with known construction years.
//
// Background: a smooth land-cover map (argmax of bilinearly upsampled random
// fields, one per palette colour) plus per-pixel Gaussian noise drawn afresh
// for every layer. A footprint looks exactly like background until its label
// layer, then gets a roof colour that is absent from the palette. Each layer
// finally receives an independent per-channel gain/offset, so colours are not
// comparable across years.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "geom_raster.hpp"
#include "hash.hpp"

namespace tcm {

using Color = std::array<double, 3>;

struct SynthConfig {
  int height = 256;
  int width = 256;
  int channels = 3;
  int layers = 5;
  int first_year = 2016;
  int footprints = 200;
  double min_size = 3.0;    // footprint short side, pixels
  double max_size = 5.0;
  double elongation = 3.0;  // long side is up to this multiple of the short side
  int farm_max = 4;         // footprints per farm, drawn uniformly from 1..farm_max
  double farm_gap = 3.0;    // pixels between neighbouring footprints of a farm
  double margin = 12.0;     // pixels of clearance around every farm box
  int spacing = 2;          // minimum pixel gap between farm boxes
  double pre_existing_prob = 0.3;
  std::vector<double> year_weights;  // relative weights of labels 2..T; empty = uniform
  std::vector<Color> palette{{80, 120, 60}, {45, 75, 40}, {150, 120, 90}, {175, 165, 110}};
  std::vector<Color> roofs{{225, 225, 230}, {170, 55, 45}, {70, 90, 150}};
  double roof_jitter = 10.0;
  double patch_scale = 24.0;  // land-cover correlation length, pixels
  double noise_sigma = 6.0;
  bool color_shift = true;
  double gain_jitter = 0.2;
  double offset_jitter = 20.0;
  double pixel_size = 1.0;  // world units per pixel
  double origin_x = 500000.0;
  double origin_y = 4300000.0;
  std::uint64_t seed = 42;

  void validate() const {
    auto bad = [](const char* msg) { fail("InvalidSynthConfig", msg, ErrorKind::config); };
    if (height < 1 || width < 1 || layers < 1 || footprints < 0) bad("sizes must be positive");
    if (channels != 3) bad("the generator produces 3-channel scenes");
    if (!(min_size > 0.0 && max_size >= min_size)) bad("invalid footprint size range");
    if (margin < 0.0 || spacing < 0 || farm_gap < 0.0) bad("margin and spacing must be >= 0");
    if (elongation < 1.0 || farm_max < 1) bad("invalid farm layout");
    if (!(pre_existing_prob >= 0.0 && pre_existing_prob <= 1.0)) bad("pre_existing_prob must lie in [0, 1]");
    if (!year_weights.empty() && static_cast<int>(year_weights.size()) != layers - 1) {
      bad("year_weights needs one entry per layer after the first");
    }
    for (double w : year_weights) {
      if (w < 0.0) bad("year weights must be >= 0");
    }
    if (palette.empty() || roofs.empty()) bad("palette and roofs must be nonempty");
    if (patch_scale <= 0.0 || noise_sigma < 0.0 || pixel_size <= 0.0) bad("invalid texture parameters");
  }

  AffineGeoTransform transform() const { return {pixel_size, 0.0, origin_x, 0.0, -pixel_size, origin_y}; }

  // Probability of each label index 1..T.
  std::vector<double> label_distribution() const {
    std::vector<double> p(static_cast<std::size_t>(layers), 0.0);
    if (layers == 1) {
      p[0] = 1.0;
      return p;
    }
    p[0] = pre_existing_prob;
    std::vector<double> w = year_weights.empty() ? std::vector<double>(static_cast<std::size_t>(layers - 1), 1.0)
                                                 : year_weights;
    double tw = 0.0;
    for (double v : w) tw += v;
    if (tw <= 0.0) {
      p[0] = 1.0;
      return p;
    }
    for (std::size_t i = 0; i < w.size(); ++i) p[i + 1] = (1.0 - pre_existing_prob) * w[i] / tw;
    return p;
  }
};

struct SynthFootprint {
  Polygon polygon;  // world coordinates
  int label_index = 1;
  int label_year = 0;
  int roof = 0;
  std::vector<std::size_t> pixels;  // row-major scene pixel indices inside the polygon
};

struct SynthDataset {
  Dataset dataset;
  std::vector<SynthFootprint> footprints;
  std::vector<int> land_cover;  // palette index per pixel, row-major
  std::vector<std::array<double, 6>> color_transforms;  // per layer: gain r,g,b then offset r,g,b
};

namespace detail {

// Bilinearly upsampled uniform field with cells of `scale` pixels.
inline std::vector<double> smooth_field(int h, int w, double scale, std::mt19937_64& rng) {
  const int gh = static_cast<int>(std::ceil(h / scale)) + 2;
  const int gw = static_cast<int>(std::ceil(w / scale)) + 2;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> grid(static_cast<std::size_t>(gh) * static_cast<std::size_t>(gw));
  for (auto& v : grid) v = u(rng);
  auto g = [&](int r, int c) { return grid[static_cast<std::size_t>(r) * static_cast<std::size_t>(gw) + static_cast<std::size_t>(c)]; };
  std::vector<double> out(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
  for (int r = 0; r < h; ++r) {
    const double fy = (r + 0.5) / scale;
    const int y0 = static_cast<int>(fy);
    const double ty = fy - y0;
    for (int c = 0; c < w; ++c) {
      const double fx = (c + 0.5) / scale;
      const int x0 = static_cast<int>(fx);
      const double tx = fx - x0;
      const double top = g(y0, x0) * (1 - tx) + g(y0, x0 + 1) * tx;
      const double bot = g(y0 + 1, x0) * (1 - tx) + g(y0 + 1, x0 + 1) * tx;
      out[static_cast<std::size_t>(r) * static_cast<std::size_t>(w) + static_cast<std::size_t>(c)] = top * (1 - ty) + bot * ty;
    }
  }
  return out;
}

inline int sample_label(const std::vector<double>& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = u(rng);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    x -= probs[i];
    if (x < 0.0) return static_cast<int>(i) + 1;
  }
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return static_cast<int>(i) + 1;
  }
  return 1;
}

}  // namespace detail

inline SynthDataset generate(const SynthConfig& cfg) {
  cfg.validate();
  const int H = cfg.height, W = cfg.width, T = cfg.layers;
  const std::size_t npx = static_cast<std::size_t>(H) * static_cast<std::size_t>(W);
  const AffineGeoTransform gt = cfg.transform();

  SynthDataset out;

  // Land cover.
  {
    std::mt19937_64 rng(stable_hash(cfg.seed, "land-cover", 0));
    std::vector<std::vector<double>> fields;
    for (std::size_t j = 0; j < cfg.palette.size(); ++j) fields.push_back(detail::smooth_field(H, W, cfg.patch_scale, rng));
    out.land_cover.assign(npx, 0);
    for (std::size_t i = 0; i < npx; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < fields.size(); ++j) {
        if (fields[j][i] > fields[best][i]) best = j;
      }
      out.land_cover[i] = static_cast<int>(best);
    }
  }

  // Footprint placement, in pixel space. Footprints come in farms of
  // parallel rectangles sharing orientation, size and roof colour.
  std::vector<int> farm_of;
  {
    std::mt19937_64 rng(stable_hash(cfg.seed, "footprints", 0));
    std::uniform_real_distribution<double> uwidth(cfg.min_size, cfg.max_size);
    std::uniform_real_distribution<double> uunit(0.0, 1.0);
    std::uniform_real_distribution<double> uangle(0.0, std::numbers::pi);
    std::uniform_int_distribution<int> ufarm(1, std::max(1, cfg.farm_max));
    std::uniform_int_distribution<std::size_t> uroof(0, cfg.roofs.size() - 1);
    const auto label_probs = cfg.label_distribution();
    std::vector<Rect> farm_boxes;
    const AffineGeoTransform identity{};
    int farm_id = 0;

    while (static_cast<int>(out.footprints.size()) < cfg.footprints) {
      const int want = std::min(ufarm(rng), cfg.footprints - static_cast<int>(out.footprints.size()));
      bool placed = false;
      for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        const double bw = uwidth(rng);
        const double bl = bw * (1.0 + (cfg.elongation - 1.0) * uunit(rng));
        const double ang = uangle(rng);
        const double ca = std::cos(ang), sa = std::sin(ang);
        const double pitch = bw + cfg.farm_gap;
        const double half = 0.5 * std::hypot(bl, pitch * want);
        const double lo_x = cfg.margin + half, hi_x = W - cfg.margin - half;
        const double lo_y = cfg.margin + half, hi_y = H - cfg.margin - half;
        if (hi_x <= lo_x || hi_y <= lo_y) break;
        const double cx = lo_x + (hi_x - lo_x) * uunit(rng);
        const double cy = lo_y + (hi_y - lo_y) * uunit(rng);

        std::vector<Polygon> barns;
        Rect fbox{1e300, 1e300, -1e300, -1e300};
        for (int b = 0; b < want; ++b) {
          // Offset across the long axis; the farm is centred on (cx, cy).
          const double off = (b - 0.5 * (want - 1)) * pitch;
          Polygon poly;
          for (auto [u, v] : {std::pair{-0.5, -0.5}, {0.5, -0.5}, {0.5, 0.5}, {-0.5, 0.5}}) {
            const double dx = u * bl, dy = v * bw + off;
            poly.exterior.push_back({cx + dx * ca - dy * sa, cy + dx * sa + dy * ca});
          }
          const Rect bb = bounding_box(poly);
          fbox = {std::min(fbox.min_x, bb.min_x), std::min(fbox.min_y, bb.min_y), std::max(fbox.max_x, bb.max_x),
                  std::max(fbox.max_y, bb.max_y)};
          barns.push_back(std::move(poly));
        }
        const Rect grown{fbox.min_x - cfg.spacing, fbox.min_y - cfg.spacing, fbox.max_x + cfg.spacing,
                         fbox.max_y + cfg.spacing};
        if (std::any_of(farm_boxes.begin(), farm_boxes.end(), [&](const Rect& b) { return b.intersects(grown); })) {
          continue;
        }

        // Every barn must cover at least one pixel centre.
        std::vector<std::vector<std::size_t>> pixels;
        for (const auto& poly : barns) {
          const Rect bb = bounding_box(poly);
          const PixelWindow win = clip_window(window_for_extent(bb, identity), H, W);
          std::vector<std::size_t> px;
          if (!win.empty()) {
            try {
              const Mask local = rasterize_polygon(poly, bb, identity.shifted(win.col0, win.row0), win.rows, win.cols);
              for (int r = 0; r < win.rows; ++r) {
                for (int c = 0; c < win.cols; ++c) {
                  if (local.at(r, c)) {
                    px.push_back(static_cast<std::size_t>(win.row0 + r) * static_cast<std::size_t>(W) +
                                 static_cast<std::size_t>(win.col0 + c));
                  }
                }
              }
            } catch (const Error&) {
            }
          }
          if (px.empty()) break;
          pixels.push_back(std::move(px));
        }
        if (pixels.size() != barns.size()) continue;

        const int roof = static_cast<int>(uroof(rng));
        for (std::size_t b = 0; b < barns.size(); ++b) {
          SynthFootprint fp;
          char name[32];
          std::snprintf(name, sizeof(name), "fp_%05zu", out.footprints.size());
          fp.polygon.id = name;
          for (const auto& p : barns[b].exterior) fp.polygon.exterior.push_back(gt.to_world(p.x, p.y));
          fp.pixels = std::move(pixels[b]);
          fp.label_index = detail::sample_label(label_probs, rng);
          fp.label_year = cfg.first_year + fp.label_index - 1;
          fp.roof = roof;
          out.footprints.push_back(std::move(fp));
          farm_of.push_back(farm_id);
        }
        farm_boxes.push_back(fbox);
        ++farm_id;
        placed = true;
      }
      if (!placed) fail("SceneTooCrowded", "could not place footprint " + std::to_string(out.footprints.size()));
    }
  }

  // Per-building roof tint, fixed over time.
  std::vector<Color> roof_color(out.footprints.size());
  {
    std::mt19937_64 rng(stable_hash(cfg.seed, "roof-tint", 0));
    std::uniform_real_distribution<double> u(-cfg.roof_jitter, cfg.roof_jitter);
    for (std::size_t i = 0; i < out.footprints.size(); ++i) {
      if (i > 0 && farm_of[i] == farm_of[i - 1]) {
        roof_color[i] = roof_color[i - 1];
        continue;
      }
      const Color& base = cfg.roofs[static_cast<std::size_t>(out.footprints[i].roof)];
      for (std::size_t ch = 0; ch < 3; ++ch) roof_color[i][ch] = base[ch] + u(rng);
    }
  }

  // Layers.
  for (int l = 0; l < T; ++l) {
    std::mt19937_64 rng(stable_hash(cfg.seed, "layer", static_cast<std::uint64_t>(l)));
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    std::vector<double> px(npx * 3);
    for (std::size_t i = 0; i < npx; ++i) {
      const Color& base = cfg.palette[static_cast<std::size_t>(out.land_cover[i])];
      for (std::size_t ch = 0; ch < 3; ++ch) px[i * 3 + ch] = base[ch] + noise(rng);
    }
    for (std::size_t f = 0; f < out.footprints.size(); ++f) {
      const auto& fp = out.footprints[f];
      if (l + 1 < fp.label_index) continue;
      for (std::size_t i : fp.pixels) {
        for (std::size_t ch = 0; ch < 3; ++ch) px[i * 3 + ch] = roof_color[f][ch] + noise(rng);
      }
    }

    std::array<double, 6> tr{1, 1, 1, 0, 0, 0};
    if (cfg.color_shift) {
      std::uniform_real_distribution<double> ug(1.0 - cfg.gain_jitter, 1.0 + cfg.gain_jitter);
      std::uniform_real_distribution<double> uo(-cfg.offset_jitter, cfg.offset_jitter);
      for (int ch = 0; ch < 3; ++ch) tr[static_cast<std::size_t>(ch)] = ug(rng);
      for (int ch = 0; ch < 3; ++ch) tr[static_cast<std::size_t>(3 + ch)] = uo(rng);
    }
    out.color_transforms.push_back(tr);

    Scene scene;
    scene.year = cfg.first_year + l;
    scene.transform = gt;
    scene.image = Raster(H, W, 3);
    for (std::size_t i = 0; i < npx; ++i) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double v = tr[ch] * px[i * 3 + ch] + tr[3 + ch];
        scene.image.data[i * 3 + ch] = static_cast<float>(std::clamp(std::round(v), 0.0, 255.0));
      }
    }
    out.dataset.scenes.push_back(std::move(scene));
  }

  for (const auto& fp : out.footprints) {
    out.dataset.footprints.push_back(fp.polygon);
    out.dataset.label_years[fp.polygon.id] = fp.label_year;
  }
  return out;
}

}  // namespace tcm
