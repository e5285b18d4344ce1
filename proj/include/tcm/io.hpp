#pragma once

// File formats: TCS rasters (+ JSON sidecars), GeoJSON footprints, label CSV.
//
// TCS layout, all integers little-endian:
//   "TCS1" | u32 T | u32 H | u32 W | u32 C | u8 dtype (1=u8, 2=u16, 4=f32)
//   | T*H*W*C samples ordered [t][channel][row][col]
//   | H*W u8 mask bytes (chip files only)

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dataset.hpp"
#include "error.hpp"
#include "geom_raster.hpp"
#include "raster.hpp"

namespace tcm::io {

namespace fs = std::filesystem;
using nlohmann::json;

enum class DType : std::uint8_t { u8 = 1, u16 = 2, f32 = 4 };

struct TcsFile {
  DType dtype = DType::u8;
  std::vector<Raster> layers;
  std::optional<Mask> mask;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)])) << (8 * i);
  return v;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) fail("FileNotFound", "cannot open " + p.string(), ErrorKind::data);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& p, const std::string& bytes) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) fail("WriteFailed", "cannot write " + p.string(), ErrorKind::data);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail("WriteFailed", "short write to " + p.string(), ErrorKind::data);
}

inline std::size_t sample_size(DType t) { return static_cast<std::size_t>(t); }

}  // namespace detail

inline std::string encode_tcs(const std::vector<Raster>& layers, DType dtype, const Mask* mask = nullptr) {
  require(!layers.empty(), "InvalidTcs", "TCS needs at least one layer");
  const Raster& first = layers.front();
  for (const auto& l : layers) require(l.same_shape(first), "InvalidTcs", "TCS layers must share a shape");
  if (mask) require(mask->height == first.height && mask->width == first.width, "InvalidTcs", "mask shape mismatch");

  std::string out = "TCS1";
  detail::put_u32(out, static_cast<std::uint32_t>(layers.size()));
  detail::put_u32(out, static_cast<std::uint32_t>(first.height));
  detail::put_u32(out, static_cast<std::uint32_t>(first.width));
  detail::put_u32(out, static_cast<std::uint32_t>(first.channels));
  out.push_back(static_cast<char>(dtype));
  out.reserve(out.size() + layers.size() * first.data.size() * detail::sample_size(dtype) +
              (mask ? mask->size() : 0));
  for (const auto& l : layers) {
    for (int ch = 0; ch < l.channels; ++ch) {
      for (int r = 0; r < l.height; ++r) {
        for (int c = 0; c < l.width; ++c) {
          const float v = l.at(r, c, ch);
          switch (dtype) {
            case DType::u8:
              out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0f, 255.0f))));
              break;
            case DType::u16: {
              const auto u = static_cast<std::uint16_t>(std::clamp(std::round(v), 0.0f, 65535.0f));
              out.push_back(static_cast<char>(u & 0xffu));
              out.push_back(static_cast<char>(u >> 8));
              break;
            }
            case DType::f32:
              detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
              break;
          }
        }
      }
    }
  }
  if (mask) {
    for (auto m : mask->data) out.push_back(static_cast<char>(m ? 1 : 0));
  }
  return out;
}

inline TcsFile decode_tcs(const std::string& bytes) {
  constexpr std::size_t header = 4 + 4 * 4 + 1;
  if (bytes.size() < header || bytes.compare(0, 4, "TCS1") != 0) fail("MalformedTcs", "missing TCS1 header");
  const std::uint32_t T = detail::get_u32(bytes, 4), H = detail::get_u32(bytes, 8), W = detail::get_u32(bytes, 12),
                      C = detail::get_u32(bytes, 16);
  const auto code = static_cast<std::uint8_t>(bytes[20]);
  if (code != 1 && code != 2 && code != 4) fail("MalformedTcs", "unknown dtype code " + std::to_string(code));
  if (T == 0 || H == 0 || W == 0 || C == 0) fail("MalformedTcs", "zero dimension in TCS header");
  TcsFile f;
  f.dtype = static_cast<DType>(code);
  const std::uint64_t npx = static_cast<std::uint64_t>(H) * W;
  const std::uint64_t nsamples = static_cast<std::uint64_t>(T) * npx * C;
  const std::uint64_t body = nsamples * detail::sample_size(f.dtype);
  const std::uint64_t remaining = bytes.size() - header;
  if (remaining != body && remaining != body + npx) fail("MalformedTcs", "TCS payload size does not match header");

  std::size_t pos = header;
  for (std::uint32_t t = 0; t < T; ++t) {
    Raster r(static_cast<int>(H), static_cast<int>(W), static_cast<int>(C));
    for (std::uint32_t ch = 0; ch < C; ++ch) {
      for (std::uint32_t row = 0; row < H; ++row) {
        for (std::uint32_t col = 0; col < W; ++col) {
          float v = 0.0f;
          switch (f.dtype) {
            case DType::u8:
              v = static_cast<unsigned char>(bytes[pos]);
              pos += 1;
              break;
            case DType::u16:
              v = static_cast<float>(static_cast<unsigned char>(bytes[pos]) |
                                     (static_cast<unsigned>(static_cast<unsigned char>(bytes[pos + 1])) << 8));
              pos += 2;
              break;
            case DType::f32:
              v = std::bit_cast<float>(detail::get_u32(bytes, pos));
              pos += 4;
              break;
          }
          r.at(static_cast<int>(row), static_cast<int>(col), static_cast<int>(ch)) = v;
        }
      }
    }
    f.layers.push_back(std::move(r));
  }
  if (remaining == body + npx) {
    Mask m(static_cast<int>(H), static_cast<int>(W));
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = bytes[pos + i] != 0 ? 1 : 0;
    f.mask = std::move(m);
  }
  return f;
}

inline void write_tcs(const fs::path& p, const std::vector<Raster>& layers, DType dtype, const Mask* mask = nullptr) {
  detail::write_file(p, encode_tcs(layers, dtype, mask));
}

inline TcsFile read_tcs(const fs::path& p) { return decode_tcs(detail::read_file(p)); }

// ---------------------------------------------------------------------------
// Scenes: <stem>.tcs (T=1) + <stem>.json {"year": int, "geotransform": [a,b,c,d,e,f]}

inline void write_scene(const fs::path& tcs_path, const Scene& scene, DType dtype = DType::u8) {
  write_tcs(tcs_path, {scene.image}, dtype);
  json side;
  side["year"] = scene.year;
  const auto g = scene.transform.to_array();
  side["geotransform"] = std::vector<double>(g.begin(), g.end());
  fs::path sp = tcs_path;
  sp.replace_extension(".json");
  detail::write_file(sp, side.dump(2) + "\n");
}

inline Scene read_scene(const fs::path& tcs_path) {
  TcsFile f = read_tcs(tcs_path);
  if (f.layers.size() != 1) fail("MalformedTcs", tcs_path.string() + ": scene files hold exactly one layer");
  if (f.mask) fail("MalformedTcs", tcs_path.string() + ": scene files carry no mask");
  fs::path sp = tcs_path;
  sp.replace_extension(".json");
  json side;
  try {
    side = json::parse(detail::read_file(sp));
    Scene s;
    s.image = std::move(f.layers.front());
    s.year = side.at("year").get<int>();
    const auto g = side.at("geotransform").get<std::vector<double>>();
    s.transform = AffineGeoTransform::from_array(g);
    return s;
  } catch (const json::exception& e) {
    fail("MalformedSidecar", sp.string() + ": " + e.what());
  }
}

// All *.tcs scenes of a directory, ordered by year.
inline std::vector<Scene> read_scenes_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail("FileNotFound", "scene directory " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".tcs") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Scene> scenes;
  for (const auto& f : files) scenes.push_back(read_scene(f));
  std::stable_sort(scenes.begin(), scenes.end(), [](const Scene& a, const Scene& b) { return a.year < b.year; });
  if (scenes.empty()) fail("NoScenes", "no .tcs scenes in " + dir.string());
  return scenes;
}

// ---------------------------------------------------------------------------
// Chip stacks: one TCS file with T layers and the footprint mask.

inline void write_chip_stack(const fs::path& p, const ChipStack& chips, DType dtype = DType::f32) {
  write_tcs(p, chips.layers, dtype, &chips.mask);
}

// ---------------------------------------------------------------------------
// GeoJSON footprints

struct FootprintFile {
  std::vector<Polygon> polygons;
  std::map<std::string, int> label_years;
};

inline FootprintFile parse_geojson(const std::string& text) {
  FootprintFile out;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail("MalformedGeoJson", e.what());
  }
  try {
    if (doc.at("type") != "FeatureCollection") fail("MalformedGeoJson", "expected a FeatureCollection");
    for (const auto& feat : doc.at("features")) {
      const auto& props = feat.at("properties");
      if (!props.is_object() || !props.contains("id")) fail("MissingFootprintId", "feature without an 'id' property");
      const auto& idv = props.at("id");
      Polygon poly;
      poly.id = idv.is_string() ? idv.get<std::string>() : idv.dump();
      const auto& geom = feat.at("geometry");
      const std::string type = geom.at("type").get<std::string>();
      if (type != "Polygon") fail("UnsupportedGeometry", "footprint '" + poly.id + "' is a " + type);
      const auto& rings = geom.at("coordinates");
      if (rings.empty()) fail("DegeneratePolygon", "footprint '" + poly.id + "' has no rings");
      for (std::size_t ri = 0; ri < rings.size(); ++ri) {
        Ring ring;
        for (const auto& pt : rings[ri]) ring.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
        if (ri == 0) {
          poly.exterior = std::move(ring);
        } else {
          poly.holes.push_back(std::move(ring));
        }
      }
      poly = normalize_polygon(std::move(poly));
      validate_polygon(poly);
      if (props.contains("label_year") && !props.at("label_year").is_null()) {
        out.label_years[poly.id] = props.at("label_year").get<int>();
      }
      out.polygons.push_back(std::move(poly));
    }
  } catch (const json::exception& e) {
    fail("MalformedGeoJson", e.what());
  }
  return out;
}

inline FootprintFile read_geojson(const fs::path& p) { return parse_geojson(detail::read_file(p)); }

inline json ring_to_json(const Ring& ring) {
  json r = json::array();
  for (const auto& p : ring) r.push_back({p.x, p.y});
  if (!ring.empty()) r.push_back({ring.front().x, ring.front().y});
  return r;
}

inline std::string to_geojson(const std::vector<Polygon>& polys, const std::map<std::string, int>& labels = {}) {
  json fc;
  fc["type"] = "FeatureCollection";
  fc["features"] = json::array();
  for (const auto& p : polys) {
    json feat;
    feat["type"] = "Feature";
    feat["properties"] = {{"id", p.id}};
    if (auto it = labels.find(p.id); it != labels.end()) feat["properties"]["label_year"] = it->second;
    json coords = json::array();
    coords.push_back(ring_to_json(p.exterior));
    for (const auto& h : p.holes) coords.push_back(ring_to_json(h));
    feat["geometry"] = {{"type", "Polygon"}, {"coordinates", coords}};
    fc["features"].push_back(std::move(feat));
  }
  return fc.dump() + "\n";
}

inline void write_geojson(const fs::path& p, const std::vector<Polygon>& polys,
                          const std::map<std::string, int>& labels = {}) {
  detail::write_file(p, to_geojson(polys, labels));
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

// Header must contain `id` and `label_year`; other columns are ignored.
inline std::map<std::string, int> parse_labels_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail("MalformedLabels", "labels file is empty");
  const auto header = split_csv_line(line);
  const auto id_col = std::find(header.begin(), header.end(), "id") - header.begin();
  const auto year_col = std::find(header.begin(), header.end(), "label_year") - header.begin();
  if (id_col == static_cast<std::ptrdiff_t>(header.size()) || year_col == static_cast<std::ptrdiff_t>(header.size())) {
    fail("MalformedLabels", "labels header needs 'id' and 'label_year'");
  }
  std::map<std::string, int> labels;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    const auto need = static_cast<std::size_t>(std::max(id_col, year_col));
    if (cells.size() <= need) fail("MalformedLabels", "short row at line " + std::to_string(lineno));
    try {
      labels[cells[static_cast<std::size_t>(id_col)]] = std::stoi(cells[static_cast<std::size_t>(year_col)]);
    } catch (const std::exception&) {
      fail("MalformedLabels", "bad label year at line " + std::to_string(lineno));
    }
  }
  return labels;
}

inline std::map<std::string, int> read_labels_csv(const fs::path& p) { return parse_labels_csv(detail::read_file(p)); }

inline void write_labels_csv(const fs::path& p, const std::map<std::string, int>& labels, const std::vector<int>& years) {
  std::string out = "id,label_year,label_index\n";
  for (const auto& [id, year] : labels) {
    const auto idx = year_to_index(years, year);
    out += id + "," + std::to_string(year) + "," + (idx ? std::to_string(*idx) : std::string()) + "\n";
  }
  detail::write_file(p, out);
}

inline void write_text(const fs::path& p, const std::string& text) { detail::write_file(p, text); }
inline std::string read_text(const fs::path& p) { return detail::read_file(p); }

// ---------------------------------------------------------------------------
// Dataset directories as written by the generator:
//   <dir>/scenes/*.tcs + *.json, <dir>/polygons.geojson, <dir>/labels.csv (optional)

inline Dataset load_dataset(const fs::path& scenes_dir, const fs::path& polygons,
                            const std::optional<fs::path>& labels = std::nullopt) {
  Dataset ds;
  ds.scenes = read_scenes_dir(scenes_dir);
  FootprintFile ff = read_geojson(polygons);
  ds.footprints = std::move(ff.polygons);
  ds.label_years = std::move(ff.label_years);
  if (labels) {
    for (const auto& [id, y] : read_labels_csv(*labels)) ds.label_years[id] = y;
  }
  ds.validate();
  return ds;
}

}  // namespace tcm::io
