#pragma once

// Command-line front end: generate, calibrate, detect, evaluate.
//
// Configuration is a JSON file (--config); every flag overrides the matching
// key. Exit codes: 0 ok, 2 configuration error, 3 data error, 4 internal error.
// Failures print one JSON object {"error": code, "message": text} on stderr.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "calibration.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "io.hpp"
#include "methods.hpp"
#include "parallel.hpp"
#include "supervised.hpp"
#include "synthgen.hpp"
#include "tcm_core.hpp"

namespace tcm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum class LogLevel { error = 0, info = 1, debug = 2 };

class Log {
 public:
  explicit Log(std::ostream& os) : os_(os) {
    if (const char* v = std::getenv("TCM_LOG")) {
      const std::string s = v;
      if (s == "error") level_ = LogLevel::error;
      else if (s == "debug") level_ = LogLevel::debug;
    }
  }
  void info(const std::string& msg) const { write(LogLevel::info, "info", msg); }
  void debug(const std::string& msg) const { write(LogLevel::debug, "debug", msg); }

 private:
  void write(LogLevel lvl, const char* tag, const std::string& msg) const {
    if (static_cast<int>(lvl) <= static_cast<int>(level_)) os_ << "[tcm " << tag << "] " << msg << "\n";
  }
  std::ostream& os_;
  LogLevel level_ = LogLevel::info;
};

struct RunConfig {
  // paths
  std::string data;  // dataset root: scenes/, polygons.geojson, labels.csv
  std::string scenes_dir;
  std::string polygons;
  std::string labels;
  std::string out = "out";
  std::string calibration_report;
  std::string model;

  // algorithm
  int k = 32;
  double r = 6.0;
  std::optional<double> theta;  // nullopt = "auto"
  PixelFeatureConfig features;
  double epsilon = 1.0;
  double percentile = 98.0;
  std::vector<int> k_grid{16, 32, 64};
  std::vector<double> r_grid{3.0, 6.0, 12.0};
  std::size_t n_random = 1000;
  std::size_t n_bins = 50;
  bool avoid_footprints = true;
  bool dump_chips = false;

  // evaluation
  std::string method = "tcm_semi";
  int repeats = 50;
  double train_fraction = 0.8;
  LrOptions lr;

  std::uint64_t seed = 42;
  int workers = 1;
  SynthConfig synth;

  CalibrationOptions calibration_options() const {
    CalibrationOptions o;
    o.k_grid = k_grid;
    o.r_grid = r_grid;
    o.n_random = n_random;
    o.n_bins = n_bins;
    o.percentile = percentile;
    o.features = features;
    o.epsilon = epsilon;
    o.avoid_footprints = avoid_footprints;
    o.seed = seed;
    o.workers = workers;
    return o;
  }

  void resolve_paths() {
    if (!data.empty()) {
      const fs::path root(data);
      if (scenes_dir.empty()) scenes_dir = (root / "scenes").string();
      if (polygons.empty()) polygons = (root / "polygons.geojson").string();
      if (labels.empty() && fs::exists(root / "labels.csv")) labels = (root / "labels.csv").string();
    }
  }

  void require_inputs() const {
    auto need = [](const std::string& p, const char* what) {
      if (p.empty()) fail("MissingPath", std::string("no ") + what + " configured", ErrorKind::config);
      if (!fs::exists(p)) fail("MissingPath", std::string(what) + " '" + p + "' does not exist", ErrorKind::config);
    };
    need(scenes_dir, "scenes directory");
    need(polygons, "polygons file");
    if (!labels.empty()) need(labels, "labels file");
    if (!calibration_report.empty()) need(calibration_report, "calibration report");
    if (!model.empty()) need(model, "model file");
  }
};

namespace detail {

template <class T>
void get_if(const json& j, const char* key, T& dst) {
  if (j.contains(key) && !j.at(key).is_null()) dst = j.at(key).get<T>();
}

inline SynthConfig synth_from_json(const json& j, SynthConfig c) {
  get_if(j, "height", c.height);
  get_if(j, "width", c.width);
  get_if(j, "layers", c.layers);
  get_if(j, "first_year", c.first_year);
  get_if(j, "footprints", c.footprints);
  get_if(j, "min_size", c.min_size);
  get_if(j, "max_size", c.max_size);
  get_if(j, "elongation", c.elongation);
  get_if(j, "farm_max", c.farm_max);
  get_if(j, "farm_gap", c.farm_gap);
  get_if(j, "margin", c.margin);
  get_if(j, "spacing", c.spacing);
  get_if(j, "pre_existing_prob", c.pre_existing_prob);
  get_if(j, "year_weights", c.year_weights);
  get_if(j, "roof_jitter", c.roof_jitter);
  get_if(j, "patch_scale", c.patch_scale);
  get_if(j, "noise_sigma", c.noise_sigma);
  get_if(j, "color_shift", c.color_shift);
  get_if(j, "gain_jitter", c.gain_jitter);
  get_if(j, "offset_jitter", c.offset_jitter);
  get_if(j, "pixel_size", c.pixel_size);
  get_if(j, "origin_x", c.origin_x);
  get_if(j, "origin_y", c.origin_y);
  get_if(j, "seed", c.seed);
  if (j.contains("palette")) c.palette = j.at("palette").get<std::vector<Color>>();
  if (j.contains("roofs")) c.roofs = j.at("roofs").get<std::vector<Color>>();
  return c;
}

inline json synth_to_json(const SynthConfig& c) {
  return {{"height", c.height},
          {"width", c.width},
          {"channels", c.channels},
          {"layers", c.layers},
          {"first_year", c.first_year},
          {"footprints", c.footprints},
          {"min_size", c.min_size},
          {"max_size", c.max_size},
          {"elongation", c.elongation},
          {"farm_max", c.farm_max},
          {"farm_gap", c.farm_gap},
          {"margin", c.margin},
          {"spacing", c.spacing},
          {"pre_existing_prob", c.pre_existing_prob},
          {"year_weights", c.year_weights},
          {"palette", c.palette},
          {"roofs", c.roofs},
          {"roof_jitter", c.roof_jitter},
          {"patch_scale", c.patch_scale},
          {"noise_sigma", c.noise_sigma},
          {"color_shift", c.color_shift},
          {"gain_jitter", c.gain_jitter},
          {"offset_jitter", c.offset_jitter},
          {"pixel_size", c.pixel_size},
          {"origin_x", c.origin_x},
          {"origin_y", c.origin_y},
          {"seed", c.seed}};
}

}  // namespace detail

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  try {
    detail::get_if(j, "data", c.data);
    detail::get_if(j, "scenes_dir", c.scenes_dir);
    detail::get_if(j, "polygons", c.polygons);
    detail::get_if(j, "labels", c.labels);
    detail::get_if(j, "out", c.out);
    detail::get_if(j, "calibration_report", c.calibration_report);
    detail::get_if(j, "model", c.model);
    detail::get_if(j, "k", c.k);
    detail::get_if(j, "r", c.r);
    if (j.contains("theta")) {
      const auto& t = j.at("theta");
      if (t.is_string()) {
        if (t.get<std::string>() != "auto") fail("InvalidTheta", "theta must be a number or \"auto\"", ErrorKind::config);
        c.theta.reset();
      } else if (!t.is_null()) {
        c.theta = t.get<double>();
      }
    }
    if (j.contains("feature_mode")) c.features.mode = feature_mode_from_string(j.at("feature_mode").get<std::string>());
    detail::get_if(j, "window", c.features.window_half);
    detail::get_if(j, "epsilon", c.epsilon);
    detail::get_if(j, "percentile", c.percentile);
    detail::get_if(j, "k_grid", c.k_grid);
    detail::get_if(j, "r_grid", c.r_grid);
    detail::get_if(j, "n_random", c.n_random);
    detail::get_if(j, "n_bins", c.n_bins);
    detail::get_if(j, "avoid_footprints", c.avoid_footprints);
    detail::get_if(j, "dump_chips", c.dump_chips);
    detail::get_if(j, "method", c.method);
    detail::get_if(j, "repeats", c.repeats);
    detail::get_if(j, "train_fraction", c.train_fraction);
    detail::get_if(j, "lambda", c.lr.lambda);
    detail::get_if(j, "lr_iterations", c.lr.iterations);
    detail::get_if(j, "learning_rate", c.lr.learning_rate);
    detail::get_if(j, "seed", c.seed);
    detail::get_if(j, "workers", c.workers);
    c.synth.seed = c.seed;
    if (j.contains("synth")) c.synth = detail::synth_from_json(j.at("synth"), c.synth);
  } catch (const json::exception& e) {
    fail("InvalidConfig", e.what(), ErrorKind::config);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Serialization

inline json histogram_to_json(const Histogram& h) { return {{"d_max", h.d_max}, {"masses", h.masses}}; }

inline Histogram histogram_from_json(const json& j) {
  Histogram h;
  h.d_max = j.at("d_max").get<double>();
  h.masses = j.at("masses").get<std::vector<double>>();
  return h;
}

inline json report_to_json(const CalibrationReport& rep, std::size_t n_bins) {
  json cells = json::array();
  for (const auto& r : rep.records) {
    json c{{"k", r.k}, {"r", r.r}, {"bc", r.bc}, {"theta", r.theta}, {"p", histogram_to_json(r.p)},
           {"q", histogram_to_json(r.q)}};
    if (r.accuracy) c["accuracy"] = *r.accuracy;
    cells.push_back(std::move(c));
  }
  const auto& b = rep.best();
  return {{"seed", rep.seed},
          {"n_random", rep.n_random},
          {"n_bins", n_bins},
          {"percentile", rep.percentile},
          {"feature_mode", to_string(rep.features.mode)},
          {"window", rep.features.window_half},
          {"epsilon", rep.epsilon},
          {"chosen", {{"k", b.k}, {"r", b.r}, {"theta", b.theta}, {"bc", b.bc}}},
          {"cells", cells}};
}

inline CalibrationReport report_from_json(const json& j) {
  try {
    CalibrationReport rep;
    rep.seed = j.at("seed").get<std::uint64_t>();
    rep.n_random = j.at("n_random").get<std::size_t>();
    rep.percentile = j.at("percentile").get<double>();
    rep.features.mode = feature_mode_from_string(j.at("feature_mode").get<std::string>());
    rep.features.window_half = j.at("window").get<int>();
    rep.epsilon = j.at("epsilon").get<double>();
    for (const auto& c : j.at("cells")) {
      CalibrationRecord r;
      r.k = c.at("k").get<int>();
      r.r = c.at("r").get<double>();
      r.bc = c.at("bc").get<double>();
      r.theta = c.at("theta").get<double>();
      r.p = histogram_from_json(c.at("p"));
      r.q = histogram_from_json(c.at("q"));
      if (c.contains("accuracy")) r.accuracy = c.at("accuracy").get<double>();
      rep.records.push_back(std::move(r));
    }
    const auto& ch = j.at("chosen");
    bool found = false;
    for (std::size_t i = 0; i < rep.records.size(); ++i) {
      if (rep.records[i].k == ch.at("k").get<int>() && rep.records[i].r == ch.at("r").get<double>()) {
        rep.chosen = i;
        found = true;
      }
    }
    if (!found) fail("MalformedReport", "chosen cell is not among the records", ErrorKind::config);
    return rep;
  } catch (const json::exception& e) {
    fail("MalformedReport", e.what(), ErrorKind::config);
  }
}

inline std::string report_csv(const CalibrationReport& rep) {
  std::string out = "k,r,bc,theta,accuracy,chosen\n";
  for (std::size_t i = 0; i < rep.records.size(); ++i) {
    const auto& r = rep.records[i];
    out += std::to_string(r.k) + "," + io::format_double(r.r) + "," + io::format_double(r.bc) + "," +
           io::format_double(r.theta) + "," + (r.accuracy ? io::format_double(*r.accuracy) : std::string()) + "," +
           (i == rep.chosen ? "1" : "0") + "\n";
  }
  return out;
}

struct ModelFile {
  FittedModel model;
  PixelFeatureConfig features;
  double epsilon = 1.0;
  std::uint64_t seed = 0;
  std::vector<int> years;
};

inline json model_to_json(const ModelFile& mf) {
  const auto& m = mf.model;
  json j{{"method", to_string(m.method)}, {"k", m.k},       {"r", m.r},
         {"theta", m.theta},              {"mode_index", m.mode_index}, {"train_accuracy", m.train_accuracy},
         {"feature_mode", to_string(mf.features.mode)}, {"window", mf.features.window_half},
         {"epsilon", mf.epsilon},         {"seed", mf.seed}, {"years", mf.years}};
  if (m.logistic) {
    const auto& l = *m.logistic;
    j["logistic"] = {{"classes", l.classes},   {"dim", l.dim},       {"weights", l.weights},
                     {"bias", l.bias},         {"mean", l.mean},     {"scale", l.scale},
                     {"lambda", l.lambda},     {"learning_rate", l.learning_rate},
                     {"iterations", l.iterations}, {"final_loss", l.final_loss}, {"seed", l.seed}};
  }
  return j;
}

inline ModelFile model_from_json(const json& j) {
  try {
    ModelFile mf;
    auto& m = mf.model;
    m.method = method_from_string(j.at("method").get<std::string>());
    m.k = j.at("k").get<int>();
    m.r = j.at("r").get<double>();
    m.theta = j.at("theta").get<double>();
    m.mode_index = j.at("mode_index").get<int>();
    m.train_accuracy = j.at("train_accuracy").get<double>();
    mf.features.mode = feature_mode_from_string(j.at("feature_mode").get<std::string>());
    mf.features.window_half = j.at("window").get<int>();
    mf.epsilon = j.at("epsilon").get<double>();
    mf.seed = j.at("seed").get<std::uint64_t>();
    mf.years = j.at("years").get<std::vector<int>>();
    if (j.contains("logistic")) {
      const auto& lj = j.at("logistic");
      LogisticModel l;
      l.classes = lj.at("classes").get<int>();
      l.dim = lj.at("dim").get<std::size_t>();
      l.weights = lj.at("weights").get<std::vector<double>>();
      l.bias = lj.at("bias").get<std::vector<double>>();
      l.mean = lj.at("mean").get<std::vector<double>>();
      l.scale = lj.at("scale").get<std::vector<double>>();
      l.lambda = lj.at("lambda").get<double>();
      l.learning_rate = lj.at("learning_rate").get<double>();
      l.iterations = lj.at("iterations").get<int>();
      l.final_loss = lj.at("final_loss").get<double>();
      l.seed = lj.at("seed").get<std::uint64_t>();
      if (l.weights.size() != static_cast<std::size_t>(l.classes) * l.dim || l.bias.size() != static_cast<std::size_t>(l.classes)) {
        fail("MalformedModel", "logistic weight shapes do not match", ErrorKind::config);
      }
      m.logistic = std::move(l);
    }
    return mf;
  } catch (const json::exception& e) {
    fail("MalformedModel", e.what(), ErrorKind::config);
  }
}

// ---------------------------------------------------------------------------
// Commands

inline Dataset load_inputs(const RunConfig& cfg) {
  cfg.require_inputs();
  return io::load_dataset(cfg.scenes_dir, cfg.polygons,
                          cfg.labels.empty() ? std::nullopt : std::optional<fs::path>(cfg.labels));
}

inline void cmd_generate(const RunConfig& cfg, const Log& log) {
  const SynthDataset sd = generate(cfg.synth);
  const fs::path out(cfg.out);
  for (const auto& s : sd.dataset.scenes) {
    io::write_scene(out / "scenes" / ("scene_" + std::to_string(s.year) + ".tcs"), s, io::DType::u8);
  }
  io::write_geojson(out / "polygons.geojson", sd.dataset.footprints);
  io::write_labels_csv(out / "labels.csv", sd.dataset.label_years, sd.dataset.years());
  io::write_text(out / "synth_config.json", detail::synth_to_json(cfg.synth).dump(2) + "\n");
  log.info("generated " + std::to_string(sd.footprints.size()) + " footprints over " +
           std::to_string(sd.dataset.scenes.size()) + " layers in " + out.string());
}

inline CalibrationReport cmd_calibrate(const RunConfig& cfg, const Log& log) {
  const Dataset ds = load_inputs(cfg);
  const auto opt = cfg.calibration_options();
  log.info("calibrating over " + std::to_string(opt.k_grid.size() * opt.r_grid.size()) + " (k, r) cells with " +
           std::to_string(opt.n_random) + " random polygons");
  const CalibrationReport rep = calibrate(ds, opt);
  const fs::path out(cfg.out);
  io::write_text(out / "calibration.json", report_to_json(rep, opt.n_bins).dump(2) + "\n");
  io::write_text(out / "calibration.csv", report_csv(rep));
  const auto& b = rep.best();
  log.info("chosen k=" + std::to_string(b.k) + " r=" + io::format_double(b.r) + " theta=" + io::format_double(b.theta) +
           " bc=" + io::format_double(b.bc));
  return rep;
}

struct DetectionRow {
  std::string id;
  int index = 0;
  int year = 0;
  bool crossed = false;
  std::vector<std::optional<double>> values;  // one per layer
};

inline std::string detections_csv(const std::vector<DetectionRow>& rows, int layers) {
  std::string out = "footprint_id,predicted_index,predicted_year,crossed";
  for (int l = 1; l <= layers; ++l) out += ",d_" + std::to_string(l);
  out += "\n";
  for (const auto& r : rows) {
    out += r.id + "," + std::to_string(r.index) + "," + std::to_string(r.year) + "," + (r.crossed ? "1" : "0");
    for (const auto& v : r.values) out += "," + (v ? io::format_double(*v) : std::string());
    out += "\n";
  }
  return out;
}

// Detection with fixed (k, r, theta); rows sorted by footprint id.
inline std::vector<DetectionRow> detect_all(const Dataset& ds, const TcmParams& params, int workers,
                                            const fs::path* chip_dir = nullptr) {
  std::vector<DetectionRow> rows(ds.footprints.size());
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    const ChipStack chips = extract_chip_stack(ds.scenes, ds.footprints[i], params.radius);
    if (chip_dir) io::write_chip_stack(*chip_dir / (chips.id + ".tcs"), chips);
    const DetectionResult d = detect(chips, params);
    DetectionRow row{d.id, d.index, d.year, d.crossed, {}};
    for (double v : d.series.values) row.values.emplace_back(v);
    rows[i] = std::move(row);
  });
  std::sort(rows.begin(), rows.end(), [](const DetectionRow& a, const DetectionRow& b) { return a.id < b.id; });
  return rows;
}

inline std::vector<DetectionRow> detect_with_model(const Dataset& ds, const ModelFile& mf, int workers) {
  const auto& m = mf.model;
  const int T = ds.layers();
  if (m.logistic) require(m.logistic->classes == T, "ModelMismatch", "model was trained on a different time axis");
  std::vector<DetectionRow> rows(ds.footprints.size());
  const auto years = ds.years();
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    DetectionRow row;
    row.id = ds.footprints[i].id;
    row.values.assign(static_cast<std::size_t>(T), std::nullopt);
    if (m.method == Method::mode) {
      row.index = m.mode_index;
    } else {
      const ChipStack chips = extract_chip_stack(ds.scenes, ds.footprints[i], m.r);
      std::vector<double> feats;
      if (m.method == Method::color_over_time) {
        feats = color_over_time_features(chips);
        for (std::size_t l = 0; l < feats.size(); ++l) row.values[l + 1] = feats[l];
      } else {
        feats = uses_kl(m.method) ? divergence_series(chips, m.k, mf.features, mf.seed, mf.epsilon).values
                                  : avg_color_series(chips).values;
        for (std::size_t l = 0; l < feats.size(); ++l) row.values[l] = feats[l];
      }
      if (m.logistic) {
        row.index = predict_lr(*m.logistic, to_feature_matrix(std::vector<std::vector<double>>{feats})).front() + 1;
      } else {
        const auto fc = first_crossing(feats, m.theta);
        row.index = fc.index;
        row.crossed = fc.crossed;
      }
    }
    row.year = years[static_cast<std::size_t>(row.index - 1)];
    rows[i] = std::move(row);
  });
  std::sort(rows.begin(), rows.end(), [](const DetectionRow& a, const DetectionRow& b) { return a.id < b.id; });
  return rows;
}

inline std::vector<DetectionRow> cmd_detect(const RunConfig& cfg, const Log& log) {
  const Dataset ds = load_inputs(cfg);
  const fs::path out(cfg.out);
  std::vector<DetectionRow> rows;
  if (!cfg.model.empty()) {
    const ModelFile mf = model_from_json(json::parse(io::read_text(cfg.model)));
    log.info("detecting with fitted " + to_string(mf.model.method) + " model");
    rows = detect_with_model(ds, mf, cfg.workers);
  } else {
    TcmParams p;
    p.k = cfg.k;
    p.radius = cfg.r;
    p.features = cfg.features;
    p.epsilon = cfg.epsilon;
    p.seed = cfg.seed;
    if (cfg.theta) {
      p.theta = *cfg.theta;
    } else {
      const CalibrationReport rep = !cfg.calibration_report.empty()
                                        ? report_from_json(json::parse(io::read_text(cfg.calibration_report)))
                                        : calibrate(ds, cfg.calibration_options());
      p.k = rep.best().k;
      p.radius = rep.best().r;
      p.theta = rep.best().theta;
      p.features = rep.features;
      p.epsilon = rep.epsilon;
      p.seed = rep.seed;
    }
    log.info("detecting with k=" + std::to_string(p.k) + " r=" + io::format_double(p.radius) +
             " theta=" + io::format_double(p.theta));
    const fs::path chip_dir = out / "chips";
    rows = detect_all(ds, p, cfg.workers, cfg.dump_chips ? &chip_dir : nullptr);
  }
  io::write_text(out / "detections.csv", detections_csv(rows, ds.layers()));
  return rows;
}

inline json summary_to_json(const SplitSummary& s) {
  return {{"accuracy_mean", s.accuracy_mean},     {"accuracy_std", s.accuracy_std},
          {"mae_years_mean", s.mae_years_mean},   {"mae_years_std", s.mae_years_std},
          {"mae_index_mean", s.mae_index_mean},   {"mae_index_std", s.mae_index_std},
          {"repeats", s.records.size()}};
}

inline json eval_to_json(const EvalResult& r) {
  return {{"accuracy", r.accuracy}, {"mae_years", r.mae_years}, {"mae_index", r.mae_index}, {"n", r.n}};
}

inline json cmd_evaluate(const RunConfig& cfg, const Log& log) {
  const Dataset ds = load_inputs(cfg);
  if (!ds.has_labels()) fail("NoLabels", "evaluate needs label years (labels file or GeoJSON label_year)", ErrorKind::config);
  std::vector<Method> methods;
  if (cfg.method == "all") {
    methods = all_methods();
  } else {
    methods.push_back(method_from_string(cfg.method));
  }
  const Workbench wb = make_workbench(ds, cfg.calibration_options(), cfg.lr, methods);
  SplitOptions so;
  so.repeats = cfg.repeats;
  so.train_fraction = cfg.train_fraction;
  so.seed = cfg.seed;
  so.workers = cfg.workers;

  const fs::path out(cfg.out);
  json metrics{{"n_labeled", wb.labeled.size()},   {"repeats", cfg.repeats}, {"train_fraction", cfg.train_fraction},
               {"seed", cfg.seed},                 {"years", wb.years},      {"methods", json::object()}};
  std::string csv = "method,repeat,n_train,n_test,accuracy,mae_years,mae_index\n";
  for (Method m : methods) {
    const std::string name = to_string(m);
    log.info("evaluating " + name + " over " + std::to_string(cfg.repeats) + " splits");
    const SplitSummary s = evaluate_method(wb, m, so);
    std::vector<std::size_t> all(wb.labeled.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const FittedModel full = fit_method(wb, m, all);
    json entry = summary_to_json(s);
    entry["all_labeled"] = eval_to_json(score_all(wb, full));
    metrics["methods"][name] = entry;
    for (const auto& r : s.records) {
      csv += name + "," + std::to_string(r.repeat) + "," + std::to_string(r.n_train) + "," + std::to_string(r.n_test) +
             "," + io::format_double(r.accuracy) + "," + io::format_double(r.mae_years) + "," +
             io::format_double(r.mae_index) + "\n";
    }
    ModelFile mf{full, cfg.features, cfg.epsilon, cfg.seed, wb.years};
    io::write_text(out / ("model_" + name + ".json"), model_to_json(mf).dump(2) + "\n");
    log.info(name + ": ACC " + io::format_double(s.accuracy_mean) + " +/- " + io::format_double(s.accuracy_std) +
             ", MAE " + io::format_double(s.mae_years_mean));
  }
  if (wb.report) io::write_text(out / "calibration.json", report_to_json(*wb.report, cfg.n_bins).dump(2) + "\n");
  io::write_text(out / "metrics.json", metrics.dump(2) + "\n");
  io::write_text(out / "splits.csv", csv);
  return metrics;
}

// ---------------------------------------------------------------------------
// Entry point

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::config: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::internal: return 4;
  }
  return 4;
}

inline void report_error(std::ostream& err, const std::string& code, const std::string& message) {
  err << json{{"error", code}, {"message", message}}.dump() << "\n";
}

inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"Temporal Cluster Matching: date the first appearance of structures in image time series"};
  app.require_subcommand(1);

  std::string config_path, theta_flag, out_flag, method_flag, data_flag, scenes_flag, polygons_flag, labels_flag,
      model_flag, calib_flag;
  std::optional<std::uint64_t> seed_flag;
  std::optional<int> workers_flag, k_flag;
  std::optional<double> r_flag;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--seed", seed_flag, "global seed");
    sub->add_option("--workers", workers_flag, "worker threads");
    sub->add_option("--out", out_flag, "output directory");
  };
  auto add_inputs = [&](CLI::App* sub) {
    sub->add_option("--data", data_flag, "dataset root (scenes/, polygons.geojson, labels.csv)");
    sub->add_option("--scenes", scenes_flag, "directory of .tcs scenes with .json sidecars");
    sub->add_option("--polygons", polygons_flag, "GeoJSON footprints");
    sub->add_option("--labels", labels_flag, "CSV of first-visible years");
  };

  auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
  add_common(gen);
  auto* cal = app.add_subcommand("calibrate", "choose k, r and theta without temporal labels");
  add_common(cal);
  add_inputs(cal);
  auto* det = app.add_subcommand("detect", "predict the first developed layer of every footprint");
  add_common(det);
  add_inputs(det);
  det->add_option("--k", k_flag, "cluster count");
  det->add_option("--r", r_flag, "buffer radius in polygon units");
  det->add_option("--theta", theta_flag, "divergence threshold or 'auto'");
  det->add_option("--model", model_flag, "fitted model JSON from evaluate");
  det->add_option("--calibration", calib_flag, "calibration report JSON for --theta auto");
  auto* ev = app.add_subcommand("evaluate", "repeated 80/20 evaluation of a method");
  add_common(ev);
  add_inputs(ev);
  ev->add_option("--method", method_flag, "tcm_semi|tcm_supervised|tcm_lr|avgcolor_threshold|avgcolor_lr|color_over_time|mode|all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error(err, "InvalidArguments", e.what());
    return 2;
  }

  const Log log(err);
  try {
    json j = json::object();
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) fail("MissingPath", "config file '" + config_path + "' does not exist", ErrorKind::config);
      try {
        j = json::parse(io::read_text(config_path));
      } catch (const json::exception& e) {
        fail("InvalidConfig", e.what(), ErrorKind::config);
      }
    }
    RunConfig cfg = config_from_json(j);
    if (seed_flag) {
      cfg.seed = *seed_flag;
      cfg.synth.seed = *seed_flag;
    }
    if (workers_flag) cfg.workers = *workers_flag;
    if (!out_flag.empty()) cfg.out = out_flag;
    if (!data_flag.empty()) cfg.data = data_flag;
    if (!scenes_flag.empty()) cfg.scenes_dir = scenes_flag;
    if (!polygons_flag.empty()) cfg.polygons = polygons_flag;
    if (!labels_flag.empty()) cfg.labels = labels_flag;
    if (!model_flag.empty()) cfg.model = model_flag;
    if (!calib_flag.empty()) cfg.calibration_report = calib_flag;
    if (!method_flag.empty()) cfg.method = method_flag;
    if (k_flag) cfg.k = *k_flag;
    if (r_flag) cfg.r = *r_flag;
    if (!theta_flag.empty()) {
      if (theta_flag == "auto") {
        cfg.theta.reset();
      } else {
        try {
          cfg.theta = std::stod(theta_flag);
        } catch (const std::exception&) {
          fail("InvalidTheta", "theta must be a number or 'auto'", ErrorKind::config);
        }
      }
    }
    if (cfg.workers < 1) fail("InvalidWorkers", "workers must be >= 1", ErrorKind::config);
    cfg.resolve_paths();

    if (gen->parsed()) {
      cmd_generate(cfg, log);
    } else if (cal->parsed()) {
      cmd_calibrate(cfg, log);
    } else if (det->parsed()) {
      cmd_detect(cfg, log);
    } else if (ev->parsed()) {
      cmd_evaluate(cfg, log);
    }
    return 0;
  } catch (const Error& e) {
    report_error(err, e.code(), e.message());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    report_error(err, "InternalError", e.what());
    return 4;
  }
}

}  // namespace tcm::cli
