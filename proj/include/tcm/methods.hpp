#pragma once

// The change-detection methods compared by `evaluate`, expressed as
// fit-on-train / predict-on-test closures over precomputed per-footprint
// series so repeated splits never recompute imagery features.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "calibration.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "parallel.hpp"
#include "supervised.hpp"
#include "tcm_core.hpp"

namespace tcm {

enum class Method { tcm_semi, tcm_supervised, tcm_lr, avgcolor_threshold, avgcolor_lr, color_over_time, mode };

inline const std::vector<Method>& all_methods() {
  static const std::vector<Method> m{Method::tcm_semi,    Method::tcm_supervised, Method::tcm_lr,
                                     Method::avgcolor_threshold, Method::avgcolor_lr, Method::color_over_time,
                                     Method::mode};
  return m;
}

inline std::string to_string(Method m) {
  switch (m) {
    case Method::tcm_semi: return "tcm_semi";
    case Method::tcm_supervised: return "tcm_supervised";
    case Method::tcm_lr: return "tcm_lr";
    case Method::avgcolor_threshold: return "avgcolor_threshold";
    case Method::avgcolor_lr: return "avgcolor_lr";
    case Method::color_over_time: return "color_over_time";
    case Method::mode: return "mode";
  }
  return "unknown";
}

inline Method method_from_string(const std::string& s) {
  for (Method m : all_methods()) {
    if (to_string(m) == s) return m;
  }
  fail("UnknownMethod", "unknown method '" + s + "'", ErrorKind::config);
}

inline bool uses_kl(Method m) { return m == Method::tcm_semi || m == Method::tcm_supervised || m == Method::tcm_lr; }
inline bool uses_avg_color(Method m) { return m == Method::avgcolor_threshold || m == Method::avgcolor_lr; }

// A fitted model in a form the detector can apply to new footprints.
struct FittedModel {
  Method method = Method::mode;
  int k = 0;         // KL methods only
  double r = 0.0;    // every method that crops chips
  double theta = 0.0;  // threshold methods
  std::optional<LogisticModel> logistic;
  int mode_index = 1;  // mode only
  double train_accuracy = 0.0;
};

// Per-footprint features for every method, computed once.
struct Workbench {
  const Dataset* dataset = nullptr;
  CalibrationOptions calibration;
  LrOptions lr;
  std::vector<int> years;
  std::vector<LabeledFootprint> labeled;
  std::vector<std::size_t> footprint_row;  // labeled item -> dataset footprint index

  std::optional<GridSeries> grid;
  std::optional<CalibrationReport> report;
  std::map<double, std::vector<DivergenceSeries>> avg_color;  // by r, dataset order
  std::vector<std::vector<double>> color_time;               // dataset order

  int layers() const { return static_cast<int>(years.size()); }
};

inline Workbench make_workbench(const Dataset& ds, const CalibrationOptions& copt, const LrOptions& lopt,
                                std::span<const Method> methods) {
  Workbench wb;
  wb.dataset = &ds;
  wb.calibration = copt;
  wb.lr = lopt;
  wb.years = ds.years();
  wb.labeled = labeled_footprints(ds);
  std::map<std::string, std::size_t> row;
  for (std::size_t i = 0; i < ds.footprints.size(); ++i) row[ds.footprints[i].id] = i;
  for (const auto& l : wb.labeled) wb.footprint_row.push_back(row.at(l.id));

  const bool need_kl = std::any_of(methods.begin(), methods.end(), uses_kl);
  const bool need_avg = std::any_of(methods.begin(), methods.end(), uses_avg_color);
  const bool need_cot = std::find(methods.begin(), methods.end(), Method::color_over_time) != methods.end();

  if (need_kl) {
    wb.grid = compute_grid_series(ds, copt);
    wb.report = calibrate_from_series(*wb.grid, copt, ds.label_years);
  }
  if (need_avg) {
    for (double r : copt.r_grid) {
      std::vector<DivergenceSeries> s(ds.footprints.size());
      parallel_for(s.size(), copt.workers,
                   [&](std::size_t i) { s[i] = avg_color_series(extract_chip_stack(ds.scenes, ds.footprints[i], r)); });
      wb.avg_color[r] = std::move(s);
    }
  }
  if (need_cot) {
    const double r = *std::min_element(copt.r_grid.begin(), copt.r_grid.end());
    wb.color_time.resize(ds.footprints.size());
    parallel_for(wb.color_time.size(), copt.workers, [&](std::size_t i) {
      wb.color_time[i] = color_over_time_features(extract_chip_stack(ds.scenes, ds.footprints[i], r));
    });
  }
  return wb;
}

namespace detail {

// Candidate feature sources for a method, in grid order (k-major, then r).
struct Candidate {
  int k = 0;
  double r = 0.0;
  const std::vector<DivergenceSeries>* series = nullptr;
};

inline std::vector<Candidate> candidates(const Workbench& wb, Method m) {
  std::vector<Candidate> out;
  if (uses_kl(m)) {
    require(wb.grid.has_value(), "WorkbenchIncomplete", "KL series were not computed", ErrorKind::internal);
    for (const auto& c : wb.grid->cells) out.push_back({c.k, c.r, &c.footprints});
  } else if (uses_avg_color(m)) {
    for (const auto& [r, s] : wb.avg_color) out.push_back({0, r, &s});
  }
  return out;
}

inline std::vector<int> label_indices(const Workbench& wb, std::span<const std::size_t> items) {
  std::vector<int> y;
  y.reserve(items.size());
  for (auto i : items) y.push_back(wb.labeled[i].label_index);
  return y;
}

inline double accuracy_of(std::span<const int> pred, std::span<const int> truth) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return pred.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(pred.size());
}

inline FeatureMatrix rows_for(const Workbench& wb, const std::vector<std::vector<double>>& per_footprint,
                              std::span<const std::size_t> items) {
  std::vector<std::vector<double>> rows;
  rows.reserve(items.size());
  for (auto i : items) rows.push_back(per_footprint[wb.footprint_row[i]]);
  return to_feature_matrix(rows);
}

inline std::vector<std::vector<double>> values_of(const std::vector<DivergenceSeries>& s) {
  std::vector<std::vector<double>> v;
  v.reserve(s.size());
  for (const auto& x : s) v.push_back(x.values);
  return v;
}

}  // namespace detail

// Fits `m` on the labeled items `train`. Grid hyperparameters (k, r) are
// chosen by training accuracy; ties keep the earlier grid cell.
inline FittedModel fit_method(const Workbench& wb, Method m, std::span<const std::size_t> train) {
  require(!train.empty(), "NoTrainingData", "empty training split");
  FittedModel fm;
  fm.method = m;
  const std::vector<int> y = detail::label_indices(wb, train);

  switch (m) {
    case Method::tcm_semi: {
      require(wb.report.has_value(), "WorkbenchIncomplete", "calibration missing", ErrorKind::internal);
      const auto& best = wb.report->best();
      fm.k = best.k;
      fm.r = best.r;
      fm.theta = best.theta;
      std::vector<int> pred;
      const auto& cell = wb.grid->cell(fm.k, fm.r);
      for (auto i : train) pred.push_back(first_crossing(cell.footprints[wb.footprint_row[i]], fm.theta).index);
      fm.train_accuracy = detail::accuracy_of(pred, y);
      return fm;
    }
    case Method::tcm_supervised:
    case Method::avgcolor_threshold: {
      bool first = true;
      for (const auto& c : detail::candidates(wb, m)) {
        std::vector<std::vector<double>> s;
        for (auto i : train) s.push_back((*c.series)[wb.footprint_row[i]].values);
        const ThresholdFit tf = fit_threshold(std::span<const std::vector<double>>(s), y);
        if (first || tf.accuracy > fm.train_accuracy) {
          fm.k = c.k;
          fm.r = c.r;
          fm.theta = tf.theta;
          fm.train_accuracy = tf.accuracy;
          first = false;
        }
      }
      return fm;
    }
    case Method::tcm_lr:
    case Method::avgcolor_lr:
    case Method::color_over_time: {
      std::vector<int> y0;
      for (int v : y) y0.push_back(v - 1);
      auto try_fit = [&](const std::vector<std::vector<double>>& feats, int k, double r, bool first) {
        const FeatureMatrix x = detail::rows_for(wb, feats, train);
        LogisticModel lm = fit_lr(x, y0, wb.layers(), wb.lr);
        const auto pred = predict_lr(lm, x);
        const double acc = detail::accuracy_of(pred, y0);
        if (first || acc > fm.train_accuracy) {
          fm.k = k;
          fm.r = r;
          fm.train_accuracy = acc;
          fm.logistic = std::move(lm);
        }
      };
      if (m == Method::color_over_time) {
        try_fit(wb.color_time, 0, *std::min_element(wb.calibration.r_grid.begin(), wb.calibration.r_grid.end()), true);
      } else {
        bool first = true;
        for (const auto& c : detail::candidates(wb, m)) {
          try_fit(detail::values_of(*c.series), c.k, c.r, first);
          first = false;
        }
      }
      return fm;
    }
    case Method::mode: {
      fm.mode_index = mode_predictor(y).predict();
      std::vector<int> pred(y.size(), fm.mode_index);
      fm.train_accuracy = detail::accuracy_of(pred, y);
      return fm;
    }
  }
  return fm;
}

// 1-based predicted layer for each item.
inline std::vector<int> predict_method(const Workbench& wb, const FittedModel& fm, std::span<const std::size_t> items) {
  std::vector<int> out;
  out.reserve(items.size());
  switch (fm.method) {
    case Method::tcm_semi:
    case Method::tcm_supervised: {
      const auto& cell = wb.grid->cell(fm.k, fm.r);
      for (auto i : items) out.push_back(first_crossing(cell.footprints[wb.footprint_row[i]], fm.theta).index);
      break;
    }
    case Method::avgcolor_threshold: {
      const auto& s = wb.avg_color.at(fm.r);
      for (auto i : items) out.push_back(first_crossing(s[wb.footprint_row[i]], fm.theta).index);
      break;
    }
    case Method::tcm_lr:
    case Method::avgcolor_lr:
    case Method::color_over_time: {
      std::vector<std::vector<double>> feats;
      if (fm.method == Method::tcm_lr) {
        feats = detail::values_of(wb.grid->cell(fm.k, fm.r).footprints);
      } else if (fm.method == Method::avgcolor_lr) {
        feats = detail::values_of(wb.avg_color.at(fm.r));
      } else {
        feats = wb.color_time;
      }
      for (int c : predict_lr(*fm.logistic, detail::rows_for(wb, feats, items))) out.push_back(c + 1);
      break;
    }
    case Method::mode:
      out.assign(items.size(), fm.mode_index);
      break;
  }
  return out;
}

inline SplitSummary evaluate_method(const Workbench& wb, Method m, const SplitOptions& opt) {
  SplitMethod fn = [&](std::span<const std::size_t> train, std::span<const std::size_t> test) {
    return predict_method(wb, fit_method(wb, m, train), test);
  };
  return repeated_splits(wb.labeled, wb.years, fn, opt);
}

// Scores a model fitted on every labeled footprint against those same labels.
inline EvalResult score_all(const Workbench& wb, const FittedModel& fm) {
  std::vector<std::size_t> all(wb.labeled.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto pred = predict_method(wb, fm, all);
  std::map<std::string, int> preds, labels;
  for (std::size_t i = 0; i < all.size(); ++i) {
    preds[wb.labeled[i].id] = wb.years[static_cast<std::size_t>(pred[i] - 1)];
    labels[wb.labeled[i].id] = wb.labeled[i].label_year;
  }
  return score(preds, labels, wb.years);
}

}  // namespace tcm
