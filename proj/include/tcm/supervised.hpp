#pragma once

// Label-trained variants and baselines: fitted thresholds, multinomial
// logistic regression, average-colour distances, colour-over-time features
// and the constant mode predictor.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "clustering.hpp"
#include "error.hpp"
#include "geom_raster.hpp"
#include "tcm_core.hpp"

namespace tcm {

// ---------------------------------------------------------------------------
// Thresholds

struct ThresholdFit {
  double theta = 0.0;
  double accuracy = 0.0;  // on the training series
};

namespace detail {

// theta values for which series `values` is predicted as `label` (1-based):
// [lo, hi) with hi = +inf when the label is the last layer.
struct CorrectInterval {
  double lo;
  double hi;
};

inline CorrectInterval correct_interval(std::span<const double> values, int label) {
  double lo = -std::numeric_limits<double>::infinity();
  for (int i = 0; i + 1 < label; ++i) lo = std::max(lo, values[static_cast<std::size_t>(i)]);
  const bool last = label == static_cast<int>(values.size());
  const double hi = last ? std::numeric_limits<double>::infinity() : values[static_cast<std::size_t>(label - 1)];
  return {lo, hi};
}

}  // namespace detail

// Exhaustive search over thresholds halfway between consecutive distinct
// observed values, plus one below the smallest and one above the largest.
// Maximizes exact-match accuracy of first_crossing; ties go to the smallest theta.
inline ThresholdFit fit_threshold(std::span<const std::vector<double>> series, std::span<const int> labels) {
  require(!series.empty(), "NoTrainingData", "threshold fitting needs at least one labeled series");
  require(series.size() == labels.size(), "LabelCountMismatch", "one label per series is required");

  std::vector<double> vals;
  std::vector<detail::CorrectInterval> intervals;
  intervals.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    require(!s.empty(), "EmptySeries", "series is empty");
    require(labels[i] >= 1 && labels[i] <= static_cast<int>(s.size()), "LabelOutOfRange",
            "label outside the series time axis");
    vals.insert(vals.end(), s.begin(), s.end());
    intervals.push_back(detail::correct_interval(s, labels[i]));
  }
  std::sort(vals.begin(), vals.end());
  vals.erase(std::unique(vals.begin(), vals.end()), vals.end());

  std::vector<double> candidates;
  candidates.reserve(vals.size() + 1);
  candidates.push_back(vals.front() > 0.0 ? 0.5 * vals.front() : vals.front() - 1.0);
  for (std::size_t i = 1; i < vals.size(); ++i) candidates.push_back(0.5 * (vals[i - 1] + vals[i]));
  candidates.push_back(vals.back() + std::max(1.0, std::abs(vals.back())));

  ThresholdFit best{candidates.front(), -1.0};
  for (double theta : candidates) {
    std::size_t hits = 0;
    for (const auto& iv : intervals) hits += (iv.lo <= theta && theta < iv.hi);
    const double acc = static_cast<double>(hits) / static_cast<double>(intervals.size());
    if (acc > best.accuracy) best = {theta, acc};
  }
  return best;
}

inline ThresholdFit fit_threshold(std::span<const DivergenceSeries> series, std::span<const int> labels) {
  std::vector<std::vector<double>> values;
  values.reserve(series.size());
  for (const auto& s : series) values.push_back(s.values);
  return fit_threshold(std::span<const std::vector<double>>(values), labels);
}

// ---------------------------------------------------------------------------
// Multinomial logistic regression

struct LrOptions {
  double lambda = 1e-3;
  int iterations = 500;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
};

struct LogisticModel {
  int classes = 0;
  std::size_t dim = 0;
  std::vector<double> weights;  // classes x dim, on standardized features
  std::vector<double> bias;     // classes
  std::vector<double> mean;     // standardization, per feature
  std::vector<double> scale;
  double lambda = 0.0;
  double learning_rate = 0.0;
  int iterations = 0;
  double final_loss = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> loss_trace;
};

namespace detail {

inline void softmax_inplace(std::span<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (auto& v : z) {
    v = std::exp(v - m);
    s += v;
  }
  for (auto& v : z) v /= s;
}

}  // namespace detail

// Mean cross-entropy plus lambda/2 * ||W||^2 on already-standardized rows.
// Fills the gradients when the output pointers are non-null.
inline double lr_objective(std::span<const double> weights, std::span<const double> bias, const FeatureMatrix& x,
                           std::span<const int> labels, int classes, double lambda,
                           std::vector<double>* grad_w = nullptr, std::vector<double>* grad_b = nullptr) {
  const std::size_t dim = x.dim;
  const auto kc = static_cast<std::size_t>(classes);
  if (grad_w) grad_w->assign(kc * dim, 0.0);
  if (grad_b) grad_b->assign(kc, 0.0);
  std::vector<double> z(kc);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto row = x.row(i);
    for (std::size_t c = 0; c < kc; ++c) {
      double s = bias[c];
      for (std::size_t t = 0; t < dim; ++t) s += weights[c * dim + t] * row[t];
      z[c] = s;
    }
    detail::softmax_inplace(z);
    const auto y = static_cast<std::size_t>(labels[i]);
    loss -= std::log(std::max(z[y], std::numeric_limits<double>::min())) * inv_n;
    if (grad_w || grad_b) {
      for (std::size_t c = 0; c < kc; ++c) {
        const double g = (z[c] - (c == y ? 1.0 : 0.0)) * inv_n;
        if (grad_b) (*grad_b)[c] += g;
        if (grad_w) {
          for (std::size_t t = 0; t < dim; ++t) (*grad_w)[c * dim + t] += g * row[t];
        }
      }
    }
  }
  double reg = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    reg += weights[i] * weights[i];
    if (grad_w) (*grad_w)[i] += lambda * weights[i];
  }
  return loss + 0.5 * lambda * reg;
}

inline FeatureMatrix standardize(const FeatureMatrix& x, std::span<const double> mean, std::span<const double> scale) {
  require(x.dim == mean.size(), "FeatureDimMismatch", "feature length does not match the model");
  FeatureMatrix out = x;
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto r = out.row(i);
    for (std::size_t t = 0; t < x.dim; ++t) r[t] = (r[t] - mean[t]) / scale[t];
  }
  return out;
}

// Full-batch gradient descent from zero weights on standardized features.
// `labels` are 0-based classes in [0, classes).
inline LogisticModel fit_lr(const FeatureMatrix& x, std::span<const int> labels, int classes,
                            const LrOptions& opt = {}) {
  require(x.rows == labels.size() && x.rows > 0, "LabelCountMismatch", "one label per feature row is required");
  require(classes >= 2, "DegenerateLabels", "need at least two classes");
  require(opt.iterations >= 0 && opt.learning_rate > 0.0 && opt.lambda >= 0.0, "InvalidLrOptions",
          "invalid logistic regression options", ErrorKind::config);
  for (int y : labels) require(y >= 0 && y < classes, "LabelOutOfRange", "class label outside [0, classes)");
  if (std::all_of(labels.begin(), labels.end(), [&](int y) { return y == labels[0]; })) {
    fail("DegenerateLabels", "training labels contain a single class");
  }

  LogisticModel m;
  m.classes = classes;
  m.dim = x.dim;
  m.lambda = opt.lambda;
  m.learning_rate = opt.learning_rate;
  m.iterations = opt.iterations;
  m.seed = opt.seed;
  m.mean.assign(x.dim, 0.0);
  m.scale.assign(x.dim, 1.0);
  for (std::size_t t = 0; t < x.dim; ++t) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) s += x.row(i)[t];
    const double mu = s / static_cast<double>(x.rows);
    double v = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) v += (x.row(i)[t] - mu) * (x.row(i)[t] - mu);
    const double sd = std::sqrt(v / static_cast<double>(x.rows));
    m.mean[t] = mu;
    m.scale[t] = sd > 1e-12 ? sd : 1.0;
  }
  const FeatureMatrix xs = standardize(x, m.mean, m.scale);

  m.weights.assign(static_cast<std::size_t>(classes) * x.dim, 0.0);
  m.bias.assign(static_cast<std::size_t>(classes), 0.0);
  std::vector<double> gw, gb;
  for (int it = 0; it < opt.iterations; ++it) {
    const double loss = lr_objective(m.weights, m.bias, xs, labels, classes, opt.lambda, &gw, &gb);
    m.loss_trace.push_back(loss);
    for (std::size_t i = 0; i < gw.size(); ++i) m.weights[i] -= opt.learning_rate * gw[i];
    for (std::size_t i = 0; i < gb.size(); ++i) m.bias[i] -= opt.learning_rate * gb[i];
  }
  m.final_loss = lr_objective(m.weights, m.bias, xs, labels, classes, opt.lambda);
  for (double w : m.weights) require(std::isfinite(w), "LrDiverged", "non-finite weight", ErrorKind::internal);
  return m;
}

inline std::vector<double> predict_proba(const LogisticModel& m, std::span<const double> features) {
  require(features.size() == m.dim, "FeatureDimMismatch", "feature length does not match the model");
  std::vector<double> z(static_cast<std::size_t>(m.classes));
  for (std::size_t c = 0; c < z.size(); ++c) {
    double s = m.bias[c];
    for (std::size_t t = 0; t < m.dim; ++t) s += m.weights[c * m.dim + t] * (features[t] - m.mean[t]) / m.scale[t];
    z[c] = s;
  }
  detail::softmax_inplace(z);
  return z;
}

// argmax class (0-based), ties to the lowest index.
inline std::vector<int> predict_lr(const LogisticModel& m, const FeatureMatrix& x) {
  std::vector<int> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto p = predict_proba(m, x.row(i));
    out[i] = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
  }
  return out;
}

inline FeatureMatrix to_feature_matrix(std::span<const std::vector<double>> rows) {
  require(!rows.empty(), "NoTrainingData", "no feature rows");
  FeatureMatrix fm;
  fm.rows = rows.size();
  fm.dim = rows.front().size();
  fm.data.reserve(fm.rows * fm.dim);
  for (const auto& r : rows) {
    require(r.size() == fm.dim, "FeatureDimMismatch", "feature rows differ in length");
    fm.data.insert(fm.data.end(), r.begin(), r.end());
  }
  return fm;
}

// ---------------------------------------------------------------------------
// Average colour

namespace detail {

inline std::vector<double> region_mean(const Raster& img, const Mask& mask, bool inside) {
  std::vector<double> sum(static_cast<std::size_t>(img.channels), 0.0);
  std::size_t n = 0;
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      if ((mask.at(r, c) != 0) != inside) continue;
      auto px = img.pixel(r, c);
      for (std::size_t ch = 0; ch < sum.size(); ++ch) sum[ch] += px[ch];
      ++n;
    }
  }
  if (n == 0) fail("EmptyRegion", inside ? "footprint has no pixels" : "neighborhood has no pixels");
  for (auto& v : sum) v /= static_cast<double>(n);
  return sum;
}

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace detail

// Per layer: distance between the footprint's and the neighbourhood's mean colour.
inline DivergenceSeries avg_color_series(const ChipStack& chips) {
  require(!chips.layers.empty(), "EmptyChipStack", "chip stack has no layers");
  DivergenceSeries s;
  s.id = chips.id;
  s.years = chips.years;
  for (const auto& layer : chips.layers) {
    const auto fp = detail::region_mean(layer, chips.mask, true);
    const auto nb = detail::region_mean(layer, chips.mask, false);
    s.values.push_back(detail::euclidean(fp, nb));
  }
  return s;
}

// Distances between the footprint's mean colour in consecutive layers (T-1 values).
inline std::vector<double> color_over_time_features(const ChipStack& chips) {
  if (chips.layers.size() < 2) fail("SeriesTooShort", "colour-over-time needs at least two layers");
  std::vector<std::vector<double>> means;
  for (const auto& layer : chips.layers) means.push_back(detail::region_mean(layer, chips.mask, true));
  std::vector<double> out;
  for (std::size_t i = 1; i < means.size(); ++i) out.push_back(detail::euclidean(means[i - 1], means[i]));
  return out;
}

// ---------------------------------------------------------------------------
// Mode

struct ModePredictor {
  int value = 0;
  int predict() const { return value; }
};

// Most frequent label; ties go to the smallest.
inline ModePredictor mode_predictor(std::span<const int> labels) {
  require(!labels.empty(), "NoTrainingData", "mode of an empty label set");
  std::map<int, std::size_t> counts;
  for (int y : labels) ++counts[y];
  ModePredictor m{counts.begin()->first};
  std::size_t best = 0;
  for (const auto& [y, n] : counts) {
    if (n > best) {
      best = n;
      m.value = y;
    }
  }
  return m;
}

}  // namespace tcm
