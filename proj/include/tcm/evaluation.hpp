#pragma once

// Accuracy / MAE scoring, repeated train-test splits and Spearman rank correlation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "hash.hpp"
#include "parallel.hpp"

namespace tcm {

struct Residual {
  std::string id;
  int predicted_year = 0;
  int label_year = 0;
};

struct EvalResult {
  double accuracy = 0.0;
  double mae_years = 0.0;
  double mae_index = 0.0;  // NaN without a time axis
  std::size_t n = 0;
  std::vector<Residual> residuals;  // sorted by id
};

// Scores every labeled id. `years` (optional) is the time axis used for
// index-step MAE.
inline EvalResult score(const std::map<std::string, int>& predictions, const std::map<std::string, int>& labels,
                        const std::vector<int>& years = {}) {
  require(!labels.empty(), "NoLabels", "no labels to score against");
  EvalResult r;
  std::size_t hits = 0;
  double abs_years = 0.0, abs_index = 0.0;
  bool index_ok = !years.empty();
  for (const auto& [id, label] : labels) {
    auto it = predictions.find(id);
    if (it == predictions.end()) fail("MissingPrediction", "no prediction for labeled footprint '" + id + "'");
    const int pred = it->second;
    hits += pred == label;
    abs_years += std::abs(pred - label);
    if (index_ok) {
      const auto pi = year_to_index(years, pred);
      const auto li = year_to_index(years, label);
      if (pi && li) {
        abs_index += std::abs(*pi - *li);
      } else {
        index_ok = false;
      }
    }
    r.residuals.push_back({id, pred, label});
  }
  r.n = labels.size();
  r.accuracy = static_cast<double>(hits) / static_cast<double>(r.n);
  r.mae_years = abs_years / static_cast<double>(r.n);
  r.mae_index = index_ok ? abs_index / static_cast<double>(r.n) : std::nan("");
  return r;
}

struct LabeledFootprint {
  std::string id;
  int label_index = 0;  // 1-based first layer the structure is visible
  int label_year = 0;
};

inline std::vector<LabeledFootprint> labeled_footprints(const Dataset& ds) {
  const auto years = ds.years();
  std::vector<LabeledFootprint> out;
  for (const auto& p : ds.footprints) {
    auto it = ds.label_years.find(p.id);
    if (it == ds.label_years.end()) continue;
    const auto idx = year_to_index(years, it->second);
    if (!idx) fail("LabelOutsideTimeAxis", "label year of '" + p.id + "' is not a scene year");
    out.push_back({p.id, *idx, it->second});
  }
  return out;
}

// A fitted-and-applied method for one split: returns 1-based predicted
// indices for `test`, given the row indices of the training items.
using SplitMethod =
    std::function<std::vector<int>(std::span<const std::size_t> train, std::span<const std::size_t> test)>;

struct SplitRecord {
  int repeat = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double accuracy = 0.0;
  double mae_years = 0.0;
  double mae_index = 0.0;
};

struct SplitSummary {
  double accuracy_mean = 0.0, accuracy_std = 0.0;
  double mae_years_mean = 0.0, mae_years_std = 0.0;
  double mae_index_mean = 0.0, mae_index_std = 0.0;
  std::vector<SplitRecord> records;
};

struct SplitOptions {
  int repeats = 50;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  int workers = 1;
};

// Train/test row indices for one repeat.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> make_split(std::size_t n, double train_fraction,
                                                                                std::uint64_t seed, int repeat) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(stable_hash(seed, 0x5b117ULL, static_cast<std::uint64_t>(repeat)));
  std::shuffle(perm.begin(), perm.end(), rng);
  auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  std::vector<std::size_t> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

namespace detail {
inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double m = 0.0;
  for (double x : v) m += x;
  m /= n;
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / n)};
}
}  // namespace detail

inline SplitSummary repeated_splits(const std::vector<LabeledFootprint>& data, const std::vector<int>& years,
                                    const SplitMethod& method, const SplitOptions& opt = {}) {
  require(data.size() >= 5, "TooFewLabels", "repeated splits need at least 5 labeled footprints");
  require(opt.repeats >= 1, "InvalidRepeats", "at least one repeat is required", ErrorKind::config);
  require(opt.train_fraction > 0.0 && opt.train_fraction < 1.0, "InvalidTrainFraction",
          "train fraction must lie in (0, 1)", ErrorKind::config);

  SplitSummary summary;
  summary.records.resize(static_cast<std::size_t>(opt.repeats));
  parallel_for(summary.records.size(), opt.workers, [&](std::size_t rep) {
    auto [train, test] = make_split(data.size(), opt.train_fraction, opt.seed, static_cast<int>(rep));
    const std::vector<int> pred = method(train, test);
    require(pred.size() == test.size(), "MethodOutputMismatch", "method returned the wrong number of predictions",
            ErrorKind::internal);
    std::map<std::string, int> preds, labels;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto& item = data[test[i]];
      const int p = pred[i];
      require(p >= 1 && p <= static_cast<int>(years.size()), "PredictionOutOfRange",
              "predicted index outside the time axis", ErrorKind::internal);
      preds[item.id] = years[static_cast<std::size_t>(p - 1)];
      labels[item.id] = item.label_year;
    }
    const EvalResult r = score(preds, labels, years);
    summary.records[rep] = {static_cast<int>(rep), train.size(), test.size(), r.accuracy, r.mae_years, r.mae_index};
  });

  std::vector<double> acc, mae, mae_idx;
  for (const auto& r : summary.records) {
    acc.push_back(r.accuracy);
    mae.push_back(r.mae_years);
    mae_idx.push_back(r.mae_index);
  }
  std::tie(summary.accuracy_mean, summary.accuracy_std) = detail::mean_std(acc);
  std::tie(summary.mae_years_mean, summary.mae_years_std) = detail::mean_std(mae);
  std::tie(summary.mae_index_mean, summary.mae_index_std) = detail::mean_std(mae_idx);
  return summary;
}

// Average ranks (1-based), ties share the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, "InvalidSpearmanInput", "need two equal-length samples of size >= 2");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) fail("DegenerateRanks", "one sample has zero rank variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace tcm
