#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include "property_suites.hpp"
#include "tcm/tcm_core.hpp"

using namespace tcm;

namespace {

Mask square_mask(int size, int lo, int hi) {
  Mask m(size, size);
  for (int r = lo; r < hi; ++r) {
    for (int c = lo; c < hi; ++c) m.at(r, c) = 1;
  }
  return m;
}

// Background of two noisy colours in a checker of 3x3 blocks; footprint
// pixels take the roof colour from layer `built` (1-based) on.
ChipStack barn_chip(int layers, int built, std::uint64_t seed, const std::string& id = "barn") {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 4.0);
  const std::array<std::array<double, 3>, 2> ground{{{80, 120, 60}, {150, 120, 90}}};
  const std::array<double, 3> roof{225, 225, 230};
  ChipStack c;
  c.id = id;
  c.mask = square_mask(16, 5, 11);
  for (int l = 1; l <= layers; ++l) {
    Raster img(16, 16, 3);
    for (int r = 0; r < 16; ++r) {
      for (int col = 0; col < 16; ++col) {
        const bool on_roof = l >= built && c.mask.at(r, col);
        const auto& base = on_roof ? roof : ground[static_cast<std::size_t>((r / 3 + col / 3) % 2)];
        for (int ch = 0; ch < 3; ++ch) img.at(r, col, ch) = static_cast<float>(base[static_cast<std::size_t>(ch)] + noise(rng));
      }
    }
    c.layers.push_back(std::move(img));
    c.years.push_back(2010 + l);
  }
  return c;
}

}  // namespace

TEST(Distribution, OneHotWithoutSmoothing) {
  Mask m(1, 1);
  m.at(0, 0) = 1;
  const std::vector<int> labels{3};
  const auto p = cluster_distribution(labels, m, Region::footprint, 4, 0.0);
  EXPECT_EQ(p.probabilities, (std::vector<double>{0, 0, 0, 1}));
}

TEST(Distribution, NormalizedCounts) {
  Mask m(1, 4);
  m.data = {1, 1, 1, 1};
  const std::vector<int> labels{0, 0, 1, 0};
  const auto p = cluster_distribution(labels, m, Region::footprint, 2, 0.0);
  EXPECT_DOUBLE_EQ(p.probabilities[0], 0.75);
  EXPECT_DOUBLE_EQ(p.probabilities[1], 0.25);
}

TEST(Distribution, AddOneSmoothing) {
  Mask m(1, 5);
  m.data = {0, 0, 0, 0, 1};
  const std::vector<int> labels{0, 2, 0, 2, 1};
  const auto q = cluster_distribution(labels, m, Region::neighborhood, 3, 1.0);
  EXPECT_NEAR(q.probabilities[0], 3.0 / 7.0, 1e-15);
  EXPECT_NEAR(q.probabilities[1], 1.0 / 7.0, 1e-15);
  EXPECT_NEAR(q.probabilities[2], 3.0 / 7.0, 1e-15);
}

TEST(Distribution, EmptyRegionFails) {
  Mask m(1, 2);
  m.data = {1, 1};
  const std::vector<int> labels{0, 1};
  try {
    cluster_distribution(labels, m, Region::neighborhood, 2, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "EmptyRegion");
  }
}

TEST(KL, SelfIsZero) {
  const DiscreteDistribution p{{0.2, 0.3, 0.5}};
  EXPECT_EQ(kl_divergence(p, p), 0.0);
}

TEST(KL, HandValues) {
  EXPECT_NEAR(kl_divergence({{1.0, 0.0}}, {{0.5, 0.5}}), std::log(2.0), 1e-15);
  EXPECT_NEAR(kl_divergence({{0.75, 0.25}}, {{0.5, 0.5}}), 0.75 * std::log(1.5) + 0.25 * std::log(0.5), 1e-15);
  EXPECT_NEAR(kl_divergence({{0.75, 0.25}}, {{0.5, 0.5}}), 0.130812, 1e-6);
}

TEST(KL, ZeroMassInQIsInfinite) { EXPECT_TRUE(std::isinf(kl_divergence({{0.5, 0.5}}, {{1.0, 0.0}}))); }

TEST(KL, SupportMismatch) {
  try {
    kl_divergence({{1.0}}, {{0.5, 0.5}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "SupportMismatch");
  }
}

TEST(KL, RandomPairsNonNegativeAndSelfZero) {
  const auto r = tcm_test::kl_suite(10000, 1234);
  EXPECT_TRUE(r.ok) << r.detail;
}

TEST(FirstCrossing, Examples) {
  const std::vector<double> a{0.1, 0.5, 0.6}, b{0.1, 0.1, 0.1}, c{0.9, 0.9};
  EXPECT_EQ(first_crossing(a, 0.3).index, 2);
  EXPECT_TRUE(first_crossing(a, 0.3).crossed);
  EXPECT_EQ(first_crossing(b, 0.3).index, 3);
  EXPECT_FALSE(first_crossing(b, 0.3).crossed);
  EXPECT_EQ(first_crossing(c, 0.3).index, 1);
}

TEST(FirstCrossing, StrictInequality) {
  const std::vector<double> v{0.3, 0.31};
  EXPECT_EQ(first_crossing(v, 0.3).index, 2);
}

TEST(FirstCrossing, EmptySeriesFails) { EXPECT_THROW(first_crossing(std::vector<double>{}, 0.1), Error); }

TEST(FirstCrossing, MonotoneInTheta) {
  const auto r = tcm_test::first_crossing_suite(1000, 77);
  EXPECT_TRUE(r.ok) << r.detail;
}

TEST(LayerDivergence, IdenticallyDrawnRegionsAreClose) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(100.0, 10.0);
  Raster img(32, 32, 3);
  for (auto& v : img.data) v = static_cast<float>(g(rng));
  const Mask m = square_mask(32, 10, 22);
  EXPECT_LT(layer_divergence(img, m, 8, {}, 1, 1.0), 0.1);
}

TEST(LayerDivergence, SolidFootprintAgainstUniformNeighbourhood) {
  Raster img(10, 10, 3, 40.0f);
  const Mask m = square_mask(10, 3, 7);
  for (int r = 3; r < 7; ++r) {
    for (int c = 3; c < 7; ++c) {
      for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = 220.0f;
    }
  }
  // Two clusters: footprint colour (16 px) and neighbourhood colour (84 px), add-one smoothing.
  const double p0 = 17.0 / 18.0, p1 = 1.0 / 18.0;
  const double q0 = 1.0 / 86.0, q1 = 85.0 / 86.0;
  const double expect = p0 * std::log(p0 / q0) + p1 * std::log(p1 / q1);
  EXPECT_NEAR(layer_divergence(img, m, 2, {}, 3, 1.0), expect, 1e-12);
  EXPECT_GT(expect, 3.0);
}

TEST(DivergenceSeries, LowBeforeConstructionHighAfter) {
  const ChipStack chips = barn_chip(5, 3, 11);
  const DivergenceSeries s = divergence_series(chips, 8, {}, 42);
  ASSERT_EQ(s.size(), 5u);
  const double low = std::max(s.values[0], s.values[1]);
  const double high = std::min({s.values[2], s.values[3], s.values[4]});
  EXPECT_LT(low, 0.5);
  EXPECT_GT(high, 1.5);
  EXPECT_EQ(s.years, chips.years);
}

TEST(DivergenceSeries, DeterministicPerSeedAndId) {
  const ChipStack chips = barn_chip(4, 2, 12);
  EXPECT_EQ(divergence_series(chips, 6, {}, 9), divergence_series(chips, 6, {}, 9));
  ChipStack renamed = chips;
  renamed.id = "other";
  EXPECT_EQ(layer_seed(9, "barn", 0), layer_seed(9, "barn", 0));
  EXPECT_NE(layer_seed(9, "barn", 0), layer_seed(9, "other", 0));
  EXPECT_NE(layer_seed(9, "barn", 0), layer_seed(9, "barn", 1));
  EXPECT_EQ(divergence_series(renamed, 6, {}, 9).size(), 4u);
}

TEST(DivergenceSeries, WindowFeaturesAlsoSeparate) {
  const ChipStack chips = barn_chip(3, 2, 13);
  const DivergenceSeries s = divergence_series(chips, 8, {FeatureMode::spectral_window, 1}, 1);
  EXPECT_LT(s.values[0], s.values[1]);
}

TEST(DivergenceSeries, ZeroEpsilonRejected) {
  EXPECT_THROW(divergence_series(barn_chip(2, 2, 1), 4, {}, 0, 0.0), Error);
}

TEST(DivergenceSeries, ColourPermutationInvariance) {
  // Discrete-valued layer: three colour classes; permuting the colours
  // between classes leaves the divergence unchanged.
  const std::array<std::array<float, 3>, 3> colours{{{10, 200, 30}, {90, 90, 90}, {240, 20, 140}}};
  std::mt19937_64 rng(2);
  Mask m = square_mask(12, 4, 8);
  std::vector<int> cls(144);
  for (int i = 0; i < 144; ++i) cls[static_cast<std::size_t>(i)] = m.data[static_cast<std::size_t>(i)] ? static_cast<int>(rng() % 2) : static_cast<int>(rng() % 3);
  const std::array<std::array<int, 3>, 6> perms{{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  std::vector<double> d;
  for (const auto& perm : perms) {
    Raster img(12, 12, 3);
    for (int i = 0; i < 144; ++i) {
      const auto& col = colours[static_cast<std::size_t>(perm[static_cast<std::size_t>(cls[static_cast<std::size_t>(i)])])];
      for (int ch = 0; ch < 3; ++ch) img.data[static_cast<std::size_t>(i * 3 + ch)] = col[static_cast<std::size_t>(ch)];
    }
    d.push_back(layer_divergence(img, m, 3, {}, 17, 1.0));
  }
  for (double v : d) EXPECT_NEAR(v, d.front(), 1e-12);
  EXPECT_GT(d.front(), 0.0);
}

TEST(Detect, BuiltAtLayerThreeOfFive) {
  const ChipStack chips = barn_chip(5, 3, 21);
  TcmParams p;
  p.k = 8;
  p.theta = 1.0;
  p.seed = 4;
  const DetectionResult r = detect(chips, p);
  EXPECT_EQ(r.index, 3);
  EXPECT_EQ(r.year, chips.years[2]);
  EXPECT_TRUE(r.crossed);
  EXPECT_EQ(r.series.size(), 5u);
}

TEST(Detect, AlwaysDevelopedAndNeverDeveloped) {
  TcmParams p;
  p.k = 8;
  p.theta = 1.0;
  EXPECT_EQ(detect(barn_chip(4, 1, 31), p).index, 1);
  const DetectionResult never = detect(barn_chip(4, 99, 32), p);
  EXPECT_EQ(never.index, 4);
  EXPECT_FALSE(never.crossed);
}

TEST(Detect, NegativeThetaRejected) {
  TcmParams p;
  p.theta = -1.0;
  EXPECT_THROW(detect(barn_chip(2, 1, 1), p), Error);
}
