#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "support/oracles.hpp"

namespace kamp {
namespace {

using testing::brute_k_bivariate;
using testing::brute_k_univariate;

PointPattern<double> two_points(double d, const std::string& a, const std::string& b) {
  Points<double> xy(2, 2);
  xy << 0.2, 0.5, 0.2 + d, 0.5;
  return make_pattern(std::move(xy), {a, b}, Window<double>{0, 1, 0, 1});
}

TEST(RadiusGridTest, Validation) {
  EXPECT_THROW(RadiusGrid<double>(ArrayX<double>()), Error);
  ArrayX<double> dup(3);
  dup << 0, 0.1, 0.1;
  EXPECT_THROW(RadiusGrid<double>{dup}, Error);
  ArrayX<double> neg(2);
  neg << -0.1, 0.1;
  EXPECT_THROW(RadiusGrid<double>{neg}, Error);

  const auto g = RadiusGrid<double>::default_for(Window<double>{0, 10, 0, 8});
  EXPECT_EQ(g.size(), 101);
  EXPECT_DOUBLE_EQ(g.max(), 2.0);
  EXPECT_NO_THROW(g.check_window(Window<double>{0, 10, 0, 8}));
  EXPECT_THROW(RadiusGrid<double>::uniform(0.6, 5).check_window(Window<double>{0, 1, 0, 1}), Error);

  const auto s = RadiusGrid<double>::from_step(1.0, 0.25);
  EXPECT_EQ(s.size(), 5);
  EXPECT_EQ(s.find(0.75), Index{3});
  EXPECT_FALSE(s.find(0.7).has_value());
}

TEST(BinLocatorTest, MatchesLowerBound) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1.2);
  ArrayX<double> irregular(4);
  irregular << 0.0, 0.1, 0.35, 1.0;
  for (const auto& grid : {RadiusGrid<double>::uniform(1.0, 101), RadiusGrid<double>{irregular}}) {
    BinLocator<double> bin(grid);
    for (int t = 0; t < 5000; ++t) {
      const double d = t < 101 ? grid.radii[std::min<Index>(t, grid.size() - 1)] : u(rng);
      const Index expected = std::lower_bound(grid.radii.data(), grid.radii.data() + grid.size(), d) - grid.radii.data();
      ASSERT_EQ(bin(d), expected) << d;
    }
  }
}

TEST(KUnivariateTest, SinglePair) {
  auto pp = two_points(0.1, "a", "a");
  ArrayX<double> r(4);
  r << 0.0, 0.05, 0.1, 0.3;
  auto k = k_univariate(pp, "a", RadiusGrid<double>{r}, EdgeCorrection::None);
  ArrayX<double> expected(4);
  expected << 0, 0, 1.0, 1.0;
  // 0.2 + 0.1 - 0.2 is not exactly 0.1, so compare just above and below.
  EXPECT_EQ(k.values[0], 0.0);
  EXPECT_EQ(k.values[1], 0.0);
  EXPECT_DOUBLE_EQ(k.values[3], 1.0);
  EXPECT_EQ(k.m1, 2);
}

TEST(KUnivariateTest, ZeroBelowMinimumDistance) {
  std::mt19937_64 rng(8);
  auto pp = testing::random_pattern(rng, 30, std::vector<std::string>(30, "a"));
  double dmin = 1e9;
  for (Index i = 0; i < 30; ++i)
    for (Index j = i + 1; j < 30; ++j) dmin = std::min(dmin, testing::dist(pp.xy, i, j));
  ArrayX<double> r(2);
  r << 0.0, dmin * 0.999;
  auto k = k_univariate(pp, "a", RadiusGrid<double>{r}, EdgeCorrection::Translation);
  EXPECT_EQ(k.values[0], 0.0);
  EXPECT_EQ(k.values[1], 0.0);
}

TEST(KUnivariateTest, InsufficientPoints) {
  auto pp = two_points(0.1, "a", "b");
  try {
    k_univariate(pp, "a", RadiusGrid<double>::uniform(0.3, 4), EdgeCorrection::None);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientPoints);
  }
}

TEST(KUnivariateTest, MatchesBruteForce) {
  std::mt19937_64 rng(99);
  const Window<double> w{0, 10, 0, 10};
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<std::string> marks(200);
    for (std::size_t i = 0; i < marks.size(); ++i) marks[i] = i % 3 ? "a" : "b";
    auto pp = testing::random_pattern(rng, 200, marks, w);
    const auto grid = RadiusGrid<double>::uniform(2.5, 26);
    for (auto corr : {EdgeCorrection::None, EdgeCorrection::Translation}) {
      auto k = k_univariate(pp, "a", grid, corr);
      for (Index t = 0; t < grid.size(); ++t) {
        const double ref = brute_k_univariate(pp, "a", grid.radii[t], corr);
        EXPECT_NEAR(k.values[t], ref, 1e-12 * std::max(1.0, std::abs(ref)));
      }
    }
  }
}

TEST(KUnivariateTest, MonotoneAndCsrMean) {
  const auto grid = RadiusGrid<double>::uniform(2.5, 6);
  ArrayX<double> sum = ArrayX<double>::Zero(grid.size()), sum_sq = ArrayX<double>::Zero(grid.size());
  const int reps = 100;
  for (int rep = 0; rep < reps; ++rep) {
    SimScenario sc;
    sc.lambda_n = 200;
    sc.abundance = 0.5;
    sc.seed = 1000 + rep;
    auto pp = sim_hom_null(sc);
    // Every point marked.
    std::fill(pp.marks.begin(), pp.marks.end(), pp.require_code(kImmune));
    auto k = k_univariate(pp, kImmune, grid, EdgeCorrection::Translation);
    for (Index t = 1; t < grid.size(); ++t) EXPECT_GE(k.values[t], k.values[t - 1]);
    sum += k.values;
    sum_sq += k.values.square();
  }
  const ArrayX<double> mean = sum / reps;
  const ArrayX<double> se = ((sum_sq / reps - mean.square()) * reps / (reps - 1) / reps).sqrt();
  const ArrayX<double> csr = theoretical_csr(grid);
  for (Index t = 1; t < grid.size(); ++t) EXPECT_LT(std::abs(mean[t] - csr[t]), 4 * se[t]) << "r=" << grid.radii[t];
}

TEST(KUnivariateTest, ScalingWithNoCorrection) {
  std::mt19937_64 rng(4);
  auto pp = testing::random_pattern(rng, 80, std::vector<std::string>(80, "a"));
  const double c = 3.5;
  auto scaled = pp;
  scaled.xy *= c;
  scaled.window = Window<double>{0, c, 0, c};
  const auto grid = RadiusGrid<double>::uniform(0.4, 9);
  RadiusGrid<double> scaled_grid(grid.radii * c);
  auto k = k_univariate(pp, "a", grid, EdgeCorrection::None);
  auto ks = k_univariate(scaled, "a", scaled_grid, EdgeCorrection::None);
  for (Index t = 0; t < grid.size(); ++t) EXPECT_NEAR(ks.values[t], c * c * k.values[t], 1e-9 * (1 + ks.values[t]));
}

TEST(KBivariateTest, SingleCrossPair) {
  auto pp = two_points(0.2, "x", "y");
  ArrayX<double> r(3);
  r << 0.1, 0.19, 0.25;
  auto k = k_bivariate(pp, "x", "y", RadiusGrid<double>{r}, EdgeCorrection::None);
  EXPECT_EQ(k.values[0], 0.0);
  EXPECT_EQ(k.values[1], 0.0);
  EXPECT_DOUBLE_EQ(k.values[2], 1.0);
}

TEST(KBivariateTest, Errors) {
  auto pp = two_points(0.2, "x", "x");
  const auto grid = RadiusGrid<double>::uniform(0.3, 4);
  EXPECT_THROW(k_bivariate(pp, "x", "x", grid, EdgeCorrection::None), Error);
  try {
    k_bivariate(pp, "x", "y", grid, EdgeCorrection::None);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientPoints);
  }
  EXPECT_THROW(MarkQuery::bivariate("a", "a"), Error);
}

// Three points: one "a" and two "b". Cross pairs by hand enumeration:
// K_ab(r) = |A| / (1 * 2) * (W_01 + W_02).
TEST(KBivariateTest, ThreePointHandEnumeration) {
  Points<double> xy(3, 2);
  xy << 0.1, 0.1, 0.3, 0.1, 0.1, 0.5;
  auto pp = make_pattern(std::move(xy), {"a", "b", "b"}, Window<double>{0, 1, 0, 1});
  ArrayX<double> r(3);
  r << 0.1, 0.3, 0.45;
  for (auto corr : {EdgeCorrection::None, EdgeCorrection::Translation}) {
    auto k = k_bivariate(pp, "a", "b", RadiusGrid<double>{r}, corr);
    const double w01 = testing::weight(pp, 0, 1, corr), w02 = testing::weight(pp, 0, 2, corr);
    EXPECT_EQ(k.values[0], 0.0);
    EXPECT_DOUBLE_EQ(k.values[1], 0.5 * w01);
    EXPECT_DOUBLE_EQ(k.values[2], 0.5 * (w01 + w02));
    // Reversed direction sums the same symmetric weights with swapped normalizer.
    auto kr = k_bivariate(pp, "b", "a", RadiusGrid<double>{r}, corr);
    EXPECT_DOUBLE_EQ(kr.values[2], k.values[2]);
    // The same cross sum, read from univariate K on the union minus the b-b self pair.
    const double w12 = testing::weight(pp, 1, 2, corr);
    auto all = pp;
    std::fill(all.marks.begin(), all.marks.end(), all.require_code("a"));
    auto ku = k_univariate(all, "a", RadiusGrid<double>{r}, corr);
    const double within_b = 0.45 >= testing::dist(pp.xy, 1, 2) ? 2 * w12 : 0.0;
    EXPECT_NEAR((ku.values[2] * 6 - within_b) / 2, k.values[2] * 2, 1e-12);
  }
}

TEST(KBivariateTest, MatchesBruteForceAndCsrMean) {
  const auto grid = RadiusGrid<double>::uniform(2.5, 6);
  ArrayX<double> sum = ArrayX<double>::Zero(grid.size()), sum_sq = ArrayX<double>::Zero(grid.size());
  const int reps = 100;
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<std::string> marks(1000);
    for (std::size_t i = 0; i < marks.size(); ++i) marks[i] = i < 500 ? "t1" : "t2";
    auto pp = testing::random_pattern(rng, 1000, marks, Window<double>{0, 10, 0, 10});
    auto k = k_bivariate(pp, "t1", "t2", grid, EdgeCorrection::Translation);
    if (rep < 2)
      for (Index t = 0; t < grid.size(); ++t) {
        const double ref = brute_k_bivariate(pp, "t1", "t2", grid.radii[t], EdgeCorrection::Translation);
        EXPECT_NEAR(k.values[t], ref, 1e-12 * std::max(1.0, ref));
      }
    sum += k.values;
    sum_sq += k.values.square();
  }
  const ArrayX<double> mean = sum / reps;
  const ArrayX<double> se = ((sum_sq / reps - mean.square()) / (reps - 1)).sqrt();
  const ArrayX<double> csr = theoretical_csr(grid);
  for (Index t = 1; t < grid.size(); ++t) EXPECT_LT(std::abs(mean[t] - csr[t]), 4 * se[t]);
}

TEST(TheoreticalCsrTest, Values) {
  ArrayX<double> r(3);
  r << 0, 1, 100;
  auto v = theoretical_csr(RadiusGrid<double>{r});
  EXPECT_EQ(v[0], 0.0);
  EXPECT_DOUBLE_EQ(v[1], std::numbers::pi);
  EXPECT_NEAR(v[2], 31415.93, 0.01);
}

}  // namespace
}  // namespace kamp
