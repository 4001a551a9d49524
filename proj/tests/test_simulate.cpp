#include <gtest/gtest.h>

#include "support/oracles.hpp"

namespace kamp {
namespace {

SimScenario scenario(Condition c, double lambda_n, double p, std::uint64_t seed) {
  SimScenario sc;
  sc.condition = c;
  sc.lambda_n = lambda_n;
  sc.abundance = p;
  sc.seed = seed;
  return sc;
}

TEST(SimulateTest, HomNullCountsAndAbundance) {
  double total = 0, immune = 0;
  const int reps = 1000;
  for (int r = 0; r < reps; ++r) {
    auto pp = sim_hom_null(scenario(Condition::HomNull, 2000, 0.1, 100 + r));
    total += static_cast<double>(pp.size());
    immune += static_cast<double>(pp.count(kImmune));
  }
  EXPECT_LT(std::abs(total / reps - 2000), 3 * std::sqrt(2000.0));
  // Binomial over ~2e6 trials.
  EXPECT_NEAR(immune / total, 0.1, 4 * std::sqrt(0.1 * 0.9 / total));
}

TEST(SimulateTest, DeterministicAndInsideWindow) {
  for (auto c : {Condition::HomNull, Condition::InhomNull, Condition::HomClustered, Condition::InhomClustered}) {
    auto a = simulate(scenario(c, 1500, 0.1, 9));
    auto b = simulate(scenario(c, 1500, 0.1, 9));
    EXPECT_EQ(a.xy, b.xy);
    EXPECT_EQ(a.marks, b.marks);
    EXPECT_NO_THROW(a.validate());
  }
}

TEST(SimulateTest, InhomogeneousHalfRatio) {
  double left = 0, right = 0;
  for (int r = 0; r < 50; ++r) {
    auto pp = sim_inhom_null(scenario(Condition::InhomNull, 2000, 0.1, 500 + r));
    for (Index i = 0; i < pp.size(); ++i) (pp.xy(i, 0) < 5 ? left : right) += 1;
  }
  // Integral of x^2 over [0, 5] vs [5, 10] is 1 : 7.
  EXPECT_NEAR(left / right, 1.0 / 7.0, 0.01);
}

TEST(SimulateTest, ClusteredAbundanceCalibrated) {
  double total = 0, immune = 0;
  for (int r = 0; r < 1000; ++r) {
    auto pp = sim_hom_clustered(scenario(Condition::HomClustered, 1000, 0.1, 900 + r));
    total += static_cast<double>(pp.size());
    immune += static_cast<double>(pp.count(kImmune));
  }
  EXPECT_NEAR(immune / total, 0.1, 4 * std::sqrt(0.1 * 0.9 / total));
}

TEST(SimulateTest, InfeasibleAbundance) {
  auto sc = scenario(Condition::HomClustered, 1000, 0.9, 1);
  sc.cluster_count = 1;
  sc.cluster_radius = 0.5;
  try {
    sim_hom_clustered(sc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InfeasibleAbundance);
  }
}

TEST(SimulateTest, HolesAreEmpty) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto sc = scenario(Condition::InhomClustered, 3000, 0.1, seed);
    auto pp = sim_inhom_clustered(sc);
    const auto holes = hole_disks(sc);
    EXPECT_EQ(holes.size(), 5u);
    for (Index i = 0; i < pp.size(); ++i)
      for (const auto& h : holes) {
        const double dx = pp.xy(i, 0) - h[0], dy = pp.xy(i, 1) - h[1];
        ASSERT_GT(dx * dx + dy * dy, h[2] * h[2]);
      }
    EXPECT_GT(pp.size(), 0.6 * 3000);
  }
}

TEST(SimulateTest, ClusteredKTildePositive) {
  const auto grid = RadiusGrid<double>::uniform(2.5, 101);
  const Index near_cluster = 50;  // r = 1.25
  int positive = 0;
  const int reps = 40;
  for (int r = 0; r < reps; ++r) {
    auto pp = sim_hom_clustered(scenario(Condition::HomClustered, 5000, 0.1, 3000 + r));
    auto res = run_kamp(pp, MarkQuery::univariate(kImmune), grid, EdgeCorrection::Translation);
    positive += res.k_tilde[near_cluster] > 0;
  }
  EXPECT_GE(positive, static_cast<int>(0.95 * reps));
}

TEST(SimulateTest, ScenarioValidation) {
  auto sc = scenario(Condition::HomNull, 100, 1.2, 1);
  EXPECT_THROW(simulate(sc), Error);
  sc = scenario(Condition::HomClustered, 100, 0.1, 1);
  sc.abundance2 = 0.1;
  EXPECT_THROW(simulate(sc), Error);
  sc = scenario(Condition::HomNull, -1, 0.1, 1);
  EXPECT_THROW(simulate(sc), Error);
}

}  // namespace
}  // namespace kamp
