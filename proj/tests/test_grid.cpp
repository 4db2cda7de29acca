#include <gtest/gtest.h>

#include <random>

#include "simnull/grid.hpp"

using namespace simnull;

TEST(Grid, TwoCellsUnitLength) {
  const Grid1D g = make_uniform_grid(2, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(g.h, 0.5);
  EXPECT_DOUBLE_EQ(g.centers[0], 0.25);
  EXPECT_DOUBLE_EQ(g.centers[1], 0.75);
  EXPECT_DOUBLE_EQ(g.weights[0], 0.5);
  EXPECT_DOUBLE_EQ(g.weights[1], 0.5);
}

TEST(Grid, FourCellsLengthTwo) {
  const Grid1D g = make_uniform_grid(4, 2.0, 1.0);
  EXPECT_DOUBLE_EQ(g.h, 0.5);
  const double want[] = {0.25, 0.75, 1.25, 1.75};
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(g.centers[i], want[i]);
}

TEST(Grid, DensityEntersWeights) {
  const Grid1D g = make_uniform_grid(2, 1.0, [](double x) { return 1.0 + x; });
  EXPECT_DOUBLE_EQ(g.weights[0], 0.625);
  EXPECT_DOUBLE_EQ(g.weights[1], 0.875);
}

TEST(Grid, RejectsBadSizes) {
  EXPECT_THROW(make_uniform_grid(1, 1.0, 1.0), InvalidArgument);
  EXPECT_THROW(make_uniform_grid(0, 1.0, 1.0), InvalidArgument);
  EXPECT_THROW(make_uniform_grid(4, 0.0, 1.0), InvalidArgument);
  EXPECT_THROW(make_uniform_grid(4, -1.0, 1.0), InvalidArgument);
}

TEST(Grid, CentersIncreasingAndWeightsSumToLength) {
  for (std::size_t n : {2u, 7u, 64u, 1000u}) {
    const Grid1D g = make_uniform_grid(n, 3.0, 1.0);
    for (Eigen::Index i = 0; i < g.centers.size(); ++i) {
      EXPECT_GT(g.centers[i], 0.0);
      EXPECT_LT(g.centers[i], 3.0);
      if (i) EXPECT_GT(g.centers[i], g.centers[i - 1]);
    }
    EXPECT_NEAR(g.total_weight(), 3.0, 1e-12);
  }
}

TEST(Grid, CoefficientFloorEnforced) {
  const Grid1D g = make_uniform_grid(4, 1.0, 1.0);
  EXPECT_THROW(make_coefficients(g, 0.0), InvalidArgument);
  EXPECT_THROW(make_uniform_grid(4, 1.0, [](double x) { return x - 0.5; }), InvalidArgument);
  Coefficients c = make_coefficients(g, 1.0);
  c.a.resize(3);
  EXPECT_THROW(validate_coefficients(g, c), InvalidArgument);
}

TEST(Region, IntervalCenterMembership) {
  const Grid1D g = make_uniform_grid(4, 1.0, 1.0);
  const ControlRegion r = region_from_intervals(g, {{0.0, 0.5}});
  EXPECT_EQ(r.to_mask_string(), "1100");
  EXPECT_DOUBLE_EQ(r.measure(), 0.5);

  const ControlRegion r2 = region_from_intervals(g, {{0.6, 0.9}});
  EXPECT_EQ(r2.to_mask_string(), "0011");
  EXPECT_DOUBLE_EQ(r2.measure(), 0.5);
}

TEST(Region, NoCenterInsideIsEmptyError) {
  const Grid1D g = make_uniform_grid(4, 1.0, 1.0);
  EXPECT_THROW(region_from_intervals(g, {{0.9, 0.95}}), EmptyRegionError);
  EXPECT_THROW(region_from_intervals(g, {{0.5, 0.4}}), InvalidArgument);
}

TEST(Region, MeasureIsHTimesPopcount) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Grid1D g = make_uniform_grid(97, 1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    try {
      const ControlRegion r = region_from_intervals(g, {{a, b}});
      EXPECT_EQ(r.measure(), g.h * static_cast<double>(r.cell_count()));
    } catch (const EmptyRegionError&) {
    }
  }
}

TEST(Region, EnlargingIntervalsNeverClearsCells) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Grid1D g = make_uniform_grid(128, 1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    const double a2 = a * u(rng), b2 = b + (1.0 - b) * u(rng);
    std::vector<std::uint8_t> small(g.n, 0);
    try {
      small = region_from_intervals(g, {{a, b}}).mask();
    } catch (const EmptyRegionError&) {
    }
    const auto big = region_from_intervals(g, {{a2, b2}}).mask();
    for (std::size_t i = 0; i < g.n; ++i)
      if (small[i]) EXPECT_TRUE(big[i]);
  }
}

TEST(Region, ParseIntervalSpec) {
  const auto iv = parse_interval_spec("0.1,0.2; 0.5,0.75");
  ASSERT_EQ(iv.size(), 2u);
  EXPECT_DOUBLE_EQ(iv[1].first, 0.5);
  EXPECT_DOUBLE_EQ(iv[1].second, 0.75);
  EXPECT_THROW(parse_interval_spec("0.1;0.2"), InvalidArgument);
  EXPECT_THROW(parse_interval_spec("a,b"), InvalidArgument);
  EXPECT_THROW(parse_interval_spec(""), InvalidArgument);
}

TEST(Region, MaskStringRoundTrip) {
  const Grid1D g = make_uniform_grid(8, 1.0, 1.0);
  const ControlRegion r = parse_mask_string(g, "01100101\n");
  EXPECT_EQ(r.to_mask_string(), "01100101");
  EXPECT_EQ(r.cell_count(), 4u);
  EXPECT_THROW(parse_mask_string(g, "0110"), InvalidArgument);
  EXPECT_THROW(parse_mask_string(g, "0110x101"), InvalidArgument);
  EXPECT_THROW(parse_mask_string(g, "00000000"), EmptyRegionError);
}

TEST(FatCantor, FullTargetRemovesNothing) {
  const Grid1D g = make_uniform_grid(16, 1.0, 1.0);
  const ControlRegion r = fat_cantor_region(g, 1.0, 1, 0);
  EXPECT_EQ(r.cell_count(), 16u);
  EXPECT_DOUBLE_EQ(r.measure(), 1.0);
}

TEST(FatCantor, HalfMeasureDepthTwo) {
  const Grid1D g = make_uniform_grid(16, 1.0, 1.0);
  const ControlRegion r = fat_cantor_region(g, 0.5, 2, 3);
  EXPECT_GE(r.measure(), 0.5 - 2 * g.h);
  EXPECT_LE(r.measure(), 0.5 + 2 * g.h);
}

TEST(FatCantor, DepthSixAt1024) {
  const Grid1D g = make_uniform_grid(1024, 1.0, 1.0);
  for (std::uint64_t seed : {0u, 1u, 42u}) {
    const ControlRegion r = fat_cantor_region(g, 0.3, 6, seed);
    EXPECT_GE(r.measure(), 0.3 - 6 * g.h);
    EXPECT_LE(r.measure(), 0.3 + 6 * g.h);
    EXPECT_LE(r.longest_run(), 1024u / 64u + 1u);
    EXPECT_EQ(r.measure(), g.h * static_cast<double>(r.cell_count()));
  }
}

TEST(FatCantor, Deterministic) {
  const Grid1D g = make_uniform_grid(500, 1.0, 1.0);
  EXPECT_EQ(fat_cantor_region(g, 0.4, 5, 9), fat_cantor_region(g, 0.4, 5, 9));
}

TEST(FatCantor, EmptyInteriorAtEveryDepth) {
  const Grid1D g = make_uniform_grid(4096, 1.0, 1.0);
  for (int depth = 1; depth <= 8; ++depth) {
    const ControlRegion r = fat_cantor_region(g, 0.3, depth, 7);
    EXPECT_LE(r.longest_run(), 4096u / (1u << depth) + 1u) << "depth " << depth;
    EXPECT_LE(std::abs(r.measure() - 0.3), depth * g.h);
  }
}

TEST(FatCantor, UnrepresentableTargets) {
  const Grid1D g = make_uniform_grid(16, 1.0, 1.0);
  EXPECT_THROW(fat_cantor_region(g, 0.01, 2, 0), ResolutionError);
  // 2^5 pieces need at least 64 cells of border at this depth
  EXPECT_THROW(fat_cantor_region(g, 0.1, 6, 0), ResolutionError);
  EXPECT_THROW(fat_cantor_region(g, 0.5, 0, 0), InvalidArgument);
}
