#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "simnull/lp.hpp"

using namespace simnull;

TEST(Lp, TinyKnownOptimum) {
  // max x0 + 2 x1, x0 + x1 + s = 1, 0 <= x, s <= 1
  lp::Problem p;
  p.A = Eigen::MatrixXd{{1, 1, 1}};
  p.b = Eigen::VectorXd::Ones(1);
  p.c = Eigen::VectorXd{{1, 2, 0}};
  p.lower = Eigen::VectorXd::Zero(3);
  p.upper = Eigen::VectorXd::Ones(3);
  const auto s = lp::solve(p);
  ASSERT_EQ(s.status, lp::Status::Optimal);
  EXPECT_NEAR(s.objective, 2.0, 1e-12);
  EXPECT_NEAR(s.x[1], 1.0, 1e-12);
}

TEST(Lp, Infeasible) {
  lp::Problem p;
  p.A = Eigen::MatrixXd{{1, 1}};
  p.b = Eigen::VectorXd::Constant(1, 5.0);
  p.c = Eigen::VectorXd::Ones(2);
  p.lower = Eigen::VectorXd::Zero(2);
  p.upper = Eigen::VectorXd::Ones(2);
  EXPECT_EQ(lp::solve(p).status, lp::Status::Infeasible);
}

TEST(Lp, Unbounded) {
  lp::Problem p;
  p.A = Eigen::MatrixXd{{1, -1}};
  p.b = Eigen::VectorXd::Zero(1);
  p.c = Eigen::VectorXd{{1, 0}};
  p.lower = Eigen::VectorXd::Zero(2);
  p.upper = Eigen::VectorXd::Constant(2, lp::kInf);
  EXPECT_EQ(lp::solve(p).status, lp::Status::Unbounded);
}

TEST(Lp, MatchesVertexEnumeration) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int solved = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const Eigen::Index m = 1 + trial % 3, n = m + 3 + trial % 4;
    lp::Problem p;
    p.A = Eigen::MatrixXd::NullaryExpr(m, n, [&] { return u(rng); });
    p.lower = Eigen::VectorXd::NullaryExpr(n, [&] { return -1.0 + 0.5 * u(rng); });
    p.upper = Eigen::VectorXd::NullaryExpr(n, [&] { return 1.0 + 0.5 * u(rng); });
    // b from an interior point keeps most instances feasible
    const Eigen::VectorXd x0 = 0.5 * (p.lower + p.upper) + 0.3 * Eigen::VectorXd::NullaryExpr(n, [&] { return u(rng); });
    p.b = p.A * x0;
    p.c = Eigen::VectorXd::NullaryExpr(n, [&] { return u(rng); });
    const auto best = oracle::lp_vertex_max(p.A, p.b, p.c, p.lower, p.upper);
    const auto s = lp::solve(p);
    ASSERT_TRUE(best.has_value());
    ASSERT_EQ(s.status, lp::Status::Optimal) << "trial " << trial;
    EXPECT_NEAR(s.objective, *best, 1e-9 * std::max(1.0, std::abs(*best))) << "trial " << trial;
    EXPECT_LE((p.A * s.x - p.b).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_TRUE(((s.x - p.lower).array() >= -1e-9).all());
    EXPECT_TRUE(((p.upper - s.x).array() >= -1e-9).all());
    // strong duality through reduced costs: c - A'y vanishes on strictly interior variables
    const Eigen::VectorXd d = p.c - p.A.transpose() * s.duals;
    for (Eigen::Index j = 0; j < n; ++j) {
      const bool at_lo = std::abs(s.x[j] - p.lower[j]) < 1e-9, at_up = std::abs(s.x[j] - p.upper[j]) < 1e-9;
      if (!at_lo && !at_up) EXPECT_NEAR(d[j], 0.0, 1e-9);
      if (at_lo && !at_up) EXPECT_LE(d[j], 1e-9);
      if (at_up && !at_lo) EXPECT_GE(d[j], -1e-9);
    }
    ++solved;
  }
  EXPECT_EQ(solved, 60);
}

TEST(Lp, WarmStartGivesSameOptimum) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index m = 3, n = 9;
    lp::Problem p;
    p.A = Eigen::MatrixXd::NullaryExpr(m, n, [&] { return u(rng); });
    p.lower = -Eigen::VectorXd::Ones(n);
    p.upper = Eigen::VectorXd::Ones(n);
    p.b = p.A * Eigen::VectorXd::NullaryExpr(n, [&] { return 0.5 * u(rng); });
    p.c = Eigen::VectorXd::NullaryExpr(n, [&] { return u(rng); });
    const double cold = lp::solve(p).objective;
    p.start = Eigen::VectorXd::NullaryExpr(n, [&] { return u(rng) > 0 ? 1.0 : -1.0; });
    const auto warm = lp::solve(p);
    ASSERT_EQ(warm.status, lp::Status::Optimal);
    EXPECT_NEAR(warm.objective, cold, 1e-10);
    p.crash = {0, 4};
    const auto crashed = lp::solve(p);
    ASSERT_EQ(crashed.status, lp::Status::Optimal);
    EXPECT_NEAR(crashed.objective, cold, 1e-10);
  }
}

TEST(Lp, RejectsStartOffBounds) {
  lp::Problem p;
  p.A = Eigen::MatrixXd{{1, 1}};
  p.b = Eigen::VectorXd::Ones(1);
  p.c = Eigen::VectorXd::Ones(2);
  p.lower = Eigen::VectorXd::Zero(2);
  p.upper = Eigen::VectorXd::Ones(2);
  p.crash = {2};
  EXPECT_THROW(lp::solve(p), InvalidArgument);
  p.crash.clear();
  p.start = Eigen::VectorXd::Constant(2, 0.5);
  EXPECT_THROW(lp::solve(p), InvalidArgument);
}
