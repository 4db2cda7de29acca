#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"
#include "simnull/operators.hpp"
#include "simnull/spectral.hpp"

using namespace simnull;

namespace {

struct Fixture {
  Grid1D g = make_uniform_grid(48, 1.0, [](double x) { return 1.0 + 0.5 * x; });
  Coefficients c = make_coefficients(g, [](double x) { return 1.0 + x * (1.0 - x); });
  EigenBasis d = eigendecompose(assemble_laplacian(g, c, BoundaryCondition::Dirichlet));
  EigenBasis nb = eigendecompose(assemble_laplacian(g, c, BoundaryCondition::Neumann));
};

}  // namespace

TEST(Project, FullCutoffIsIdentity) {
  Fixture f;
  std::mt19937_64 rng(3);
  const Field u = oracle::random_vector(48, rng);
  const Field pu = project(f.d, make_cutoff(f.d, f.d.max_frequency()), u);
  EXPECT_LE((pu - u).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(Project, ZeroCutoff) {
  Fixture f;
  std::mt19937_64 rng(4);
  const Field u = oracle::random_vector(48, rng);
  EXPECT_EQ(make_cutoff(f.d, 0.0).count, 0);
  EXPECT_EQ(project(f.d, make_cutoff(f.d, 0.0), u).cwiseAbs().maxCoeff(), 0.0);
  const Field pn = project(f.nb, make_cutoff(f.nb, 0.0), u);
  const double mean = weighted_dot(f.g, u, Field::Ones(48)) / f.g.total_weight();
  EXPECT_LE((pn.array() - mean).abs().maxCoeff(), 1e-12);
}

TEST(Project, IdempotentSelfAdjointPythagoras) {
  Fixture f;
  std::mt19937_64 rng(5);
  for (const EigenBasis* b : {&f.d, &f.nb}) {
    for (int t = 0; t < 10; ++t) {
      const double lam = std::uniform_real_distribution<double>(0.0, b->max_frequency())(rng);
      const SpectralCutoff c = make_cutoff(*b, lam);
      const Field u = oracle::random_vector(48, rng), v = oracle::random_vector(48, rng);
      const Field pu = project(*b, c, u);
      EXPECT_LE((project(*b, c, pu) - pu).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_NEAR(weighted_dot(f.g, pu, v), weighted_dot(f.g, u, project(*b, c, v)), 1e-12);
      const double lhs = std::pow(l2_norm(f.g, u), 2);
      const double rhs = std::pow(l2_norm(f.g, pu), 2) + std::pow(l2_norm(f.g, u - pu), 2);
      EXPECT_NEAR(lhs, rhs, 1e-10 * lhs);
    }
  }
}

TEST(Project, NestedCutoffs) {
  Fixture f;
  std::mt19937_64 rng(6);
  for (int t = 0; t < 10; ++t) {
    std::uniform_real_distribution<double> ud(0.0, f.d.max_frequency());
    double l1 = ud(rng), l2 = ud(rng);
    if (l1 > l2) std::swap(l1, l2);
    const Field u = oracle::random_vector(48, rng);
    const Field p1 = project(f.d, make_cutoff(f.d, l1), u);
    EXPECT_LE((project(f.d, make_cutoff(f.d, l2), p1) - p1).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE(make_cutoff(f.d, l1).count, make_cutoff(f.d, l2).count);
  }
}

TEST(Project, CountMatchesDefinition) {
  Fixture f;
  for (Eigen::Index k = 0; k < f.d.size(); ++k) {
    const SpectralCutoff c = cutoff_at_mode(f.d, k);
    Eigen::Index want = 0;
    for (Eigen::Index j = 0; j < f.d.size(); ++j) want += f.d.frequencies[j] <= c.lambda;
    EXPECT_EQ(c.count, want);
  }
}

TEST(Project, SizeMismatch) {
  Fixture f;
  EXPECT_THROW(project(f.d, make_cutoff(f.d, 1.0), Field::Zero(47)), InvalidArgument);
  EXPECT_THROW(make_cutoff(f.d, -1.0), InvalidArgument);
}

TEST(Norms, SingleCellIndicator) {
  const Grid1D g = make_uniform_grid(4, 1.0, 1.0);
  Field u = Field::Zero(4);
  u[2] = 1.0;
  const ControlRegion r = region_from_mask(g, {0, 0, 1, 0});
  EXPECT_DOUBLE_EQ(sup_norm(u), 1.0);
  EXPECT_DOUBLE_EQ(l1_norm_on(g, u, r), 0.25);
  EXPECT_DOUBLE_EQ(l2_norm(g, u), 0.5);
}

TEST(Norms, ZeroField) {
  const Grid1D g = make_uniform_grid(4, 1.0, 1.0);
  const ControlRegion all = region_from_mask(g, {1, 1, 1, 1});
  EXPECT_EQ(sup_norm(Field::Zero(4)), 0.0);
  EXPECT_EQ(l1_norm_on(g, Field::Zero(4), all), 0.0);
  EXPECT_EQ(l2_norm(g, Field::Zero(4)), 0.0);
}

TEST(Norms, FirstSineModeRatioApproachesHalfPi) {
  const Grid1D g = make_uniform_grid(4096, 1.0, 1.0);
  const EigenBasis d = analytic_eigenbasis(g, BoundaryCondition::Dirichlet);
  const ControlRegion all = region_from_intervals(g, {{0.0, 1.0}});
  const Field e = d.vectors.col(0);
  // continuum: max sin = 1, integral of |sin(pi x)| = 2/pi
  EXPECT_NEAR(sup_norm(e) / l1_norm_on(g, e, all), std::numbers::pi / 2.0, 1e-3);
}
