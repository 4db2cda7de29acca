#pragma once

#include <cmath>

#include "simnull/grid.hpp"
#include "simnull/operators.hpp"

namespace simnull {

// Frequencies within this relative distance of the threshold count as <= it,
// so numerically split copies of one eigenvalue are kept together.
inline constexpr double kCutoffRelTol = 1e-10;

/// Frequency threshold Lambda together with the number of modes at or below
/// it for a given basis. Cutoffs compare frequencies (not eigenvalues).
struct SpectralCutoff {
  double lambda = 0.0;
  Eigen::Index count = 0;
};

inline Eigen::Index count_modes(const EigenBasis& basis, double lambda) {
  const double bound = lambda * (1.0 + kCutoffRelTol);
  Eigen::Index c = 0;
  for (Eigen::Index k = 0; k < basis.frequencies.size(); ++k)
    if (basis.frequencies[k] <= bound) ++c;
  return c;
}

inline SpectralCutoff make_cutoff(const EigenBasis& basis, double lambda) {
  if (!(lambda >= 0.0)) throw InvalidArgument("spectral cutoff must be nonnegative");
  return {lambda, count_modes(basis, lambda)};
}

/// Cutoff placed exactly at the frequency of mode `index` (0-based).
inline SpectralCutoff cutoff_at_mode(const EigenBasis& basis, Eigen::Index index) {
  if (index < 0 || index >= basis.size()) throw InvalidArgument("cutoff_at_mode: index out of range");
  return make_cutoff(basis, basis.frequencies[index]);
}

/// Pi_Lambda u = sum over nu_k <= Lambda of <e_k, u> e_k. The threshold is
/// re-evaluated against this basis, so a cutoff built for another basis with
/// the same Lambda is interpreted consistently.
inline Field project(const EigenBasis& basis, const SpectralCutoff& cutoff, const Field& u) {
  if (u.size() != basis.vectors.rows())
    throw InvalidArgument("project: field has " + std::to_string(u.size()) + " entries, basis grid " +
                          std::to_string(basis.vectors.rows()));
  const Eigen::Index k = count_modes(basis, cutoff.lambda);
  const auto E = basis.vectors.leftCols(k);
  const Field coeff = E.transpose() * (basis.grid.weights.array() * u.array()).matrix();
  return E * coeff;
}

inline double sup_norm(const Field& u) { return u.size() ? u.cwiseAbs().maxCoeff() : 0.0; }

inline double l2_norm(const Grid1D& grid, const Field& u) {
  return std::sqrt((grid.weights.array() * u.array().square()).sum());
}

inline double l1_norm_on(const Grid1D& grid, const Field& u, const ControlRegion& region) {
  if (region.size() != static_cast<std::size_t>(u.size()))
    throw InvalidArgument("l1_norm_on: region and field sizes differ");
  double s = 0.0;
  for (auto i : region.cells()) {
    const auto j = static_cast<Eigen::Index>(i);
    s += grid.weights[j] * std::abs(u[j]);
  }
  return s;
}

}  // namespace simnull
