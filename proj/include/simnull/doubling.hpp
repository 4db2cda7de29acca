#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "simnull/grid.hpp"
#include "simnull/operators.hpp"
#include "simnull/spectral.hpp"

namespace simnull {

/// The interval glued to a mirrored copy of itself along both endpoints:
/// a circle of 2n cells. The plus copy occupies cells 0..n-1 in order, the
/// minus copy cells n..2n-1 in reverse order, so base cell i of the minus copy
/// sits at the reflected position 2*length - x_i.
struct DoubleDomain {
  Grid1D base;
  Coefficients base_coeffs;
  Grid1D doubled;
  Coefficients doubled_coeffs;
  std::vector<std::size_t> embed_plus;
  std::vector<std::size_t> embed_minus;
  Operator op;

  std::size_t n() const noexcept { return base.n; }
};

inline DoubleDomain build_double(const Grid1D& grid, const Coefficients& coeffs) {
  validate_coefficients(grid, coeffs);
  if (grid.periodic) throw InvalidArgument("build_double: base grid must not be periodic");
  const std::size_t n = grid.n;
  const auto ni = static_cast<Eigen::Index>(n);
  DoubleDomain dd;
  dd.base = grid;
  dd.base_coeffs = coeffs;
  dd.embed_plus.resize(n);
  dd.embed_minus.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    dd.embed_plus[i] = i;
    dd.embed_minus[i] = 2 * n - 1 - i;
  }
  Field kappa2(2 * ni);
  for (Eigen::Index i = 0; i < ni; ++i) {
    kappa2[i] = coeffs.kappa[i];
    kappa2[2 * ni - 1 - i] = coeffs.kappa[i];
  }
  // faces: 0 (left wall, also face 2n), 1..n-1 interior, n (right wall),
  // then the mirrored interior faces
  Field a2(2 * ni + 1);
  for (Eigen::Index f = 0; f <= ni; ++f) a2[f] = coeffs.a[f];
  for (Eigen::Index k = 1; k < ni; ++k) a2[ni + k] = coeffs.a[ni - k];
  a2[2 * ni] = coeffs.a[0];

  dd.doubled = make_grid_from_samples(2.0 * grid.length, kappa2, true);
  dd.doubled_coeffs = {kappa2, a2};
  dd.op = assemble_laplacian(dd.doubled, dd.doubled_coeffs, BoundaryCondition::Periodic);
  return dd;
}

/// U(x,+1) = u + v, U(x,-1) = -u + v.
inline Field extend_pair(const DoubleDomain& dd, const Field& u, const Field& v) {
  const auto n = static_cast<Eigen::Index>(dd.n());
  if (u.size() != n || v.size() != n)
    throw InvalidArgument("extend_pair: fields must have " + std::to_string(n) + " entries");
  Field U(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    U[static_cast<Eigen::Index>(dd.embed_plus[static_cast<std::size_t>(i)])] = u[i] + v[i];
    U[static_cast<Eigen::Index>(dd.embed_minus[static_cast<std::size_t>(i)])] = -u[i] + v[i];
  }
  return U;
}

/// Inverse of extend_pair: u = (U+ - U-)/2, v = (U+ + U-)/2.
inline std::pair<Field, Field> split(const DoubleDomain& dd, const Field& U) {
  const auto n = static_cast<Eigen::Index>(dd.n());
  if (U.size() != 2 * n)
    throw InvalidArgument("split: field must have " + std::to_string(2 * n) + " entries");
  Field u(n), v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = U[static_cast<Eigen::Index>(dd.embed_plus[static_cast<std::size_t>(i)])];
    const double m = U[static_cast<Eigen::Index>(dd.embed_minus[static_cast<std::size_t>(i)])];
    u[i] = (p - m) / 2.0;
    v[i] = (p + m) / 2.0;
  }
  return {u, v};
}

/// Odd (Dirichlet) or even (Neumann) extension of a base eigenvector,
/// normalized on the doubled grid.
inline Field extend_eigenfunction(const DoubleDomain& dd, const Field& e, BoundaryCondition bc) {
  Field U;
  const Field zero = Field::Zero(e.size());
  switch (bc) {
    case BoundaryCondition::Dirichlet: U = extend_pair(dd, e, zero); break;
    case BoundaryCondition::Neumann: U = extend_pair(dd, zero, e); break;
    case BoundaryCondition::Periodic:
      throw InvalidArgument("extend_eigenfunction: needs a Dirichlet or Neumann eigenvector");
  }
  const double nrm = l2_norm(dd.doubled, U);
  if (!(nrm > 0.0)) throw InvalidArgument("extend_eigenfunction: zero vector");
  return U / nrm;
}

/// omega x {+1}: the region placed on the plus copy.
inline ControlRegion lift_region(const DoubleDomain& dd, const ControlRegion& region) {
  if (region.size() != dd.n()) throw InvalidArgument("lift_region: region is not on the base grid");
  if (region.empty()) throw EmptyRegionError("lift_region: empty region");
  std::vector<std::uint8_t> mask(2 * dd.n(), 0);
  for (auto i : region.cells()) mask[dd.embed_plus[i]] = 1;
  return ControlRegion(std::move(mask), dd.doubled.h);
}

enum class ModeFamily { Dirichlet, Neumann };

/// Basis of the doubled operator made of odd extensions of Dirichlet modes
/// and even extensions of Neumann modes, ordered by eigenvalue.
struct ExtendedBasis {
  EigenBasis basis;
  std::vector<ModeFamily> family;
  std::vector<Eigen::Index> base_index;
};

inline ExtendedBasis build_extended_basis(const DoubleDomain& dd, const EigenBasis& dirichlet,
                                          const EigenBasis& neumann) {
  if (dirichlet.bc != BoundaryCondition::Dirichlet || neumann.bc != BoundaryCondition::Neumann)
    throw InvalidArgument("build_extended_basis: expected a Dirichlet and a Neumann basis");
  const auto n = static_cast<Eigen::Index>(dd.n());
  if (dirichlet.vectors.rows() != n || neumann.vectors.rows() != n)
    throw InvalidArgument("build_extended_basis: bases are not on the base grid");
  const Eigen::Index kd = dirichlet.size(), kn = neumann.size();

  struct Entry {
    double eig;
    ModeFamily fam;
    Eigen::Index idx;
  };
  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(kd + kn));
  for (Eigen::Index k = 0; k < kd; ++k) entries.push_back({dirichlet.eigenvalues[k], ModeFamily::Dirichlet, k});
  for (Eigen::Index k = 0; k < kn; ++k) entries.push_back({neumann.eigenvalues[k], ModeFamily::Neumann, k});
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.eig < b.eig; });

  ExtendedBasis ext;
  ext.basis.bc = BoundaryCondition::Periodic;
  ext.basis.grid = dd.doubled;
  ext.basis.eigenvalues.resize(kd + kn);
  ext.basis.vectors.resize(2 * n, kd + kn);
  for (std::size_t c = 0; c < entries.size(); ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    const auto& en = entries[c];
    const bool dir = en.fam == ModeFamily::Dirichlet;
    const EigenBasis& src = dir ? dirichlet : neumann;
    ext.basis.eigenvalues[col] = en.eig;
    ext.basis.vectors.col(col) = extend_eigenfunction(
        dd, src.vectors.col(en.idx), dir ? BoundaryCondition::Dirichlet : BoundaryCondition::Neumann);
    ext.family.push_back(en.fam);
    ext.base_index.push_back(en.idx);
  }
  ext.basis.frequencies = ext.basis.eigenvalues.cwiseSqrt();
  return ext;
}

}  // namespace simnull
