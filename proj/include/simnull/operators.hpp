#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "simnull/errors.hpp"
#include "simnull/grid.hpp"

namespace simnull {

enum class BoundaryCondition { Dirichlet, Neumann, Periodic };

inline std::string to_string(BoundaryCondition bc) {
  switch (bc) {
    case BoundaryCondition::Dirichlet: return "dirichlet";
    case BoundaryCondition::Neumann: return "neumann";
    case BoundaryCondition::Periodic: return "periodic";
  }
  return "?";
}

/// -Delta = -(1/kappa) D^-(a kappa D^+) as a dense matrix. `stiffness` is the
/// symmetric part S with matrix = W^{-1} S, W = diag(grid.weights), so the
/// operator is self-adjoint in the weighted inner product.
struct Operator {
  BoundaryCondition bc = BoundaryCondition::Dirichlet;
  Grid1D grid;
  Eigen::MatrixXd stiffness;
  Eigen::MatrixXd matrix;
  Field face_conductance;  // a*kappa at faces 0..n

  Field apply(const Field& u) const {
    if (u.size() != matrix.cols()) throw InvalidArgument("Operator::apply: size mismatch");
    return matrix * u;
  }
};

inline double weighted_dot(const Grid1D& g, const Field& u, const Field& v) {
  return (g.weights.array() * u.array() * v.array()).sum();
}

/// Face conductances a_f * kappa_f; interior kappa_f is the mean of the two
/// adjacent cells, a wall face sees its single cell (the mirror ghost has the
/// same density).
inline Field face_conductance(const Grid1D& grid, const Coefficients& c) {
  const auto n = static_cast<Eigen::Index>(grid.n);
  Field cf(n + 1);
  for (Eigen::Index f = 1; f < n; ++f) cf[f] = c.a[f] * 0.5 * (c.kappa[f - 1] + c.kappa[f]);
  if (grid.periodic) {
    const double k = 0.5 * (c.kappa[n - 1] + c.kappa[0]);
    cf[0] = c.a[0] * k;
    cf[n] = cf[0];
  } else {
    cf[0] = c.a[0] * c.kappa[0];
    cf[n] = c.a[n] * c.kappa[n - 1];
  }
  return cf;
}

/// Conservative three-point flux form. Walls are closed with a ghost cell:
/// the Dirichlet ghost is the odd reflection -u_0, the Neumann ghost the even
/// reflection +u_0. Periodic wraps around.
inline Operator assemble_laplacian(const Grid1D& grid, const Coefficients& coeffs,
                                   BoundaryCondition bc) {
  validate_coefficients(grid, coeffs);
  if ((bc == BoundaryCondition::Periodic) != grid.periodic)
    throw InvalidArgument(bc == BoundaryCondition::Periodic
                              ? "periodic operator needs a doubled (periodic) grid"
                              : "Dirichlet/Neumann operators need a non-periodic grid");

  const auto n = static_cast<Eigen::Index>(grid.n);
  const double h = grid.h;
  Operator op;
  op.bc = bc;
  op.grid = grid;
  op.face_conductance = face_conductance(grid, coeffs);
  const Field& cf = op.face_conductance;

  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index f = 1; f < n; ++f) {
    const double g = cf[f] / h;
    S(f - 1, f - 1) += g;
    S(f, f) += g;
    S(f - 1, f) -= g;
    S(f, f - 1) -= g;
  }
  switch (bc) {
    case BoundaryCondition::Dirichlet:
      // flux c (u_0 - ghost)/h with ghost = -u_0
      S(0, 0) += 2.0 * cf[0] / h;
      S(n - 1, n - 1) += 2.0 * cf[n] / h;
      break;
    case BoundaryCondition::Neumann:
      break;
    case BoundaryCondition::Periodic: {
      const double g = cf[0] / h;
      S(0, 0) += g;
      S(n - 1, n - 1) += g;
      S(0, n - 1) -= g;
      S(n - 1, 0) -= g;
      break;
    }
  }
  op.stiffness = S;
  op.matrix = grid.weights.cwiseInverse().asDiagonal() * S;
  return op;
}

/// Eigenpairs of -Delta, ascending, orthonormal in the weighted inner
/// product. `frequencies` are the square roots of the eigenvalues.
struct EigenBasis {
  BoundaryCondition bc = BoundaryCondition::Dirichlet;
  Grid1D grid;
  Field eigenvalues;
  Field frequencies;
  Eigen::MatrixXd vectors;  // column k is mode k
  std::array<double, 2> wall_conductance{1.0, 1.0};  // a*kappa at the two walls

  Eigen::Index size() const { return eigenvalues.size(); }
  double max_frequency() const { return frequencies.size() ? frequencies.maxCoeff() : 0.0; }

  /// Weighted coefficients <e_k, u>.
  Field coefficients(const Field& u) const {
    if (u.size() != vectors.rows()) throw InvalidArgument("EigenBasis: field size mismatch");
    return vectors.transpose() * (grid.weights.array() * u.array()).matrix();
  }
  Field synthesize(const Field& y) const {
    if (y.size() != vectors.cols()) throw InvalidArgument("EigenBasis: coefficient size mismatch");
    return vectors * y;
  }
};

namespace detail {

// Largest-magnitude entry positive; near-ties resolved toward the lowest index.
inline void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  const double m = v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) >= m * (1.0 - 1e-10)) {
      if (v[i] < 0) v = -v;
      return;
    }
  }
}

inline void finish_basis(EigenBasis& b) {
  const double top = b.eigenvalues.size() ? b.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  for (Eigen::Index k = 0; k < b.eigenvalues.size(); ++k) {
    double& lam = b.eigenvalues[k];
    if (std::abs(lam) <= 1e-13 * top) lam = 0.0;
    if (lam < 0.0)
      throw NumericalError("eigendecompose: negative eigenvalue " + std::to_string(lam) +
                           " in " + to_string(b.bc) + " operator, n=" + std::to_string(b.grid.n));
  }
  b.frequencies = b.eigenvalues.cwiseSqrt();
  for (Eigen::Index k = 0; k < b.vectors.cols(); ++k) fix_sign(b.vectors.col(k));
}

}  // namespace detail

inline EigenBasis eigendecompose(const Operator& op) {
  const Field inv_sqrt_w = op.grid.weights.cwiseSqrt().cwiseInverse();
  const auto n = static_cast<Eigen::Index>(op.grid.n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  if (op.bc == BoundaryCondition::Periodic) {
    const Eigen::MatrixXd B = inv_sqrt_w.asDiagonal() * op.stiffness * inv_sqrt_w.asDiagonal();
    solver.compute(B);
  } else {
    Field diag(n), sub(n - 1);
    for (Eigen::Index i = 0; i < n; ++i)
      diag[i] = op.stiffness(i, i) * inv_sqrt_w[i] * inv_sqrt_w[i];
    for (Eigen::Index i = 0; i + 1 < n; ++i)
      sub[i] = op.stiffness(i + 1, i) * inv_sqrt_w[i] * inv_sqrt_w[i + 1];
    solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  }
  if (solver.info() != Eigen::Success)
    throw NumericalError("eigendecompose: symmetric eigensolver failed for " + to_string(op.bc) +
                         " operator, n=" + std::to_string(n) +
                         ", |S|_max=" + std::to_string(op.stiffness.cwiseAbs().maxCoeff()));
  EigenBasis b;
  b.bc = op.bc;
  b.grid = op.grid;
  b.eigenvalues = solver.eigenvalues();
  b.vectors = inv_sqrt_w.asDiagonal() * solver.eigenvectors();
  b.wall_conductance = {op.face_conductance[0], op.face_conductance[n]};
  detail::finish_basis(b);
  return b;
}

/// Closed-form basis for kappa = a = 1: sines (Dirichlet), cosines (Neumann),
/// or the cos/sin pairs of the circle (Periodic).
inline EigenBasis analytic_eigenbasis(const Grid1D& grid, BoundaryCondition bc) {
  if ((grid.kappa.array() != 1.0).any())
    throw UnsupportedError("analytic_eigenbasis: only constant unit coefficients are supported");
  if ((bc == BoundaryCondition::Periodic) != grid.periodic)
    throw InvalidArgument("analytic_eigenbasis: boundary condition does not match the grid");
  const auto n = static_cast<Eigen::Index>(grid.n);
  const double h = grid.h, L = grid.length, pi = std::numbers::pi;
  EigenBasis b;
  b.bc = bc;
  b.grid = grid;
  b.eigenvalues.resize(n);
  b.vectors.resize(n, n);
  auto discrete_eig = [&](double wavenumber) {
    const double s = std::sin(wavenumber * h / 2.0);
    return 4.0 / (h * h) * s * s;
  };
  for (Eigen::Index k = 0; k < n; ++k) {
    double wn = 0.0;
    Field v(n);
    if (bc == BoundaryCondition::Dirichlet) {
      wn = static_cast<double>(k + 1) * pi / L;
      v = (wn * grid.centers.array()).sin().matrix();
    } else if (bc == BoundaryCondition::Neumann) {
      wn = static_cast<double>(k) * pi / L;
      v = (wn * grid.centers.array()).cos().matrix();
    } else {
      // circle of circumference L: 1, cos, sin, cos, sin, ...; for even n the
      // last mode alternates, which is the sine at cell centers (the cosine vanishes)
      const Eigen::Index m = (k + 1) / 2;
      wn = 2.0 * pi * static_cast<double>(m) / L;
      if ((k % 2 == 1 || k == 0) && 2 * m != n)
        v = (wn * grid.centers.array()).cos().matrix();
      else
        v = (wn * grid.centers.array()).sin().matrix();
    }
    b.eigenvalues[k] = discrete_eig(wn);
    v /= std::sqrt(weighted_dot(grid, v, v));
    b.vectors.col(k) = v;
  }
  // ascending order (already ascending for D/N; pairs on the circle)
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) order[static_cast<std::size_t>(k)] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return b.eigenvalues[x] < b.eigenvalues[y]; });
  EigenBasis sorted = b;
  for (Eigen::Index k = 0; k < n; ++k) {
    sorted.eigenvalues[k] = b.eigenvalues[order[static_cast<std::size_t>(k)]];
    sorted.vectors.col(k) = b.vectors.col(order[static_cast<std::size_t>(k)]);
  }
  detail::finish_basis(sorted);
  return sorted;
}

inline EigenBasis analytic_eigenbasis(const Grid1D& grid, const Coefficients& coeffs,
                                      BoundaryCondition bc) {
  if ((coeffs.a.array() != 1.0).any())
    throw UnsupportedError("analytic_eigenbasis: only constant unit coefficients are supported");
  return analytic_eigenbasis(grid, bc);
}

}  // namespace simnull
