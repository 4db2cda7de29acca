#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "simnull/control.hpp"
#include "simnull/doubling.hpp"
#include "simnull/operators.hpp"
#include "simnull/spectral.hpp"

namespace simnull {

struct Trajectory {
  BoundaryCondition bc = BoundaryCondition::Dirichlet;
  Grid1D grid;
  std::vector<double> times;
  Eigen::MatrixXd states;  // column m is the state at times[m]
  std::vector<double> l2;
  std::vector<double> sup;
  // Ghost values beyond the two walls, one per node. Empty means the ghost
  // rule of `bc` (odd for Dirichlet, even for Neumann).
  std::vector<double> ghost_left;
  std::vector<double> ghost_right;
  std::array<double, 2> wall_conductance{1.0, 1.0};

  std::size_t nodes() const { return times.size(); }
  Field state(std::size_t m) const { return states.col(static_cast<Eigen::Index>(m)); }
  Field final_state() const { return states.col(states.cols() - 1); }
};

namespace detail {

inline void fill_norms(Trajectory& tr) {
  tr.l2.resize(tr.times.size());
  tr.sup.resize(tr.times.size());
  for (std::size_t m = 0; m < tr.times.size(); ++m) {
    const Field s = tr.state(m);
    tr.l2[m] = l2_norm(tr.grid, s);
    tr.sup[m] = sup_norm(s);
  }
}

}  // namespace detail

/// Exact modal propagation on [0, t_end]. States are recorded at 0, at every
/// node of the signal inside (0, t_end), and at t_end. The control is zero
/// outside the signal's time range.
inline Trajectory propagate(const EigenBasis& basis, const Field& state0, const ControlSignal* signal,
                            double t_end) {
  if (state0.size() != basis.vectors.rows())
    throw InvalidArgument("propagate: initial state has " + std::to_string(state0.size()) +
                          " entries, grid has " + std::to_string(basis.vectors.rows()));
  if (!(t_end >= 0.0)) throw InvalidArgument("propagate: t_end must be nonnegative");
  if (basis.size() != basis.vectors.rows()) throw InvalidArgument("propagate: basis is not complete");
  Eigen::MatrixXd B;
  if (signal) {
    if (signal->region.size() != basis.grid.n) throw InvalidArgument("propagate: signal is on another grid");
    if (signal->start() < 0.0 || signal->end() > t_end * (1.0 + 1e-14))
      throw InvalidArgument("propagate: signal time range is outside [0, t_end]");
    B = detail::input_matrix(basis, basis.size(), signal->region);
  }

  std::vector<double> times{0.0};
  if (signal)
    for (double t : signal->timegrid)
      if (t > times.back() && t < t_end) times.push_back(t);
  if (t_end > times.back()) times.push_back(t_end);

  Trajectory tr;
  tr.bc = basis.bc;
  tr.grid = basis.grid;
  tr.times = times;
  tr.wall_conductance = basis.wall_conductance;
  tr.states.resize(basis.vectors.rows(), static_cast<Eigen::Index>(times.size()));

  Field y = basis.coefficients(state0);
  tr.states.col(0) = state0;
  std::size_t step = 0;  // signal step covering the current interval
  for (std::size_t m = 0; m + 1 < times.size(); ++m) {
    const double t0 = times[m], t1 = times[m + 1], dt = t1 - t0;
    bool active = false;
    if (signal && t0 >= signal->start() && t0 < signal->end()) {
      while (step + 1 < signal->timegrid.size() && signal->timegrid[step + 1] <= t0) ++step;
      active = step < signal->steps();
    }
    if (active) {
      const Field load = B * signal->values.row(static_cast<Eigen::Index>(step)).transpose();
      for (Eigen::Index k = 0; k < y.size(); ++k) {
        const double lam = basis.eigenvalues[k];
        y[k] = std::exp(-lam * dt) * y[k] + load[k] * detail::decay_gain(lam, dt);
      }
    } else {
      y = free_decay(basis, y, dt);
    }
    tr.states.col(static_cast<Eigen::Index>(m + 1)) = basis.synthesize(y);
  }
  detail::fill_norms(tr);
  return tr;
}

struct BoundaryResiduals {
  double dirichlet_trace = 0.0;  // max over nodes and walls of |wall value| / sup
  double neumann_flux = 0.0;     // max over nodes and walls of |a (u_0 - ghost)/h| / sup
};

/// Wall value (u_edge + ghost)/2 and one-sided flux c (u_edge - ghost)/h at
/// both walls, relative to the sup norm at each node. Only the residual
/// matching the trajectory's boundary condition is filled.
inline BoundaryResiduals check_boundary_conditions(const Trajectory& tr) {
  if (tr.bc == BoundaryCondition::Periodic)
    throw InvalidArgument("check_boundary_conditions: needs a Dirichlet or Neumann trajectory");
  const auto n = tr.states.rows();
  const bool explicit_ghosts = !tr.ghost_left.empty();
  if (explicit_ghosts && (tr.ghost_left.size() != tr.nodes() || tr.ghost_right.size() != tr.nodes()))
    throw InvalidArgument("check_boundary_conditions: ghost arrays do not match the time nodes");
  const double sign = tr.bc == BoundaryCondition::Dirichlet ? -1.0 : 1.0;
  BoundaryResiduals r;
  for (std::size_t m = 0; m < tr.nodes(); ++m) {
    const double scale = tr.sup[m];
    if (scale == 0.0) continue;
    const double uL = tr.states(0, static_cast<Eigen::Index>(m));
    const double uR = tr.states(n - 1, static_cast<Eigen::Index>(m));
    const double gL = explicit_ghosts ? tr.ghost_left[m] : sign * uL;
    const double gR = explicit_ghosts ? tr.ghost_right[m] : sign * uR;
    if (tr.bc == BoundaryCondition::Dirichlet) {
      const double w = std::max(std::abs(uL + gL), std::abs(uR + gR)) / 2.0;
      r.dirichlet_trace = std::max(r.dirichlet_trace, w / scale);
    } else {
      const double f = std::max(tr.wall_conductance[0] * std::abs(uL - gL), tr.wall_conductance[1] * std::abs(uR - gR)) /
                       tr.grid.h;
      r.neumann_flux = std::max(r.neumann_flux, f / scale);
    }
  }
  return r;
}

/// Splits a trajectory on the double into its odd part u (Dirichlet) and even
/// part v (Neumann). Ghosts come from the mirrored cells across each wall.
inline std::pair<Trajectory, Trajectory> split_trajectory(const DoubleDomain& dd, const Trajectory& tr) {
  const auto n = static_cast<Eigen::Index>(dd.n());
  if (tr.states.rows() != 2 * n) throw InvalidArgument("split_trajectory: not a trajectory on the double");
  Trajectory u, v;
  u.bc = BoundaryCondition::Dirichlet;
  v.bc = BoundaryCondition::Neumann;
  for (Trajectory* p : {&u, &v}) {
    p->grid = dd.base;
    p->times = tr.times;
    p->states.resize(n, static_cast<Eigen::Index>(tr.nodes()));
    p->wall_conductance = {dd.op.face_conductance[0], dd.op.face_conductance[n]};
  }
  // across x = 0 the plus cell 0 faces doubled cell 2n-1; across x = length
  // the plus cell n-1 faces doubled cell n
  const Eigen::Index left_mirror = 2 * n - 1, right_mirror = n;
  for (std::size_t m = 0; m < tr.nodes(); ++m) {
    const Field U = tr.state(m);
    auto [um, vm] = split(dd, U);
    u.states.col(static_cast<Eigen::Index>(m)) = um;
    v.states.col(static_cast<Eigen::Index>(m)) = vm;
    u.ghost_left.push_back((U[left_mirror] - U[0]) / 2.0);
    u.ghost_right.push_back((U[right_mirror] - U[n - 1]) / 2.0);
    v.ghost_left.push_back((U[left_mirror] + U[0]) / 2.0);
    v.ghost_right.push_back((U[right_mirror] + U[n - 1]) / 2.0);
  }
  detail::fill_norms(u);
  detail::fill_norms(v);
  return {u, v};
}

/// Everything derived from (grid, coefficients) that the pipeline needs.
struct HeatModel {
  Grid1D grid;
  Coefficients coeffs;
  Operator dirichlet_op;
  Operator neumann_op;
  EigenBasis dirichlet;
  EigenBasis neumann;
  DoubleDomain dd;
  ExtendedBasis ext;
};

inline HeatModel build_model(const Grid1D& grid, const Coefficients& coeffs) {
  HeatModel m;
  m.grid = grid;
  m.coeffs = coeffs;
  m.dirichlet_op = assemble_laplacian(grid, coeffs, BoundaryCondition::Dirichlet);
  m.neumann_op = assemble_laplacian(grid, coeffs, BoundaryCondition::Neumann);
  m.dirichlet = eigendecompose(m.dirichlet_op);
  m.neumann = eigendecompose(m.neumann_op);
  m.dd = build_double(grid, coeffs);
  m.ext = build_extended_basis(m.dd, m.dirichlet, m.neumann);
  m.ext.basis.wall_conductance = {m.dd.op.face_conductance[0], m.dd.op.face_conductance[2 * grid.n]};
  return m;
}

enum class ControlMethod { Hum, LR };

inline std::string to_string(ControlMethod m) { return m == ControlMethod::Hum ? "hum" : "lr"; }

inline ControlMethod parse_control_method(const std::string& s) {
  if (s == "hum") return ControlMethod::Hum;
  if (s == "lr") return ControlMethod::LR;
  throw InvalidArgument("unknown control method '" + s + "' (expected hum or lr)");
}

struct SimulationOptions {
  std::size_t steps = 64;               // hum: time steps on [0, T]; lr: steps per active half
  std::optional<double> lambda0;        // lr: first cutoff; default is the smallest positive frequency
  double hum_tolerance = 1e-6;
  double lr_tolerance = 1e-4;
  double max_condition = 1e14;
  double lr_skip_floor = 1e-14;
  std::vector<double> regularization{1e-8, 1e-10, 1e-12};
};

struct SimultaneousReport {
  ControlMethod method = ControlMethod::Hum;
  double T = 0.0;
  double initial_u_l2 = 0.0;
  double initial_v_l2 = 0.0;
  double final_u_l2 = 0.0;
  double final_v_l2 = 0.0;
  double final_double_l2 = 0.0;
  double control_cost = 0.0;         // the shared control f on omega
  double double_control_cost = 0.0;  // the control on the double
  double dirichlet_trace_residual = 0.0;
  double neumann_flux_residual = 0.0;
  double route_deviation = 0.0;  // split of the double run vs the two base runs
  double tolerance = 0.0;
  bool within_tolerance = false;
  std::optional<double> lambda0;
  std::vector<LRSliceRecord> lr_ledger;
  std::vector<ContinuationStep> continuation;
  bool min_norm_certified = false;

  ControlSignal signal;         // shared control f on the base grid
  ControlSignal double_signal;  // control on the double, supported on the plus copy
  Trajectory dirichlet;
  Trajectory neumann;
  Trajectory doubled;
};

inline double smallest_positive_frequency(const EigenBasis& b) {
  for (Eigen::Index k = 0; k < b.size(); ++k)
    if (b.frequencies[k] > 0.0) return b.frequencies[k];
  throw InvalidArgument("basis has no positive frequency");
}

/// The double-reflection pipeline: extend (u0, v0) to the double, control the
/// double from omega x {+1}, then drive the Dirichlet and Neumann systems
/// independently with the plus-copy restriction of that control.
inline SimultaneousReport run_simultaneous(const HeatModel& model, const Field& u0, const Field& v0,
                                           const ControlRegion& region, double T, ControlMethod method,
                                           const SimulationOptions& opts = {}) {
  if (!(T > 0.0)) throw InvalidArgument("run_simultaneous: T must be positive");
  if (region.size() != model.grid.n) throw InvalidArgument("run_simultaneous: region is not on the grid");
  if (region.empty()) throw EmptyRegionError("run_simultaneous: empty control region");
  const DoubleDomain& dd = model.dd;
  const EigenBasis& ext = model.ext.basis;
  const ControlRegion lifted = lift_region(dd, region);
  const Field U0 = extend_pair(dd, u0, v0);

  SimultaneousReport rep;
  rep.method = method;
  rep.T = T;
  rep.initial_u_l2 = l2_norm(model.grid, u0);
  rep.initial_v_l2 = l2_norm(model.grid, v0);

  if (method == ControlMethod::Hum) {
    HumFullOptions ho;
    ho.regularization = opts.regularization;
    auto res = hum_full_control(dd, ext, lifted, U0, T, opts.steps, ho);
    rep.double_signal = std::move(res.signal);
    rep.continuation = std::move(res.continuation);
    rep.min_norm_certified = res.min_norm_certified;
    rep.tolerance = opts.hum_tolerance;
  } else {
    const double lam0 = opts.lambda0 ? *opts.lambda0 : smallest_positive_frequency(ext);
    rep.lambda0 = lam0;
    const LRSchedule schedule = make_lr_schedule(T, lam0, ext);
    LROptions lo;
    lo.steps_per_slice = opts.steps;
    lo.max_condition = opts.max_condition;
    lo.skip_floor = opts.lr_skip_floor;
    auto res = lr_control(dd, ext, schedule, lifted, U0, lo);
    rep.double_signal = std::move(res.signal);
    rep.lr_ledger = std::move(res.ledger);
    rep.tolerance = opts.lr_tolerance;
  }
  rep.double_control_cost = rep.double_signal.l2_cost;

  // plus copy cells are base cells in order, so the columns carry over
  rep.signal = make_signal(rep.double_signal.timegrid, 0.5 * rep.double_signal.values, region, model.grid);
  rep.control_cost = rep.signal.l2_cost;

  rep.dirichlet = propagate(model.dirichlet, u0, &rep.signal, T);
  rep.neumann = propagate(model.neumann, v0, &rep.signal, T);
  rep.doubled = propagate(ext, U0, &rep.double_signal, T);
  rep.final_u_l2 = rep.dirichlet.l2.back();
  rep.final_v_l2 = rep.neumann.l2.back();
  rep.final_double_l2 = rep.doubled.l2.back();

  auto [su, sv] = split_trajectory(dd, rep.doubled);
  rep.dirichlet_trace_residual = check_boundary_conditions(su).dirichlet_trace;
  rep.neumann_flux_residual = check_boundary_conditions(sv).neumann_flux;
  const double scale = std::max({1.0, sup_norm(u0), sup_norm(v0)});
  for (std::size_t m = 0; m < su.nodes(); ++m) {
    const double du = (su.state(m) - rep.dirichlet.state(m)).cwiseAbs().maxCoeff();
    const double dv = (sv.state(m) - rep.neumann.state(m)).cwiseAbs().maxCoeff();
    rep.route_deviation = std::max({rep.route_deviation, du / scale, dv / scale});
  }

  const double ref = std::max(rep.initial_u_l2, rep.initial_v_l2);
  rep.within_tolerance =
      rep.final_u_l2 <= rep.tolerance * ref && rep.final_v_l2 <= rep.tolerance * ref;
  return rep;
}

/// Gaussian field normalized to unit weighted L2 norm.
inline Field random_unit_field(const Grid1D& grid, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Field f(static_cast<Eigen::Index>(grid.n));
  for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = nd(rng);
  return f / l2_norm(grid, f);
}

}  // namespace simnull
