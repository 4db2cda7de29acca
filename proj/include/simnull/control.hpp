#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "simnull/doubling.hpp"
#include "simnull/errors.hpp"
#include "simnull/spectral.hpp"

namespace simnull {

/// Control f(t, x) held constant on [t_m, t_{m+1}); values(m, j) is the value
/// on the j-th cell of `region`. Nothing is stored off the region.
struct ControlSignal {
  std::vector<double> timegrid;
  Eigen::MatrixXd values;
  ControlRegion region;
  Field cell_weights;
  double l2_cost = 0.0;

  std::size_t steps() const { return timegrid.empty() ? 0 : timegrid.size() - 1; }
  double start() const { return timegrid.front(); }
  double end() const { return timegrid.back(); }

  double compute_cost() const {
    double s = 0.0;
    for (std::size_t m = 0; m + 1 < timegrid.size(); ++m) {
      const double dt = timegrid[m + 1] - timegrid[m];
      s += dt * (cell_weights.array() * values.row(static_cast<Eigen::Index>(m)).transpose().array().square()).sum();
    }
    return std::sqrt(s);
  }

  /// The control on step m as a field on the whole grid (zero off the region).
  Field field_at_step(std::size_t m) const {
    Field f = Field::Zero(static_cast<Eigen::Index>(region.size()));
    const auto& cells = region.cells();
    for (std::size_t j = 0; j < cells.size(); ++j)
      f[static_cast<Eigen::Index>(cells[j])] = values(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j));
    return f;
  }
};

inline ControlSignal make_signal(std::vector<double> timegrid, Eigen::MatrixXd values,
                                 const ControlRegion& region, const Grid1D& grid) {
  if (timegrid.size() < 2) throw InvalidArgument("control signal needs at least one time step");
  for (std::size_t m = 0; m + 1 < timegrid.size(); ++m)
    if (!(timegrid[m + 1] > timegrid[m])) throw InvalidArgument("control timegrid must be strictly increasing");
  if (region.size() != grid.n) throw InvalidArgument("control region is not on the grid");
  if (values.rows() != static_cast<Eigen::Index>(timegrid.size() - 1) ||
      values.cols() != static_cast<Eigen::Index>(region.cell_count()))
    throw InvalidArgument("control values must be steps x region cells");
  ControlSignal s;
  s.timegrid = std::move(timegrid);
  s.values = std::move(values);
  s.region = region;
  s.cell_weights.resize(static_cast<Eigen::Index>(region.cell_count()));
  for (std::size_t j = 0; j < region.cell_count(); ++j)
    s.cell_weights[static_cast<Eigen::Index>(j)] = grid.weights[static_cast<Eigen::Index>(region.cells()[j])];
  s.l2_cost = s.compute_cost();
  return s;
}

inline std::vector<double> uniform_timegrid(double t0, double t1, std::size_t steps) {
  if (steps < 1 || !(t1 > t0)) throw InvalidArgument("uniform_timegrid: need t1 > t0 and steps >= 1");
  std::vector<double> g(steps + 1);
  for (std::size_t m = 0; m <= steps; ++m)
    g[m] = t0 + (t1 - t0) * static_cast<double>(m) / static_cast<double>(steps);
  g.back() = t1;
  return g;
}

namespace detail {

// (1 - exp(-lam*dt)) / lam, with the limit dt at lam = 0
inline double decay_gain(double lam, double dt) {
  return lam == 0.0 ? dt : -std::expm1(-lam * dt) / lam;
}

inline void check_region(const EigenBasis& basis, const ControlRegion& region) {
  if (region.size() != static_cast<std::size_t>(basis.vectors.rows()))
    throw InvalidArgument("control region is not on the basis grid");
  if (region.empty()) throw EmptyRegionError("control region is empty");
}

// B(k, j) = w_j e_k(x_j): the modal load of a unit control on region cell j.
inline Eigen::MatrixXd input_matrix(const EigenBasis& basis, Eigen::Index count,
                                    const ControlRegion& region) {
  const auto& cells = region.cells();
  Eigen::MatrixXd B(count, static_cast<Eigen::Index>(cells.size()));
  for (std::size_t j = 0; j < cells.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(cells[j]);
    B.col(static_cast<Eigen::Index>(j)) = basis.grid.weights[i] * basis.vectors.row(i).head(count).transpose();
  }
  return B;
}

// Cost-scaled input-to-final-state map over `timegrid`: column (m, j) maps the
// scaled unknown g = sqrt(dt_m w_j) f(m, j) to the final modal state.
struct InputMap {
  Eigen::MatrixXd scaled;  // K x (steps * cells)
  Field column_scale;      // sqrt(dt_m w_j)
};

inline InputMap build_input_map(const Field& eigenvalues, const Eigen::MatrixXd& B,
                                const std::vector<double>& timegrid, const Field& cell_weights) {
  const Eigen::Index K = eigenvalues.size(), cells = B.cols();
  const auto steps = static_cast<Eigen::Index>(timegrid.size() - 1);
  const double tf = timegrid.back();
  InputMap map;
  map.scaled.resize(K, steps * cells);
  map.column_scale.resize(steps * cells);
  for (Eigen::Index m = 0; m < steps; ++m) {
    const double dt = timegrid[static_cast<std::size_t>(m) + 1] - timegrid[static_cast<std::size_t>(m)];
    const double after = tf - timegrid[static_cast<std::size_t>(m) + 1];
    Field a(K);
    for (Eigen::Index k = 0; k < K; ++k)
      a[k] = std::exp(-eigenvalues[k] * after) * decay_gain(eigenvalues[k], dt);
    for (Eigen::Index j = 0; j < cells; ++j) {
      const double s = std::sqrt(dt * cell_weights[j]);
      map.column_scale[m * cells + j] = s;
      map.scaled.col(m * cells + j) = a.cwiseProduct(B.col(j)) / s;
    }
  }
  return map;
}

inline Eigen::MatrixXd unpack_values(const Field& g, const Field& column_scale, Eigen::Index steps,
                                     Eigen::Index cells) {
  Eigen::MatrixXd values(steps, cells);
  for (Eigen::Index m = 0; m < steps; ++m)
    for (Eigen::Index j = 0; j < cells; ++j) values(m, j) = g[m * cells + j] / column_scale[m * cells + j];
  return values;
}

}  // namespace detail

/// Exact modal evolution under a piecewise-constant control: on each step
/// y_k <- exp(-lam_k dt) y_k + b_k (1 - exp(-lam_k dt)) / lam_k.
inline Field advance_modes(const EigenBasis& basis, const Field& y0, const ControlSignal& signal) {
  if (y0.size() != basis.size()) throw InvalidArgument("advance_modes: coefficient size mismatch");
  detail::check_region(basis, signal.region);
  const Eigen::MatrixXd B = detail::input_matrix(basis, basis.size(), signal.region);
  Field y = y0;
  for (std::size_t m = 0; m < signal.steps(); ++m) {
    const double dt = signal.timegrid[m + 1] - signal.timegrid[m];
    const Field load = B * signal.values.row(static_cast<Eigen::Index>(m)).transpose();
    for (Eigen::Index k = 0; k < y.size(); ++k) {
      const double lam = basis.eigenvalues[k];
      y[k] = std::exp(-lam * dt) * y[k] + load[k] * detail::decay_gain(lam, dt);
    }
  }
  return y;
}

inline Field free_decay(const EigenBasis& basis, const Field& y, double dt) {
  return (-basis.eigenvalues.array() * dt).exp().matrix().cwiseProduct(y);
}

/// M_kl = <e_k, 1_omega e_l> for the modes below the cutoff.
inline Eigen::MatrixXd mass_matrix_on_region(const EigenBasis& basis, const SpectralCutoff& cutoff,
                                             const ControlRegion& region) {
  detail::check_region(basis, region);
  const Eigen::Index K = count_modes(basis, cutoff.lambda);
  if (K < 1) throw InvalidArgument("mass_matrix_on_region: cutoff selects no mode");
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(K, K);
  for (auto c : region.cells()) {
    const auto i = static_cast<Eigen::Index>(c);
    const Field row = basis.vectors.row(i).head(K).transpose();
    M.noalias() += basis.grid.weights[i] * row * row.transpose();
  }
  return M;
}

/// Controllability Gramian of the modal dynamics over [0, tau]:
/// G_kl = M_kl (1 - exp(-(lam_k + lam_l) tau)) / (lam_k + lam_l).
inline Eigen::MatrixXd gramian(const EigenBasis& basis, const SpectralCutoff& cutoff,
                               const ControlRegion& region, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("gramian: tau must be positive");
  const Eigen::MatrixXd M = mass_matrix_on_region(basis, cutoff, region);
  const Eigen::Index K = M.rows();
  Eigen::MatrixXd G(K, K);
  for (Eigen::Index k = 0; k < K; ++k)
    for (Eigen::Index l = 0; l < K; ++l)
      G(k, l) = M(k, l) * detail::decay_gain(basis.eigenvalues[k] + basis.eigenvalues[l], tau);
  return G;
}

/// Continuous-time HUM coefficients: G q = -exp(-lam tau) y0, for the control
/// f(s) = 1_omega sum_l q_l exp(-lam_l (tau - s)) e_l.
inline Field hum_adjoint_coefficients(const EigenBasis& basis, const Eigen::MatrixXd& G,
                                      const Field& y0, double tau) {
  const Eigen::Index K = G.rows();
  if (y0.size() != K) throw InvalidArgument("hum_adjoint_coefficients: size mismatch");
  const Field target = -(-basis.eigenvalues.head(K).array() * tau).exp().matrix().cwiseProduct(y0);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
  if (ldlt.info() != Eigen::Success) throw NumericalError("hum_adjoint_coefficients: LDLT failed");
  return ldlt.solve(target);
}

struct HumOptions {
  std::size_t steps = 64;
  double max_condition = 1e14;
};

/// Minimum-norm piecewise-constant control on [0, tau] that steers the modes
/// below the cutoff from y0 (their coefficients) to zero. The minimizer has
/// the adjoint form f = 1_omega sum_l q_l phi_l(t) e_l with phi_l the step
/// averages of exp(-lam_l (tau - s)); it is computed from an orthogonal
/// factorization of the cost-scaled input map rather than by inverting the
/// Gramian, whose condition number is the square of the map's.
inline ControlSignal hum_low_mode_control(const EigenBasis& basis, const SpectralCutoff& cutoff,
                                          const ControlRegion& region, const Field& y0, double tau,
                                          const HumOptions& opts = {}) {
  detail::check_region(basis, region);
  if (!(tau > 0.0)) throw InvalidArgument("hum_low_mode_control: tau must be positive");
  if (opts.steps < 64) throw InvalidArgument("hum_low_mode_control: need at least 64 time steps");
  const Eigen::Index K = count_modes(basis, cutoff.lambda);
  if (K < 1) throw InvalidArgument("hum_low_mode_control: cutoff selects no mode");
  if (y0.size() != K)
    throw InvalidArgument("hum_low_mode_control: y0 must hold the " + std::to_string(K) +
                          " low-mode coefficients");
  const auto cells = static_cast<Eigen::Index>(region.cell_count());
  auto timegrid = uniform_timegrid(0.0, tau, opts.steps);
  const auto steps = static_cast<Eigen::Index>(opts.steps);
  ControlSignal zero = make_signal(timegrid, Eigen::MatrixXd::Zero(steps, cells), region, basis.grid);
  if (y0.cwiseAbs().maxCoeff() == 0.0) return zero;

  const Eigen::MatrixXd B = detail::input_matrix(basis, K, region);
  const auto map = detail::build_input_map(basis.eigenvalues.head(K), B, timegrid, zero.cell_weights);
  if (map.scaled.cols() < K)
    throw SingularGramianError("hum_low_mode_control: fewer control unknowns than modes", cutoff.lambda,
                               region.measure(), std::numeric_limits<double>::infinity());

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(map.scaled.transpose());
  const Eigen::MatrixXd R = qr.matrixQR().topRows(K).triangularView<Eigen::Upper>();
  const Field sv = Eigen::JacobiSVD<Eigen::MatrixXd>(R).singularValues();
  const double ratio = sv.minCoeff() > 0.0 ? sv.maxCoeff() / sv.minCoeff() : std::numeric_limits<double>::infinity();
  const double condition = ratio * ratio;
  if (!(condition <= opts.max_condition))
    throw SingularGramianError("singular Gramian at Lambda=" + std::to_string(cutoff.lambda) +
                                   " on a region of measure " + std::to_string(region.measure()) +
                                   " (" + std::to_string(K) + " modes, condition " +
                                   std::to_string(condition) + ")",
                               cutoff.lambda, region.measure(), condition);

  const Field target = -(-basis.eigenvalues.head(K).array() * tau).exp().matrix().cwiseProduct(y0);
  // scaled * g = target with g = Q [z; 0], R' z = target
  const Field z = R.transpose().triangularView<Eigen::Lower>().solve(target);
  Field padded = Field::Zero(map.scaled.cols());
  padded.head(K) = z;
  const Field g = qr.householderQ() * padded;
  return make_signal(std::move(timegrid), detail::unpack_values(g, map.column_scale, steps, cells), region,
                     basis.grid);
}

/// Dyadic time slicing: slice j covers an interval of length T 2^{-(j+1)},
/// controlled on its first half with cutoff lambda0 2^j and left to decay on
/// the second half.
struct LRSlice {
  double t_start = 0.0;
  double t_mid = 0.0;
  double t_end = 0.0;
  double lambda = 0.0;
};

struct LRSchedule {
  double T = 0.0;
  std::vector<LRSlice> slices;
  int terminal = 0;
};

inline LRSchedule make_lr_schedule(double T, double lambda0, const EigenBasis& basis) {
  if (!(T > 0.0)) throw InvalidArgument("make_lr_schedule: T must be positive");
  if (!(lambda0 > 0.0)) throw InvalidArgument("make_lr_schedule: lambda0 must be positive");
  const double top = basis.max_frequency();
  LRSchedule s;
  s.T = T;
  double t = 0.0, lam = lambda0, len = T / 2.0;
  for (int j = 0;; ++j) {
    s.slices.push_back({t, t + len / 2.0, t + len, lam});
    if (lam * (1.0 + kCutoffRelTol) >= top) {
      s.terminal = j;
      break;
    }
    if (j > 60) throw InvalidArgument("make_lr_schedule: lambda0 too small for the spectrum");
    t += len;
    len /= 2.0;
    lam *= 2.0;
  }
  return s;
}

struct LRSliceRecord {
  int j = 0;
  double lambda = 0.0;
  Eigen::Index mode_count = 0;
  double active_cost = 0.0;
  double pre_norm = 0.0;        // full state at slice start
  double low_norm_before = 0.0;  // modes <= lambda at slice start
  double low_norm_after = 0.0;   // modes <= lambda after the active half
  double post_norm = 0.0;        // full state at slice end
  double max_passive_growth = 0.0;
  bool skipped = false;
};

struct LROptions {
  std::size_t steps_per_slice = 64;
  double max_condition = 1e14;
  // active halves are skipped once the low modes are below this fraction of
  // the initial norm (round-off level); nothing is left to steer there
  double skip_floor = 1e-14;
  double tol_final = 1e-6;
};

struct LRResult {
  ControlSignal signal;
  std::vector<LRSliceRecord> ledger;
  double initial_norm = 0.0;
  double final_norm = 0.0;
  bool converged = false;
};

/// Lebeau-Robbiano iteration on the double. `ext` must be a complete modal
/// basis of the doubled operator; `region` lives on the doubled grid.
inline LRResult lr_control(const DoubleDomain& dd, const EigenBasis& ext, const LRSchedule& schedule,
                           const ControlRegion& region, const Field& U0, const LROptions& opts = {}) {
  if (ext.vectors.rows() != static_cast<Eigen::Index>(2 * dd.n()) || ext.size() != ext.vectors.rows())
    throw InvalidArgument("lr_control: expected a complete basis on the doubled grid");
  detail::check_region(ext, region);
  if (U0.size() != ext.vectors.rows()) throw InvalidArgument("lr_control: U0 is not on the doubled grid");

  LRResult res;
  Field y = ext.coefficients(U0);
  res.initial_norm = y.norm();
  const auto cells = static_cast<Eigen::Index>(region.cell_count());

  std::vector<double> times{0.0};
  std::vector<Eigen::RowVectorXd> rows;
  auto append_zero = [&](double until) {
    if (until > times.back()) {
      times.push_back(until);
      rows.push_back(Eigen::RowVectorXd::Zero(cells));
    }
  };

  for (std::size_t j = 0; j < schedule.slices.size(); ++j) {
    const LRSlice& sl = schedule.slices[j];
    LRSliceRecord rec;
    rec.j = static_cast<int>(j);
    rec.lambda = sl.lambda;
    const SpectralCutoff cut = make_cutoff(ext, sl.lambda);
    rec.mode_count = cut.count;
    rec.pre_norm = y.norm();
    rec.low_norm_before = y.head(cut.count).norm();
    append_zero(sl.t_start);
    const double tau = sl.t_mid - sl.t_start;

    if (rec.low_norm_before <= opts.skip_floor * res.initial_norm) {
      rec.skipped = true;
      y = free_decay(ext, y, tau);
      append_zero(sl.t_mid);
    } else {
      ControlSignal piece;
      try {
        piece = hum_low_mode_control(ext, cut, region, y.head(cut.count), tau,
                                     {opts.steps_per_slice, opts.max_condition});
      } catch (const SingularGramianError& e) {
        throw SingularGramianError(std::string(e.what()) + " in slice " + std::to_string(j), e.lambda(),
                                   e.region_measure(), e.condition(), static_cast<int>(j));
      }
      y = advance_modes(ext, y, piece);
      rec.active_cost = piece.l2_cost;
      for (std::size_t m = 0; m < piece.steps(); ++m) {
        times.push_back(sl.t_start + piece.timegrid[m + 1]);
        rows.push_back(piece.values.row(static_cast<Eigen::Index>(m)));
      }
      times.back() = sl.t_mid;
    }
    rec.low_norm_after = y.head(cut.count).norm();
    const double before_passive = y.norm();
    y = free_decay(ext, y, sl.t_end - sl.t_mid);
    append_zero(sl.t_end);
    rec.post_norm = y.norm();
    rec.max_passive_growth = before_passive > 0.0 ? rec.post_norm / before_passive : 0.0;
    res.ledger.push_back(rec);
  }
  const double tail = schedule.T - schedule.slices.back().t_end;
  if (tail > 0.0) {
    y = free_decay(ext, y, tail);
    append_zero(schedule.T);
  }

  Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size()), cells);
  for (std::size_t m = 0; m < rows.size(); ++m) values.row(static_cast<Eigen::Index>(m)) = rows[m];
  res.signal = make_signal(std::move(times), std::move(values), region, ext.grid);
  res.final_norm = y.norm();
  res.converged = res.final_norm <= opts.tol_final * res.initial_norm;
  return res;
}

struct ContinuationStep {
  double regularization = 0.0;  // relative to the largest column norm of R
  double cost = 0.0;
  double residual = 0.0;  // final modal norm / initial modal norm
};

struct HumFullOptions {
  std::vector<double> regularization{1e-8, 1e-10, 1e-12};
  double min_norm_rel_tol = 0.01;
};

struct HumFullResult {
  ControlSignal signal;
  std::vector<ContinuationStep> continuation;
  double initial_norm = 0.0;
  double final_norm = 0.0;
  bool min_norm_certified = false;  // last two continuation costs within tolerance
};

/// Minimum-norm piecewise-constant control over every mode, from Tikhonov
/// regularized least squares on the cost-scaled input-to-final-state map.
/// The last regularization level is the one returned.
inline HumFullResult hum_full_control(const DoubleDomain& dd, const EigenBasis& ext,
                                      const ControlRegion& region, const Field& U0,
                                      std::vector<double> timegrid, const HumFullOptions& opts = {}) {
  if (ext.vectors.rows() != static_cast<Eigen::Index>(2 * dd.n()) || ext.size() != ext.vectors.rows())
    throw InvalidArgument("hum_full_control: expected a complete basis on the doubled grid");
  detail::check_region(ext, region);
  if (U0.size() != ext.vectors.rows()) throw InvalidArgument("hum_full_control: U0 is not on the doubled grid");
  if (opts.regularization.empty()) throw InvalidArgument("hum_full_control: no regularization level");
  const Eigen::Index K = ext.size();
  const auto cells = static_cast<Eigen::Index>(region.cell_count());
  const auto steps = static_cast<Eigen::Index>(timegrid.size()) - 1;
  if (steps * cells < K)
    throw InfeasibleError("hum_full_control: " + std::to_string(steps) + " steps x " + std::to_string(cells) +
                          " cells cannot reach " + std::to_string(K) + " modes");
  const double T = timegrid.back() - timegrid.front();

  HumFullResult res;
  const Field y0 = ext.coefficients(U0);
  res.initial_norm = y0.norm();
  ControlSignal zero = make_signal(timegrid, Eigen::MatrixXd::Zero(steps, cells), region, ext.grid);
  if (res.initial_norm == 0.0) {
    res.signal = zero;
    res.min_norm_certified = true;
    for (double eps : opts.regularization) res.continuation.push_back({eps, 0.0, 0.0});
    return res;
  }

  const Eigen::MatrixXd B = detail::input_matrix(ext, K, region);
  const Field target = -free_decay(ext, y0, T);
  std::vector<double> local(timegrid.size());
  for (std::size_t m = 0; m < timegrid.size(); ++m) local[m] = timegrid[m] - timegrid.front();
  const auto map = detail::build_input_map(ext.eigenvalues, B, local, zero.cell_weights);
  for (Eigen::Index k = 0; k < K; ++k)
    if (map.scaled.row(k).cwiseAbs().maxCoeff() == 0.0 && std::abs(target[k]) > 0.0)
      throw InfeasibleError("hum_full_control: mode " + std::to_string(k) + " is invisible on the region");

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(map.scaled.transpose());
  const Eigen::MatrixXd Rt =
      qr.matrixQR().topRows(K).triangularView<Eigen::Upper>().toDenseMatrix().transpose();
  const double scale = Rt.colwise().norm().maxCoeff();

  Field best_g;
  for (double eps_rel : opts.regularization) {
    // min |Rt z - target|^2 + (eps |R|)^2 |z|^2
    Eigen::MatrixXd aug(2 * K, K);
    aug.topRows(K) = Rt;
    aug.bottomRows(K) = Eigen::MatrixXd::Identity(K, K) * (eps_rel * scale);
    Field rhs = Field::Zero(2 * K);
    rhs.head(K) = target;
    const Field z = aug.householderQr().solve(rhs);
    Field padded = Field::Zero(map.scaled.cols());
    padded.head(K) = z;
    best_g = qr.householderQ() * padded;
    ContinuationStep st;
    st.regularization = eps_rel;
    st.cost = best_g.norm();
    st.residual = (Rt * z - target).norm() / res.initial_norm;
    res.continuation.push_back(st);
  }
  res.signal = make_signal(std::move(timegrid), detail::unpack_values(best_g, map.column_scale, steps, cells),
                           region, ext.grid);
  res.final_norm = advance_modes(ext, y0, res.signal).norm();
  // the stored signal may start later than 0; the modal state is propagated
  // from the signal start, which is where y0 is taken
  if (res.continuation.size() >= 2) {
    const double a = res.continuation[res.continuation.size() - 2].cost;
    const double b = res.continuation.back().cost;
    res.min_norm_certified = std::abs(a - b) <= opts.min_norm_rel_tol * b;
  } else {
    res.min_norm_certified = true;
  }
  return res;
}

inline HumFullResult hum_full_control(const DoubleDomain& dd, const EigenBasis& ext,
                                      const ControlRegion& region, const Field& U0, double T,
                                      std::size_t steps, const HumFullOptions& opts = {}) {
  if (!(T > 0.0)) throw InvalidArgument("hum_full_control: T must be positive");
  return hum_full_control(dd, ext, region, U0, uniform_timegrid(0.0, T, steps), opts);
}

}  // namespace simnull
