#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "simnull/doubling.hpp"
#include "simnull/lp.hpp"
#include "simnull/parallel.hpp"
#include "simnull/spectral.hpp"

namespace simnull {

enum class EstimateMethod { ExactLp, SigmaMinL2, RandomizedLower };

inline std::string to_string(EstimateMethod m) {
  switch (m) {
    case EstimateMethod::ExactLp: return "exact-lp";
    case EstimateMethod::SigmaMinL2: return "sigma-min-l2";
    case EstimateMethod::RandomizedLower: return "randomized-lower";
  }
  return "?";
}

/// Estimate of sup ||Pi u||_inf / ||1_omega Pi u||_L1 over the spectral
/// subspace (or its L2 surrogate). `certificate` holds mode coefficients of
/// an extremal vector when the method produces one.
struct SpectralConstantEstimate {
  double lambda = 0.0;
  Eigen::Index mode_count = 0;
  double region_measure = 0.0;
  double constant = 0.0;
  EstimateMethod method = EstimateMethod::ExactLp;
  std::optional<Field> certificate;

  bool finite() const { return std::isfinite(constant); }
};

struct EstimateOptions {
  unsigned threads = 1;
  // singular values of the weighted restriction below this count as zero
  double rank_tol = 1e-13;
};

/// ||E c||_inf / ||1_omega E c||_L1 for mode coefficients c.
inline double concentration_ratio(const EigenBasis& basis, Eigen::Index count, const Field& c,
                                  const ControlRegion& region) {
  const Field u = basis.vectors.leftCols(count) * c;
  const double den = l1_norm_on(basis.grid, u, region);
  const double num = sup_norm(u);
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

namespace detail {

inline Eigen::MatrixXd weighted_restriction(const EigenBasis& basis, Eigen::Index count,
                                            const ControlRegion& region) {
  const auto& cells = region.cells();
  Eigen::MatrixXd R(static_cast<Eigen::Index>(cells.size()), count);
  for (std::size_t r = 0; r < cells.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(cells[r]);
    R.row(static_cast<Eigen::Index>(r)) =
        std::sqrt(basis.grid.weights[i]) * basis.vectors.row(i).head(count);
  }
  return R;
}

inline Field singular_values(const Eigen::MatrixXd& R) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(R);
  return svd.singularValues();
}

inline void check_inputs(const EigenBasis& basis, Eigen::Index count, const ControlRegion& region) {
  if (count < 1) throw InvalidArgument("spectral constant: cutoff selects no mode");
  if (region.size() != static_cast<std::size_t>(basis.vectors.rows()))
    throw InvalidArgument("spectral constant: region is not on the basis grid");
  if (region.empty()) throw EmptyRegionError("spectral constant: empty region");
}

}  // namespace detail

/// True when the omega-restriction is not injective on the first `count` modes.
inline bool restriction_rank_deficient(const EigenBasis& basis, Eigen::Index count,
                                       const ControlRegion& region, double rank_tol = 1e-13) {
  if (static_cast<Eigen::Index>(region.cell_count()) < count) return true;
  const Field s = detail::singular_values(detail::weighted_restriction(basis, count, region));
  return s.minCoeff() < rank_tol;
}

/// Exact discrete constant. The ratio does not depend on the basis of the
/// subspace, so the LP runs in coordinates F = E V S^{-1} (from the SVD
/// W_omega^{1/2} E_omega = U S V') whose omega-restriction is orthonormal.
/// For every target cell i solve
///   max t  s.t.  sum_j w_j y_j F_j = t F_i / |F_i|,  -1 <= y_j <= 1  (j in omega),
/// whose optimum is |F_i| / max{(Fc)_i : ||1_omega F c||_L1 <= 1}. The optimal
/// duals of the equality rows are extremal coefficients in F coordinates.
inline SpectralConstantEstimate estimate_constant_lp(const EigenBasis& basis,
                                                     const SpectralCutoff& cutoff,
                                                     const ControlRegion& region,
                                                     const EstimateOptions& opts = {}) {
  const Eigen::Index K = count_modes(basis, cutoff.lambda);
  detail::check_inputs(basis, K, region);
  SpectralConstantEstimate est;
  est.lambda = cutoff.lambda;
  est.mode_count = K;
  est.region_measure = region.measure();
  est.method = EstimateMethod::ExactLp;
  if (static_cast<Eigen::Index>(region.cell_count()) < K) {
    est.constant = std::numeric_limits<double>::infinity();
    return est;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(detail::weighted_restriction(basis, K, region), Eigen::ComputeThinV);
  const Field sigma = svd.singularValues();
  if (sigma.minCoeff() < opts.rank_tol) {
    est.constant = std::numeric_limits<double>::infinity();
    return est;
  }
  const Eigen::MatrixXd T = svd.matrixV() * sigma.cwiseInverse().asDiagonal();  // c = T c'
  const Eigen::MatrixXd F = basis.vectors.leftCols(K) * T;

  const auto& cells = region.cells();
  const auto m = static_cast<Eigen::Index>(cells.size());
  const double wbar = region.measure() / static_cast<double>(m);

  lp::Problem base;
  base.A.resize(K, m + 1);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto i = static_cast<Eigen::Index>(cells[static_cast<std::size_t>(j)]);
    base.A.col(j) = (basis.grid.weights[i] / wbar) * F.row(i).transpose();
  }
  base.b = Field::Zero(K);
  base.c = Field::Zero(m + 1);
  base.c[m] = 1.0;
  base.lower = Field::Constant(m + 1, -1.0);
  base.lower[m] = 0.0;
  base.upper = Field::Constant(m + 1, 1.0);
  base.upper[m] = lp::kInf;

  const Eigen::Index targets = F.rows();
  std::vector<double> value(static_cast<std::size_t>(targets), 0.0);
  std::vector<Field> duals(static_cast<std::size_t>(targets));
  parallel_for(static_cast<std::size_t>(targets), opts.threads, [&](std::size_t t) {
    const auto i = static_cast<Eigen::Index>(t);
    const double fnorm = F.row(i).norm();
    if (fnorm == 0.0) return;  // (Ec)_i == 0 for all c
    lp::Problem p = base;
    p.A.col(m) = -F.row(i).transpose() / fnorm;
    // y_j = sign(F_j . F_i) is optimal when K = 1 and a good start otherwise
    p.start = Field::Zero(m + 1);
    for (Eigen::Index j = 0; j < m; ++j) p.start[j] = base.A.col(j).dot(F.row(i)) >= 0.0 ? 1.0 : -1.0;
    p.crash = {m};  // t basic from the start: the residual of the start lies along F_i
    const lp::Solution sol = lp::solve(p);
    if (sol.status != lp::Status::Optimal || !(sol.x[m] > 0.0))
      throw NumericalError("estimate_constant_lp: LP for target cell " + std::to_string(i) +
                           " ended with status " + lp::to_string(sol.status) + " (K=" +
                           std::to_string(K) + ", |omega| cells=" + std::to_string(m) +
                           ", t=" + std::to_string(sol.x.size() ? sol.x[m] : 0.0) + ")");
    value[t] = fnorm / (sol.x[m] * wbar);
    duals[t] = -sol.duals;
  });

  std::size_t best = 0;
  for (std::size_t t = 1; t < value.size(); ++t)
    if (value[t] > value[best]) best = t;
  est.constant = value[best];
  est.certificate = T * duals[best];
  return est;
}

/// 1 / sigma_min(W_omega^{1/2} E): the L2-to-L2 observability surrogate.
inline SpectralConstantEstimate estimate_constant_l2(const EigenBasis& basis,
                                                     const SpectralCutoff& cutoff,
                                                     const ControlRegion& region,
                                                     const EstimateOptions& opts = {}) {
  const Eigen::Index K = count_modes(basis, cutoff.lambda);
  detail::check_inputs(basis, K, region);
  SpectralConstantEstimate est;
  est.lambda = cutoff.lambda;
  est.mode_count = K;
  est.region_measure = region.measure();
  est.method = EstimateMethod::SigmaMinL2;
  if (static_cast<Eigen::Index>(region.cell_count()) < K) {
    est.constant = std::numeric_limits<double>::infinity();
    return est;
  }
  const Field s = detail::singular_values(detail::weighted_restriction(basis, K, region));
  const double smin = s.minCoeff();
  est.constant = smin < opts.rank_tol ? std::numeric_limits<double>::infinity() : 1.0 / smin;
  return est;
}

/// Lower bound from random coefficient vectors; never exceeds the exact value.
inline SpectralConstantEstimate estimate_constant_random(const EigenBasis& basis,
                                                         const SpectralCutoff& cutoff,
                                                         const ControlRegion& region,
                                                         int samples, std::uint64_t seed) {
  const Eigen::Index K = count_modes(basis, cutoff.lambda);
  detail::check_inputs(basis, K, region);
  if (samples < 1) throw InvalidArgument("estimate_constant_random: need at least one sample");
  SpectralConstantEstimate est;
  est.lambda = cutoff.lambda;
  est.mode_count = K;
  est.region_measure = region.measure();
  est.method = EstimateMethod::RandomizedLower;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double best = 0.0;
  Field best_c = Field::Zero(K);
  for (int s = 0; s < samples; ++s) {
    Field c(K);
    for (Eigen::Index k = 0; k < K; ++k) c[k] = normal(rng);
    const double r = concentration_ratio(basis, K, c, region);
    if (r > best) {
      best = r;
      best_c = c;
    }
  }
  est.constant = best;
  est.certificate = best_c;
  return est;
}

/// The modes of `ext` with frequency <= lambda, as a basis on the doubled grid.
inline EigenBasis truncate_basis(const EigenBasis& basis, double lambda) {
  const Eigen::Index K = count_modes(basis, lambda);
  EigenBasis t;
  t.bc = basis.bc;
  t.grid = basis.grid;
  t.eigenvalues = basis.eigenvalues.head(K);
  t.frequencies = basis.frequencies.head(K);
  t.vectors = basis.vectors.leftCols(K);
  return t;
}

/// Constant of the simultaneous Dirichlet/Neumann inequality, computed on the
/// double with the odd/even extended modes and the region omega x {+1}.
inline SpectralConstantEstimate simultaneous_constant(const DoubleDomain& dd,
                                                      const ExtendedBasis& ext,
                                                      const SpectralCutoff& cutoff,
                                                      const ControlRegion& region,
                                                      EstimateMethod method = EstimateMethod::ExactLp,
                                                      const EstimateOptions& opts = {}) {
  const ControlRegion lifted = lift_region(dd, region);
  const EigenBasis low = truncate_basis(ext.basis, cutoff.lambda);
  const SpectralCutoff c = make_cutoff(low, cutoff.lambda);
  SpectralConstantEstimate est;
  switch (method) {
    case EstimateMethod::ExactLp: est = estimate_constant_lp(low, c, lifted, opts); break;
    case EstimateMethod::SigmaMinL2: est = estimate_constant_l2(low, c, lifted, opts); break;
    case EstimateMethod::RandomizedLower:
      throw InvalidArgument("simultaneous_constant: use estimate_constant_random on the double");
  }
  est.region_measure = region.measure();
  return est;
}

inline SpectralConstantEstimate simultaneous_constant(const DoubleDomain& dd, const EigenBasis& dirichlet,
                                                      const EigenBasis& neumann,
                                                      const SpectralCutoff& cutoff,
                                                      const ControlRegion& region,
                                                      EstimateMethod method = EstimateMethod::ExactLp,
                                                      const EstimateOptions& opts = {}) {
  return simultaneous_constant(dd, build_extended_basis(dd, dirichlet, neumann), cutoff, region,
                               method, opts);
}

struct ExponentialFit {
  double log_c = 0.0;
  double slope = 0.0;
  double residual = 0.0;  // RMS of the log residuals
};

/// Least-squares fit log(constant) ~ log_c + slope * lambda.
inline ExponentialFit fit_exponential(const std::vector<SpectralConstantEstimate>& estimates) {
  if (estimates.size() < 3) throw InvalidArgument("fit_exponential: need at least 3 estimates");
  for (const auto& e : estimates)
    if (!e.finite() || !(e.constant > 0.0))
      throw InvalidArgument("fit_exponential: estimates must be finite and positive");
  const auto n = static_cast<Eigen::Index>(estimates.size());
  Eigen::MatrixXd X(n, 2);
  Field y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = estimates[static_cast<std::size_t>(i)].lambda;
    y[i] = std::log(estimates[static_cast<std::size_t>(i)].constant);
  }
  std::vector<double> lams(X.col(1).begin(), X.col(1).end());
  std::sort(lams.begin(), lams.end());
  if (std::adjacent_find(lams.begin(), lams.end()) != lams.end())
    throw InvalidArgument("fit_exponential: lambdas must be distinct");
  const Field beta = X.colPivHouseholderQr().solve(y);
  const Field r = y - X * beta;
  return {beta[0], beta[1], std::sqrt(r.squaredNorm() / static_cast<double>(n))};
}

}  // namespace simnull
