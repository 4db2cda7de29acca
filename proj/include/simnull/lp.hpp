#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "simnull/errors.hpp"

namespace simnull::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// maximize c'x  subject to  A x = b,  lower <= x <= upper.
/// Lower bounds must be finite; upper bounds may be +inf.
struct Problem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  // Optional starting point; every entry must sit on one of its finite bounds.
  Eigen::VectorXd start;
  // Columns to pivot into the starting basis in place of artificials, kept
  // only when the resulting basic solution stays within bounds.
  std::vector<Eigen::Index> crash;
};

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };

inline std::string to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::IterationLimit: return "iteration-limit";
  }
  return "?";
}

struct Solution {
  Status status = Status::IterationLimit;
  Eigen::VectorXd x;
  double objective = 0.0;
  Eigen::VectorXd duals;  // y with y'A = c_B' B^{-1} A at the optimal basis
  int iterations = 0;
};

struct Options {
  double optimality_tol = 1e-11;
  double feasibility_tol = 1e-9;
  double pivot_tol = 1e-11;
  int refactor_every = 40;
  int max_iterations = 0;  // 0: automatic
};

namespace detail {

// Bounded-variable revised simplex with an explicit basis inverse.
class Simplex {
 public:
  Simplex(const Problem& p, const Options& o) : p_(p), o_(o) {
    m_ = p.A.rows();
    ns_ = p.A.cols();
    nt_ = ns_ + m_;
    if (p.b.size() != m_ || p.c.size() != ns_ || p.lower.size() != ns_ || p.upper.size() != ns_)
      throw InvalidArgument("lp: inconsistent problem dimensions");
    for (Eigen::Index j = 0; j < ns_; ++j) {
      if (!std::isfinite(p.lower[j])) throw InvalidArgument("lp: lower bounds must be finite");
      if (p.upper[j] < p.lower[j]) throw InvalidArgument("lp: empty variable range");
    }
    lo_.resize(nt_);
    up_.resize(nt_);
    lo_.head(ns_) = p.lower;
    up_.head(ns_) = p.upper;
    lo_.tail(m_).setZero();
    up_.tail(m_).setConstant(kInf);
    x_ = lo_;
    if (p.start.size() != 0) {
      if (p.start.size() != ns_) throw InvalidArgument("lp: start has the wrong size");
      for (Eigen::Index j = 0; j < ns_; ++j) {
        if (p.start[j] != p.lower[j] && p.start[j] != p.upper[j])
          throw InvalidArgument("lp: start entries must be at a bound");
        x_[j] = p.start[j];
      }
    }
    art_sign_.resize(m_);
    const Eigen::VectorXd r = p.b - p.A * x_.head(ns_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      art_sign_[i] = r[i] >= 0.0 ? 1.0 : -1.0;
      x_[ns_ + i] = std::abs(r[i]);
    }
    basis_.resize(static_cast<std::size_t>(m_));
    is_basic_.assign(static_cast<std::size_t>(nt_), -1);
    for (Eigen::Index i = 0; i < m_; ++i) {
      basis_[static_cast<std::size_t>(i)] = ns_ + i;
      is_basic_[static_cast<std::size_t>(ns_ + i)] = static_cast<int>(i);
    }
    binv_ = art_sign_.asDiagonal();
    max_iter_ = o.max_iterations > 0 ? o.max_iterations
                                     : static_cast<int>(50 * (nt_ + m_) + 1000);
  }

  Solution run() {
    Solution sol;
    for (Eigen::Index j : p_.crash) try_crash(j);
    // phase 1: maximize -sum(artificials)
    Eigen::VectorXd c1 = Eigen::VectorXd::Zero(nt_);
    c1.tail(m_).setConstant(-1.0);
    Status st = iterate(c1);
    sol.iterations = iterations_;
    if (st != Status::Optimal) {
      sol.status = st == Status::Unbounded ? Status::IterationLimit : st;
      return sol;
    }
    const double scale = 1.0 + p_.b.cwiseAbs().maxCoeff() + p_.A.cwiseAbs().maxCoeff();
    if (x_.tail(m_).sum() > o_.feasibility_tol * scale) {
      sol.status = Status::Infeasible;
      return sol;
    }
    // artificials are pinned at zero from here on
    for (Eigen::Index i = 0; i < m_; ++i) {
      up_[ns_ + i] = 0.0;
      x_[ns_ + i] = 0.0;
    }
    Eigen::VectorXd c2 = Eigen::VectorXd::Zero(nt_);
    c2.head(ns_) = p_.c;
    st = iterate(c2);
    sol.iterations = iterations_;
    sol.status = st;
    sol.x = x_.head(ns_);
    sol.objective = p_.c.dot(sol.x);
    Eigen::VectorXd cb(m_);
    for (Eigen::Index i = 0; i < m_; ++i) cb[i] = c2[basis_[static_cast<std::size_t>(i)]];
    sol.duals = binv_.transpose() * cb;
    return sol;
  }

 private:
  Eigen::VectorXd column(Eigen::Index j) const {
    if (j < ns_) return p_.A.col(j);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(m_);
    e[j - ns_] = art_sign_[j - ns_];
    return e;
  }

  void try_crash(Eigen::Index j) {
    if (j < 0 || j >= ns_) throw InvalidArgument("lp: crash column out of range");
    if (is_basic_[static_cast<std::size_t>(j)] >= 0) return;
    const Eigen::VectorXd alpha = binv_ * column(j);
    Eigen::Index row = -1;
    for (Eigen::Index i = 0; i < m_; ++i)
      if (basis_[static_cast<std::size_t>(i)] >= ns_ && std::abs(alpha[i]) > o_.pivot_tol &&
          (row < 0 || std::abs(alpha[i]) > std::abs(alpha[row])))
        row = i;
    if (row < 0) return;
    const auto saved_basis = basis_;
    const auto saved_is_basic = is_basic_;
    const Eigen::MatrixXd saved_binv = binv_;
    const Eigen::VectorXd saved_x = x_;
    const Eigen::Index leaving = basis_[static_cast<std::size_t>(row)];
    x_[leaving] = 0.0;
    is_basic_[static_cast<std::size_t>(leaving)] = -1;
    basis_[static_cast<std::size_t>(row)] = j;
    is_basic_[static_cast<std::size_t>(j)] = static_cast<int>(row);
    refactor();
    const double tol = o_.feasibility_tol * (1.0 + p_.b.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < m_; ++i) {
      const Eigen::Index bj = basis_[static_cast<std::size_t>(i)];
      if (x_[bj] < lo_[bj] - tol || x_[bj] > up_[bj] + tol) {
        basis_ = saved_basis;
        is_basic_ = saved_is_basic;
        binv_ = saved_binv;
        x_ = saved_x;
        return;
      }
      x_[bj] = std::clamp(x_[bj], lo_[bj], up_[bj]);
    }
  }

  void refactor() {
    Eigen::MatrixXd B(m_, m_);
    for (Eigen::Index i = 0; i < m_; ++i) B.col(i) = column(basis_[static_cast<std::size_t>(i)]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    binv_ = lu.inverse();
    Eigen::VectorXd rhs = p_.b;
    for (Eigen::Index j = 0; j < nt_; ++j)
      if (is_basic_[static_cast<std::size_t>(j)] < 0 && x_[j] != 0.0) rhs -= column(j) * x_[j];
    const Eigen::VectorXd xb = binv_ * rhs;
    for (Eigen::Index i = 0; i < m_; ++i) x_[basis_[static_cast<std::size_t>(i)]] = xb[i];
  }

  Status iterate(const Eigen::VectorXd& cost) {
    int degenerate_streak = 0;
    int since_refactor = 0;
    const double cscale = 1.0 + cost.cwiseAbs().maxCoeff();
    while (true) {
      if (iterations_ >= max_iter_) return Status::IterationLimit;
      Eigen::VectorXd cb(m_);
      for (Eigen::Index i = 0; i < m_; ++i) cb[i] = cost[basis_[static_cast<std::size_t>(i)]];
      const Eigen::VectorXd pi = binv_.transpose() * cb;
      const bool bland = degenerate_streak > 30;

      Eigen::Index enter = -1;
      double best = 0.0;
      int dir = 0;
      for (Eigen::Index j = 0; j < nt_; ++j) {
        if (is_basic_[static_cast<std::size_t>(j)] >= 0) continue;
        if (up_[j] == lo_[j]) continue;
        double d = cost[j];
        if (j < ns_) d -= pi.dot(p_.A.col(j));
        else d -= pi[j - ns_] * art_sign_[j - ns_];
        const bool at_upper = x_[j] == up_[j];
        int cand = 0;
        if (!at_upper && d > o_.optimality_tol * cscale) cand = +1;
        else if (at_upper && d < -o_.optimality_tol * cscale) cand = -1;
        if (cand == 0) continue;
        if (bland) {
          enter = j;
          dir = cand;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          enter = j;
          dir = cand;
        }
      }
      if (enter < 0) return Status::Optimal;

      const Eigen::VectorXd alpha = binv_ * column(enter);
      double theta = up_[enter] - lo_[enter];
      Eigen::Index leave_row = -1;
      bool leave_to_upper = false;
      double leave_piv = 0.0;
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double delta = -dir * alpha[i];
        if (std::abs(delta) <= o_.pivot_tol) continue;
        const Eigen::Index bj = basis_[static_cast<std::size_t>(i)];
        double t = kInf;
        bool to_upper = false;
        if (delta < 0.0) {
          t = std::max(0.0, (x_[bj] - lo_[bj]) / -delta);
        } else if (std::isfinite(up_[bj])) {
          t = std::max(0.0, (up_[bj] - x_[bj]) / delta);
          to_upper = true;
        }
        if (!std::isfinite(t)) continue;
        const double slack = std::isfinite(theta) ? 1e-14 * (1.0 + theta) : 0.0;
        if (t < theta - slack ||
            (leave_row >= 0 && std::abs(t - theta) <= slack &&
             (bland ? bj < basis_[static_cast<std::size_t>(leave_row)]
                    : std::abs(delta) > leave_piv))) {
          theta = t;
          leave_row = i;
          leave_to_upper = to_upper;
          leave_piv = std::abs(delta);
        }
      }
      if (!std::isfinite(theta)) return Status::Unbounded;
      ++iterations_;
      degenerate_streak = theta <= 1e-14 ? degenerate_streak + 1 : 0;

      for (Eigen::Index i = 0; i < m_; ++i)
        x_[basis_[static_cast<std::size_t>(i)]] -= dir * alpha[i] * theta;
      x_[enter] += dir * theta;

      if (leave_row < 0) {
        // bound flip
        x_[enter] = dir > 0 ? up_[enter] : lo_[enter];
        continue;
      }
      const Eigen::Index leaving = basis_[static_cast<std::size_t>(leave_row)];
      x_[leaving] = leave_to_upper ? up_[leaving] : lo_[leaving];
      is_basic_[static_cast<std::size_t>(leaving)] = -1;
      basis_[static_cast<std::size_t>(leave_row)] = enter;
      is_basic_[static_cast<std::size_t>(enter)] = static_cast<int>(leave_row);

      const double piv = alpha[leave_row];
      binv_.row(leave_row) /= piv;
      for (Eigen::Index i = 0; i < m_; ++i)
        if (i != leave_row && alpha[i] != 0.0) binv_.row(i) -= alpha[i] * binv_.row(leave_row);
      if (++since_refactor >= o_.refactor_every) {
        refactor();
        since_refactor = 0;
      }
    }
  }

  const Problem& p_;
  Options o_;
  Eigen::Index m_ = 0, ns_ = 0, nt_ = 0;
  Eigen::VectorXd lo_, up_, x_, art_sign_;
  std::vector<Eigen::Index> basis_;
  std::vector<int> is_basic_;
  Eigen::MatrixXd binv_;
  int iterations_ = 0;
  int max_iter_ = 0;
};

}  // namespace detail

inline Solution solve(const Problem& problem, const Options& options = {}) {
  detail::Simplex s(problem, options);
  return s.run();
}

}  // namespace simnull::lp
