#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "simnull/errors.hpp"

namespace simnull {

using Field = Eigen::VectorXd;
using ScalarFunction = std::function<double(double)>;

/// Cell-centered uniform grid on [0, length] (or a circle of that
/// circumference when `periodic`). Weights are the quadrature weights h*kappa.
struct Grid1D {
  std::size_t n = 0;
  double length = 1.0;
  double h = 0.0;
  bool periodic = false;
  Field centers;
  Field kappa;
  Field weights;

  double total_weight() const { return weights.sum(); }
};

/// Density at cell centers and diffusion coefficient at the n+1 faces.
/// Face 0 is the left wall, face n the right wall; on a periodic grid
/// faces 0 and n coincide.
struct Coefficients {
  Field kappa;
  Field a;
};

inline constexpr double kEllipticityFloor = 1e-8;

inline Grid1D make_uniform_grid(std::size_t n, double length, const ScalarFunction& kappa) {
  if (n < 2) throw InvalidArgument("make_uniform_grid: need n >= 2, got " + std::to_string(n));
  if (!(length > 0.0) || !std::isfinite(length))
    throw InvalidArgument("make_uniform_grid: length must be positive");
  Grid1D g;
  g.n = n;
  g.length = length;
  g.h = length / static_cast<double>(n);
  g.centers.resize(static_cast<Eigen::Index>(n));
  g.kappa.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double x = (static_cast<double>(i) + 0.5) * g.h;
    const double k = kappa(x);
    if (!(k >= kEllipticityFloor) || !std::isfinite(k))
      throw InvalidArgument("make_uniform_grid: kappa below ellipticity floor at x=" +
                            std::to_string(x));
    g.centers[static_cast<Eigen::Index>(i)] = x;
    g.kappa[static_cast<Eigen::Index>(i)] = k;
  }
  g.weights = g.h * g.kappa;
  return g;
}

inline Grid1D make_uniform_grid(std::size_t n, double length = 1.0, double kappa = 1.0) {
  return make_uniform_grid(n, length, [kappa](double) { return kappa; });
}

/// Grid with explicitly given density samples (used for reflected grids).
inline Grid1D make_grid_from_samples(double length, const Field& kappa, bool periodic) {
  const auto n = static_cast<std::size_t>(kappa.size());
  if (n < 2) throw InvalidArgument("make_grid_from_samples: need at least two cells");
  if (!(length > 0.0)) throw InvalidArgument("make_grid_from_samples: length must be positive");
  if ((kappa.array() < kEllipticityFloor).any())
    throw InvalidArgument("make_grid_from_samples: kappa below ellipticity floor");
  Grid1D g;
  g.n = n;
  g.length = length;
  g.h = length / static_cast<double>(n);
  g.periodic = periodic;
  g.centers.resize(kappa.size());
  for (Eigen::Index i = 0; i < kappa.size(); ++i) g.centers[i] = (static_cast<double>(i) + 0.5) * g.h;
  g.kappa = kappa;
  g.weights = g.h * g.kappa;
  return g;
}

inline Coefficients make_coefficients(const Grid1D& grid, const ScalarFunction& a) {
  Coefficients c;
  c.kappa = grid.kappa;
  c.a.resize(static_cast<Eigen::Index>(grid.n + 1));
  for (std::size_t f = 0; f <= grid.n; ++f) {
    const double x = static_cast<double>(f) * grid.h;
    const double v = a(x);
    if (!(v >= kEllipticityFloor) || !std::isfinite(v))
      throw InvalidArgument("make_coefficients: a below ellipticity floor at x=" + std::to_string(x));
    c.a[static_cast<Eigen::Index>(f)] = v;
  }
  return c;
}

inline Coefficients make_coefficients(const Grid1D& grid, double a = 1.0) {
  return make_coefficients(grid, [a](double) { return a; });
}

inline void validate_coefficients(const Grid1D& grid, const Coefficients& c) {
  if (static_cast<std::size_t>(c.kappa.size()) != grid.n ||
      static_cast<std::size_t>(c.a.size()) != grid.n + 1)
    throw InvalidArgument("coefficients: expected " + std::to_string(grid.n) + " kappa and " +
                          std::to_string(grid.n + 1) + " face values, got " +
                          std::to_string(c.kappa.size()) + " and " + std::to_string(c.a.size()));
  if ((c.kappa.array() < kEllipticityFloor).any() || (c.a.array() < kEllipticityFloor).any())
    throw InvalidArgument("coefficients: entries below ellipticity floor");
  for (Eigen::Index i = 0; i < c.kappa.size(); ++i) {
    const double want = grid.weights[i] / grid.h;
    if (std::abs(c.kappa[i] - want) > 1e-13 * std::max(1.0, std::abs(want)))
      throw InvalidArgument("coefficients: kappa does not match the grid density at cell " +
                            std::to_string(i));
  }
  if (grid.periodic && c.a[0] != c.a[c.a.size() - 1])
    throw InvalidArgument("coefficients: periodic grid needs a[0] == a[n]");
}

/// A set of cells (the control region), with its Lebesgue measure h*|mask|.
class ControlRegion {
 public:
  ControlRegion() = default;
  ControlRegion(std::vector<std::uint8_t> mask, double h) : mask_(std::move(mask)), h_(h) {
    for (auto& m : mask_) m = m ? 1 : 0;
    for (std::size_t i = 0; i < mask_.size(); ++i)
      if (mask_[i]) cells_.push_back(i);
    measure_ = h_ * static_cast<double>(cells_.size());
  }

  std::size_t size() const noexcept { return mask_.size(); }
  bool contains(std::size_t i) const { return mask_.at(i) != 0; }
  bool empty() const noexcept { return cells_.empty(); }
  const std::vector<std::uint8_t>& mask() const noexcept { return mask_; }
  const std::vector<std::size_t>& cells() const noexcept { return cells_; }
  std::size_t cell_count() const noexcept { return cells_.size(); }
  double h() const noexcept { return h_; }
  double measure() const noexcept { return measure_; }

  std::string to_mask_string() const {
    std::string s;
    s.reserve(mask_.size());
    for (auto m : mask_) s.push_back(m ? '1' : '0');
    return s;
  }

  /// Longest run of consecutive selected cells.
  std::size_t longest_run() const {
    std::size_t best = 0, cur = 0;
    for (auto m : mask_) {
      cur = m ? cur + 1 : 0;
      best = std::max(best, cur);
    }
    return best;
  }

  friend bool operator==(const ControlRegion& a, const ControlRegion& b) {
    return a.mask_ == b.mask_ && a.h_ == b.h_;
  }

 private:
  std::vector<std::uint8_t> mask_;
  std::vector<std::size_t> cells_;
  double h_ = 0.0;
  double measure_ = 0.0;
};

inline ControlRegion region_from_mask(const Grid1D& grid, std::vector<std::uint8_t> mask) {
  if (mask.size() != grid.n)
    throw InvalidArgument("region mask has " + std::to_string(mask.size()) + " cells, grid has " +
                          std::to_string(grid.n));
  ControlRegion r(std::move(mask), grid.h);
  if (r.empty()) throw EmptyRegionError("control region selects no cell");
  return r;
}

/// Cells whose centers lie in the union of the open intervals.
inline ControlRegion region_from_intervals(const Grid1D& grid,
                                           const std::vector<std::pair<double, double>>& intervals) {
  std::vector<std::uint8_t> mask(grid.n, 0);
  for (const auto& [a, b] : intervals) {
    if (!(a < b)) throw InvalidArgument("region interval needs a < b");
    if (a < 0.0 || b > grid.length)
      throw InvalidArgument("region interval outside [0, length]");
    for (std::size_t i = 0; i < grid.n; ++i) {
      const double x = grid.centers[static_cast<Eigen::Index>(i)];
      if (x > a && x < b) mask[i] = 1;
    }
  }
  ControlRegion r(std::move(mask), grid.h);
  if (r.empty()) throw EmptyRegionError("no cell center inside the requested intervals");
  return r;
}

/// Parses "a1,b1;a2,b2;...".
inline std::vector<std::pair<double, double>> parse_interval_spec(const std::string& spec) {
  std::vector<std::pair<double, double>> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = item.find(',');
    if (comma == std::string::npos) throw InvalidArgument("bad interval '" + item + "'");
    try {
      std::size_t pa = 0, pb = 0;
      const std::string sa = item.substr(0, comma), sb = item.substr(comma + 1);
      const double a = std::stod(sa, &pa);
      const double b = std::stod(sb, &pb);
      if (sa.find_first_not_of(" \t", pa) != std::string::npos ||
          sb.find_first_not_of(" \t", pb) != std::string::npos)
        throw InvalidArgument("bad interval '" + item + "'");
      out.emplace_back(a, b);
    } catch (const std::logic_error&) {
      throw InvalidArgument("bad interval '" + item + "'");
    }
  }
  if (out.empty()) throw InvalidArgument("empty interval spec");
  return out;
}

inline ControlRegion parse_mask_string(const Grid1D& grid, const std::string& text) {
  std::string line = text;
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
  std::vector<std::uint8_t> mask;
  mask.reserve(line.size());
  for (char ch : line) {
    if (ch != '0' && ch != '1') throw InvalidArgument("mask file: unexpected character");
    mask.push_back(ch == '1' ? 1 : 0);
  }
  return region_from_mask(grid, std::move(mask));
}

/// Rasterized fat Cantor set. Level k removes a centered gap from each of the
/// 2^(k-1) current pieces; the level totals shrink geometrically (ratio 1/2)
/// and sum to length - target after `depth` levels. Gaps are whole cells, so
/// the achieved measure is within h/2 of the target. `seed` decides which
/// gaps receive the leftover cells of each level.
inline ControlRegion fat_cantor_region(const Grid1D& grid, double target_measure, int depth,
                                       std::uint64_t seed) {
  if (depth < 1) throw InvalidArgument("fat_cantor_region: depth must be >= 1");
  if (!(target_measure > 0.0) || target_measure > grid.length * (1.0 + 1e-12))
    throw InvalidArgument("fat_cantor_region: target must lie in (0, length]");
  if (target_measure < grid.h * (1.0 - 1e-12))
    throw ResolutionError("fat_cantor_region: target measure below one cell");

  const std::size_t n = grid.n;
  const auto removed_total =
      static_cast<long long>(std::llround((grid.length - target_measure) / grid.h));
  std::vector<std::uint8_t> mask(n, 1);
  if (removed_total <= 0) return ControlRegion(std::move(mask), grid.h);
  if (depth > 40 || removed_total < (1LL << depth) - 1)
    throw ResolutionError("fat_cantor_region: depth " + std::to_string(depth) + " needs at least " +
                          std::to_string((1LL << std::min(depth, 40)) - 1) + " removed cells at n=" +
                          std::to_string(grid.n));

  struct Piece {
    std::size_t begin, end;
  };
  std::vector<Piece> pieces{{0, n}};
  std::mt19937_64 rng(seed);
  const double q = 0.5;
  const double norm = 1.0 - std::pow(q, depth);
  long long removed_so_far = 0;

  for (int level = 1; level <= depth; ++level) {
    const double ideal = static_cast<double>(removed_total) * (1.0 - std::pow(q, level)) / norm;
    const std::size_t count = pieces.size();
    // every piece gets a gap of at least one cell, keeping enough for later levels
    const long long later = (1LL << depth) - (1LL << level);
    long long cumulative = level == depth ? removed_total : std::llround(ideal);
    cumulative = std::max(cumulative, removed_so_far + static_cast<long long>(count));
    cumulative = std::min(cumulative, removed_total - later);
    long long quota = cumulative - removed_so_far;
    std::vector<long long> gap(count, quota / static_cast<long long>(count));
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (long long r = 0; r < quota % static_cast<long long>(count); ++r) ++gap[order[r]];

    // Each gap must leave at least one cell on both sides; move overflow on.
    long long overflow = 0;
    for (std::size_t p = 0; p < count; ++p) {
      const auto len = static_cast<long long>(pieces[p].end - pieces[p].begin);
      const long long cap = std::max(0LL, len - 2);
      if (gap[p] > cap) {
        overflow += gap[p] - cap;
        gap[p] = cap;
      }
    }
    for (std::size_t idx = 0; idx < count && overflow > 0; ++idx) {
      const std::size_t p = order[idx];
      const auto len = static_cast<long long>(pieces[p].end - pieces[p].begin);
      const long long room = std::max(0LL, len - 2) - gap[p];
      const long long take = std::min(room, overflow);
      gap[p] += take;
      overflow -= take;
    }
    if (overflow > 0)
      throw ResolutionError("fat_cantor_region: level " + std::to_string(level) +
                            " gaps do not fit at n=" + std::to_string(n));

    std::vector<Piece> next;
    next.reserve(2 * count);
    for (std::size_t p = 0; p < count; ++p) {
      const std::size_t len = pieces[p].end - pieces[p].begin;
      const auto g = static_cast<std::size_t>(gap[p]);
      const std::size_t start = pieces[p].begin + (len - g) / 2;
      for (std::size_t i = start; i < start + g; ++i) mask[i] = 0;
      next.push_back({pieces[p].begin, start});
      next.push_back({start + g, pieces[p].end});
    }
    pieces = std::move(next);
    removed_so_far = cumulative;
  }
  ControlRegion r(std::move(mask), grid.h);
  if (r.empty()) throw ResolutionError("fat_cantor_region: nothing left after removal");
  return r;
}

}  // namespace simnull
