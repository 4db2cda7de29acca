#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "simnull/config.hpp"
#include "simnull/control.hpp"
#include "simnull/doubling.hpp"
#include "simnull/io.hpp"
#include "simnull/sim.hpp"
#include "simnull/specineq.hpp"

namespace simnull {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitInfeasible = 3, kExitTolerance = 4 };

namespace detail {

struct CheckResult {
  bool pass = false;
  double max_residual = 0.0;
};

inline nlohmann::json check_json(const CheckResult& r) {
  return {{"pass", r.pass}, {"max_residual", io::json_number(r.max_residual)}};
}

}  // namespace detail

/// Largest relative gap between the sorted periodic spectrum and the sorted
/// union of the Dirichlet and Neumann spectra. A pair of exact zeros (the
/// constant mode on both sides) counts as agreement.
inline double spectrum_union_error(const EigenBasis& periodic, const EigenBasis& dirichlet,
                                   const EigenBasis& neumann) {
  std::vector<double> u(dirichlet.eigenvalues.begin(), dirichlet.eigenvalues.end());
  u.insert(u.end(), neumann.eigenvalues.begin(), neumann.eigenvalues.end());
  std::vector<double> p(periodic.eigenvalues.begin(), periodic.eigenvalues.end());
  if (u.size() != p.size()) return std::numeric_limits<double>::infinity();
  std::sort(u.begin(), u.end());
  std::sort(p.begin(), p.end());
  double err = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double den = std::max(std::abs(p[k]), std::abs(u[k]));
    if (den == 0.0) continue;
    err = std::max(err, std::abs(p[k] - u[k]) / den);
  }
  return err;
}

/// max_k ||A x_k - lam_k x_k||_w / (lam_max ||x_k||_w) over the extended modes.
inline double extension_residual(const DoubleDomain& dd, const ExtendedBasis& ext) {
  const double scale = std::max(1.0, ext.basis.eigenvalues.maxCoeff());
  double err = 0.0;
  for (Eigen::Index k = 0; k < ext.basis.size(); ++k) {
    const Field x = ext.basis.vectors.col(k);
    const Field r = dd.op.apply(x) - ext.basis.eigenvalues[k] * x;
    err = std::max(err, l2_norm(dd.doubled, r) / (scale * l2_norm(dd.doubled, x)));
  }
  return err;
}

inline double gram_deviation(const EigenBasis& b) {
  const Eigen::MatrixXd G = b.vectors.transpose() * b.grid.weights.asDiagonal() * b.vectors;
  return (G - Eigen::MatrixXd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
}

/// Projection of extend_pair(u, v) on the double with the extended basis,
/// compared on both copies against Pi^D u +- Pi^N v. Relative to the sup of
/// the inputs.
inline double link_identity_error(const HeatModel& m, const Field& u, const Field& v, double lambda) {
  const Field U = extend_pair(m.dd, u, v);
  const Field PU = project(m.ext.basis, make_cutoff(m.ext.basis, lambda), U);
  const Field pu = project(m.dirichlet, make_cutoff(m.dirichlet, lambda), u);
  const Field pv = project(m.neumann, make_cutoff(m.neumann, lambda), v);
  double err = 0.0;
  for (std::size_t i = 0; i < m.dd.n(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    err = std::max(err, std::abs(PU[static_cast<Eigen::Index>(m.dd.embed_plus[i])] - (pu[ii] + pv[ii])));
    err = std::max(err, std::abs(PU[static_cast<Eigen::Index>(m.dd.embed_minus[i])] - (-pu[ii] + pv[ii])));
  }
  return err / std::max({1.0, sup_norm(u), sup_norm(v)});
}

inline double split_extend_error(const DoubleDomain& dd, const Field& u, const Field& v) {
  const auto [su, sv] = split(dd, extend_pair(dd, u, v));
  return std::max((su - u).cwiseAbs().maxCoeff(), (sv - v).cwiseAbs().maxCoeff()) /
         std::max({1.0, sup_norm(u), sup_norm(v)});
}

inline HeatModel model_from_config(const ExperimentConfig& cfg) {
  const Grid1D grid = make_grid(cfg);
  return build_model(grid, make_coefficients(cfg, grid));
}

inline int cmd_double_check(const ExperimentConfig& cfg, std::ostream& log) {
  const HeatModel m = model_from_config(cfg);
  const EigenBasis periodic = eigendecompose(m.dd.op);

  detail::CheckResult spec;
  spec.max_residual = spectrum_union_error(periodic, m.dirichlet, m.neumann);
  spec.pass = spec.max_residual <= cfg.tol_double_check;

  detail::CheckResult ext;
  const double gram = gram_deviation(m.ext.basis);
  ext.max_residual = std::max(extension_residual(m.dd, m.ext), gram);
  ext.pass = ext.max_residual <= cfg.tol_extension;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> lam(0.0, 1.05 * m.ext.basis.max_frequency());
  detail::CheckResult link, se;
  for (int s = 0; s < cfg.link_samples; ++s) {
    const Field u = random_unit_field(m.grid, rng);
    const Field v = random_unit_field(m.grid, rng);
    link.max_residual = std::max(link.max_residual, link_identity_error(m, u, v, lam(rng)));
    se.max_residual = std::max(se.max_residual, split_extend_error(m.dd, u, v));
  }
  link.pass = link.max_residual <= cfg.tol_link;
  se.pass = se.max_residual <= 1e-15;

  nlohmann::json out;
  out["spectrum_union"] = detail::check_json(spec);
  out["extension_eigenvectors"] = detail::check_json(ext);
  out["extension_eigenvectors"]["gram_deviation"] = io::json_number(gram);
  out["link_identity"] = detail::check_json(link);
  out["split_extend"] = detail::check_json(se);
  out["config"] = resolved_config_json(cfg);
  io::write_json(cfg.output_dir / "double_check.json", out);

  const bool ok = spec.pass && ext.pass && link.pass && se.pass;
  log << "double-check n=" << cfg.n << ": spectrum_union " << io::format_double(spec.max_residual)
      << ", extension " << io::format_double(ext.max_residual) << ", link "
      << io::format_double(link.max_residual) << ", split " << io::format_double(se.max_residual)
      << (ok ? " -> pass\n" : " -> FAIL\n");
  return ok ? kExitOk : kExitTolerance;
}

inline std::vector<double> sweep_lambdas(const ExperimentConfig& cfg, const HeatModel& m) {
  std::vector<double> lams = cfg.lambda_sweep;
  if (lams.empty() && cfg.lambda_sweep_modes > 0) {
    const auto k = std::min<Eigen::Index>(cfg.lambda_sweep_modes, m.dirichlet.size());
    for (Eigen::Index i = 0; i < k; ++i) lams.push_back(m.dirichlet.frequencies[i]);
  }
  if (lams.empty()) throw InvalidArgument("specineq needs lambda_sweep or lambda_sweep_modes");
  for (double l : lams)
    if (!(l >= 0.0)) throw InvalidArgument("lambda_sweep entries must be nonnegative");
  return lams;
}

inline int cmd_specineq(const ExperimentConfig& cfg, std::ostream& log) {
  const HeatModel m = model_from_config(cfg);
  const ControlRegion region = make_region(cfg, m.grid);
  const std::vector<double> lams = sweep_lambdas(cfg, m);
  EstimateOptions eo;
  eo.threads = cfg.threads;

  io::CsvWriter csv({"family", "lambda", "mode_count", "region_measure", "method", "constant"});
  std::map<std::string, std::map<std::string, std::vector<SpectralConstantEstimate>>> finite;
  bool any_finite = false;
  const std::vector<std::string> families{"dirichlet", "neumann", "simultaneous"};
  for (double lam : lams) {
    for (const auto& fam : families) {
      for (EstimateMethod method : {EstimateMethod::ExactLp, EstimateMethod::SigmaMinL2}) {
        SpectralConstantEstimate e;
        if (fam == "simultaneous") {
          if (count_modes(m.ext.basis, lam) < 1) continue;
          e = simultaneous_constant(m.dd, m.ext, make_cutoff(m.ext.basis, lam), region, method, eo);
        } else {
          const EigenBasis& b = fam == "dirichlet" ? m.dirichlet : m.neumann;
          const SpectralCutoff c = make_cutoff(b, lam);
          if (c.count < 1) continue;
          e = method == EstimateMethod::ExactLp ? estimate_constant_lp(b, c, region, eo)
                                                : estimate_constant_l2(b, c, region, eo);
        }
        csv.row({fam, io::format_double(e.lambda), std::to_string(e.mode_count),
                 io::format_double(e.region_measure), to_string(e.method), io::format_double(e.constant)});
        if (e.finite()) {
          any_finite = true;
          finite[fam][to_string(method)].push_back(e);
        }
      }
    }
  }
  io::write_atomic(cfg.output_dir / "specineq.csv", csv.str());

  nlohmann::json fits = nlohmann::json::object();
  for (const auto& fam : families) {
    for (EstimateMethod method : {EstimateMethod::ExactLp, EstimateMethod::SigmaMinL2}) {
      const auto& rows = finite[fam][to_string(method)];
      nlohmann::json f = nullptr;
      try {
        if (rows.size() >= 3) {
          const ExponentialFit fit = fit_exponential(rows);
          f = {{"logC", fit.log_c}, {"slope", fit.slope}, {"residual", fit.residual}, {"points", rows.size()}};
        }
      } catch (const InvalidArgument&) {
        f = nullptr;  // e.g. repeated lambdas
      }
      fits[fam][to_string(method)] = f;
      if (!f.is_null())
        log << "specineq " << fam << " " << to_string(method) << ": slope "
            << io::format_double(f["slope"].get<double>()) << "\n";
    }
  }
  nlohmann::json out;
  out["fits"] = fits;
  out["config"] = resolved_config_json(cfg);
  io::write_json(cfg.output_dir / "specineq_fit.json", out);
  if (!any_finite) {
    log << "specineq: every estimate is infinite (region too small for these cutoffs)\n";
    return kExitInfeasible;
  }
  return kExitOk;
}

inline std::pair<Field, Field> initial_data(const ExperimentConfig& cfg, const Grid1D& grid) {
  const auto n = static_cast<Eigen::Index>(grid.n);
  if (cfg.initial == "zero") return {Field::Zero(n), Field::Zero(n)};
  std::mt19937_64 rng(cfg.seed);
  Field u0 = random_unit_field(grid, rng);
  if (cfg.initial == "equal") return {u0, u0};
  Field v0 = random_unit_field(grid, rng);
  return {u0, v0};
}

namespace detail {

inline std::string control_csv(const ControlSignal& s) {
  std::vector<std::string> header{"t"};
  for (auto c : s.region.cells()) header.push_back(std::to_string(c));
  io::CsvWriter csv(header);
  for (std::size_t m = 0; m <= s.steps(); ++m) {
    std::vector<std::string> row{io::format_double(s.timegrid[m])};
    for (Eigen::Index j = 0; j < s.values.cols(); ++j)
      row.push_back(io::format_double(m < s.steps() ? s.values(static_cast<Eigen::Index>(m), j) : 0.0));
    csv.row(row);
  }
  return csv.str();
}

inline void add_norm_rows(io::CsvWriter& csv, const std::string& name, const Trajectory& tr) {
  for (std::size_t m = 0; m < tr.nodes(); ++m)
    csv.row({name, io::format_double(tr.times[m]), io::format_double(tr.l2[m]), io::format_double(tr.sup[m])});
}

inline std::string norms_csv(const std::vector<std::pair<std::string, const Trajectory*>>& trs) {
  io::CsvWriter csv({"trajectory", "t", "l2", "sup"});
  for (const auto& [name, tr] : trs) add_norm_rows(csv, name, *tr);
  return csv.str();
}

inline nlohmann::json ledger_json(const std::vector<LRSliceRecord>& ledger) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : ledger)
    a.push_back({{"j", r.j},
                 {"lambda", r.lambda},
                 {"mode_count", r.mode_count},
                 {"active_cost", r.active_cost},
                 {"pre_norm", r.pre_norm},
                 {"low_norm_before", r.low_norm_before},
                 {"low_norm_after", r.low_norm_after},
                 {"post_norm", r.post_norm},
                 {"skipped", r.skipped}});
  return a;
}

}  // namespace detail

/// Reads a control.csv written by cmd_control back into a signal on the
/// doubled grid.
inline ControlSignal read_control_csv(const std::filesystem::path& path, const DoubleDomain& dd) {
  const auto rows = io::parse_csv(io::read_file(path));
  if (rows.size() < 2 || rows[0].empty() || rows[0][0] != "t")
    throw InvalidArgument("control file " + path.string() + ": expected a header starting with t");
  std::vector<std::uint8_t> mask(2 * dd.n(), 0);
  std::vector<std::size_t> cols;
  for (std::size_t c = 1; c < rows[0].size(); ++c) {
    const auto idx = static_cast<std::size_t>(std::stoull(rows[0][c]));
    if (idx >= mask.size()) throw InvalidArgument("control file: cell index out of range");
    if (c > 1 && idx <= cols.back()) throw InvalidArgument("control file: cell indices must increase");
    mask[idx] = 1;
    cols.push_back(idx);
  }
  if (cols.empty()) throw InvalidArgument("control file: no control cells");
  std::vector<double> times;
  Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size() - 2), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != cols.size() + 1) throw InvalidArgument("control file: ragged row");
    times.push_back(io::parse_double(rows[r][0]));
    if (r + 1 < rows.size())
      for (std::size_t c = 0; c < cols.size(); ++c)
        values(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c)) = io::parse_double(rows[r][c + 1]);
  }
  return make_signal(std::move(times), std::move(values), ControlRegion(std::move(mask), dd.doubled.h), dd.doubled);
}

inline nlohmann::json report_json(const SimultaneousReport& r, const ControlRegion& region) {
  nlohmann::json j;
  j["method"] = to_string(r.method);
  j["T"] = r.T;
  j["initial_u_l2"] = r.initial_u_l2;
  j["initial_v_l2"] = r.initial_v_l2;
  j["final_u_l2"] = io::json_number(r.final_u_l2);
  j["final_v_l2"] = io::json_number(r.final_v_l2);
  j["final_double_l2"] = io::json_number(r.final_double_l2);
  j["control_cost"] = io::json_number(r.control_cost);
  j["double_control_cost"] = io::json_number(r.double_control_cost);
  j["dirichlet_trace_residual"] = io::json_number(r.dirichlet_trace_residual);
  j["neumann_flux_residual"] = io::json_number(r.neumann_flux_residual);
  j["route_deviation"] = io::json_number(r.route_deviation);
  j["tolerance"] = r.tolerance;
  j["within_tolerance"] = r.within_tolerance;
  j["region_measure"] = region.measure();
  j["region_cells"] = region.cell_count();
  j["time_steps"] = r.signal.steps();
  if (r.lambda0) j["lambda0"] = *r.lambda0;
  if (!r.continuation.empty()) {
    nlohmann::json c = nlohmann::json::array();
    for (const auto& s : r.continuation)
      c.push_back({{"regularization", s.regularization}, {"cost", s.cost}, {"residual", s.residual}});
    j["continuation"] = c;
    j["min_norm_certified"] = r.min_norm_certified;
  }
  return j;
}

inline int cmd_control(const ExperimentConfig& cfg, std::ostream& log) {
  const HeatModel m = model_from_config(cfg);
  const ControlRegion region = make_region(cfg, m.grid);
  const auto [u0, v0] = initial_data(cfg, m.grid);
  SimulationOptions so;
  so.steps = cfg.steps;
  so.lambda0 = cfg.lambda0;
  so.hum_tolerance = cfg.tol_hum;
  so.lr_tolerance = cfg.tol_lr;

  SimultaneousReport rep;
  try {
    rep = run_simultaneous(m, u0, v0, region, cfg.T, cfg.method, so);
  } catch (const SingularGramianError& e) {
    log << "control: " << e.what() << "\n";
    nlohmann::json out;
    out["error"] = e.what();
    out["lambda"] = e.lambda();
    out["region_measure"] = e.region_measure();
    out["condition"] = io::json_number(e.condition());
    out["slice"] = e.slice();
    out["config"] = resolved_config_json(cfg);
    io::write_json(cfg.output_dir / "summary.json", out);
    return kExitInfeasible;
  } catch (const InfeasibleError& e) {
    log << "control: " << e.what() << "\n";
    nlohmann::json out;
    out["error"] = e.what();
    out["config"] = resolved_config_json(cfg);
    io::write_json(cfg.output_dir / "summary.json", out);
    return kExitInfeasible;
  }

  io::write_atomic(cfg.output_dir / "control.csv", detail::control_csv(rep.double_signal));
  io::write_atomic(cfg.output_dir / "norms.csv",
                   detail::norms_csv({{"dirichlet", &rep.dirichlet},
                                      {"neumann", &rep.neumann},
                                      {"double", &rep.doubled}}));
  nlohmann::json out = report_json(rep, region);
  out["n"] = cfg.n;
  out["seed"] = cfg.seed;
  out["config"] = resolved_config_json(cfg);
  io::write_json(cfg.output_dir / "summary.json", out);
  if (cfg.method == ControlMethod::LR) {
    nlohmann::json l;
    l["slices"] = detail::ledger_json(rep.lr_ledger);
    l["lambda0"] = rep.lambda0 ? nlohmann::json(*rep.lambda0) : nlohmann::json(nullptr);
    io::write_json(cfg.output_dir / "lr_ledger.json", l);
  }
  log << "control " << to_string(cfg.method) << " n=" << cfg.n << ": |u(T)|=" << io::format_double(rep.final_u_l2)
      << " |v(T)|=" << io::format_double(rep.final_v_l2) << " cost=" << io::format_double(rep.control_cost)
      << (rep.within_tolerance ? " -> pass\n" : " -> tolerance miss\n");
  return rep.within_tolerance ? kExitOk : kExitTolerance;
}

inline int cmd_fatcantor(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.region.kind != RegionSpec::Kind::FatCantor)
    throw InvalidArgument("fatcantor needs region {\"fat_cantor\": {\"measure\": m, \"depth\": d}}");
  const Grid1D grid = make_grid(cfg);
  const ControlRegion r = make_region(cfg, grid);
  io::write_mask(cfg.output_dir / "fatcantor_mask.txt", r);
  log << "fatcantor: achieved measure " << io::format_double(r.measure()) << " (target "
      << io::format_double(cfg.region.fat_measure) << "), " << r.cell_count() << " cells, longest run "
      << r.longest_run() << "\n";
  return kExitOk;
}

/// Propagates (u0, v0) and their extension to T, with no control or with the
/// control read from `control_file`, and checks that the split double run
/// matches the two direct runs.
inline int cmd_simulate(const ExperimentConfig& cfg, std::ostream& log) {
  const HeatModel m = model_from_config(cfg);
  const auto [u0, v0] = initial_data(cfg, m.grid);
  const Field U0 = extend_pair(m.dd, u0, v0);
  std::optional<ControlSignal> dsig, bsig;
  if (!cfg.control_file.empty()) {
    dsig = read_control_csv(cfg.control_file, m.dd);
    std::vector<std::uint8_t> mask(m.grid.n, 0);
    for (auto c : dsig->region.cells()) {
      if (c >= m.grid.n) throw InvalidArgument("simulate: control reaches the minus copy");
      mask[c] = 1;
    }
    bsig = make_signal(dsig->timegrid, 0.5 * dsig->values, ControlRegion(std::move(mask), m.grid.h), m.grid);
  }
  const Trajectory du = propagate(m.dirichlet, u0, bsig ? &*bsig : nullptr, cfg.T);
  const Trajectory nv = propagate(m.neumann, v0, bsig ? &*bsig : nullptr, cfg.T);
  const Trajectory dbl = propagate(m.ext.basis, U0, dsig ? &*dsig : nullptr, cfg.T);
  auto [su, sv] = split_trajectory(m.dd, dbl);
  double dev = 0.0;
  const double scale = std::max({1.0, sup_norm(u0), sup_norm(v0)});
  for (std::size_t k = 0; k < su.nodes(); ++k)
    dev = std::max({dev, (su.state(k) - du.state(k)).cwiseAbs().maxCoeff() / scale,
                    (sv.state(k) - nv.state(k)).cwiseAbs().maxCoeff() / scale});
  bool dissipative = true;
  if (!dsig)
    for (const Trajectory* t : {&du, &nv, &dbl})
      for (std::size_t k = 1; k < t->nodes(); ++k)
        if (t->l2[k] > t->l2[k - 1] * (1.0 + 1e-12)) dissipative = false;

  io::write_atomic(cfg.output_dir / "norms.csv",
                   detail::norms_csv({{"dirichlet", &du}, {"neumann", &nv}, {"double", &dbl}}));
  nlohmann::json out;
  out["controlled"] = dsig.has_value();
  out["final_u_l2"] = du.l2.back();
  out["final_v_l2"] = nv.l2.back();
  out["final_double_l2"] = dbl.l2.back();
  out["route_deviation"] = dev;
  out["dirichlet_trace_residual"] = check_boundary_conditions(su).dirichlet_trace;
  out["neumann_flux_residual"] = check_boundary_conditions(sv).neumann_flux;
  if (!dsig) out["dissipative"] = dissipative;
  out["config"] = resolved_config_json(cfg);
  io::write_json(cfg.output_dir / "simulate.json", out);
  log << "simulate n=" << cfg.n << ": |u(T)|=" << io::format_double(du.l2.back())
      << " |v(T)|=" << io::format_double(nv.l2.back()) << " route deviation " << io::format_double(dev) << "\n";
  const bool ok = dev <= 1e-10 && dissipative;
  return ok ? kExitOk : kExitTolerance;
}

}  // namespace simnull
