#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "simnull/errors.hpp"
#include "simnull/grid.hpp"
#include "simnull/io.hpp"
#include "simnull/sim.hpp"

namespace simnull {

/// A coefficient given as a constant, as samples, or as c0 + c1 x.
struct CoefficientSpec {
  enum class Kind { Constant, Samples, Affine } kind = Kind::Constant;
  double c0 = 1.0;
  double c1 = 0.0;
  std::vector<double> samples;
};

struct RegionSpec {
  enum class Kind { Intervals, MaskFile, FatCantor } kind = Kind::Intervals;
  std::string intervals;          // "a,b;c,d"
  std::filesystem::path mask;     // resolved against the config directory
  double fat_measure = 0.0;
  int fat_depth = 0;
};

struct ExperimentConfig {
  std::size_t n = 0;
  double length = 1.0;
  CoefficientSpec kappa;
  CoefficientSpec a;
  RegionSpec region;
  double T = 1.0;
  ControlMethod method = ControlMethod::Hum;
  std::optional<double> lambda0;
  std::vector<double> lambda_sweep;
  int lambda_sweep_modes = 0;  // alternative: the first k Dirichlet frequencies
  std::uint64_t seed = 0;
  std::string initial = "random";  // random | zero | equal
  std::size_t steps = 64;
  double tol_hum = 1e-6;
  double tol_lr = 1e-4;
  double tol_double_check = 1e-9;
  double tol_extension = 1e-10;
  double tol_link = 1e-10;
  int link_samples = 100;
  std::filesystem::path control_file;  // simulate: replay a control.csv
  std::filesystem::path output_dir = "out";
  unsigned threads = 1;
  std::filesystem::path base_dir;  // directory of the config file
};

namespace detail {

inline CoefficientSpec parse_coefficient(const nlohmann::json& j, const std::string& name) {
  CoefficientSpec c;
  if (j.is_number()) {
    c.kind = CoefficientSpec::Kind::Constant;
    c.c0 = j.get<double>();
  } else if (j.is_array()) {
    c.kind = CoefficientSpec::Kind::Samples;
    c.samples = j.get<std::vector<double>>();
  } else if (j.is_object() && j.contains("affine")) {
    const auto v = j.at("affine").get<std::vector<double>>();
    if (v.size() != 2) throw InvalidArgument(name + ".affine needs [c0, c1]");
    c.kind = CoefficientSpec::Kind::Affine;
    c.c0 = v[0];
    c.c1 = v[1];
  } else {
    throw InvalidArgument(name + " must be a number, an array, or {\"affine\": [c0, c1]}");
  }
  return c;
}

inline nlohmann::json coefficient_json(const CoefficientSpec& c) {
  switch (c.kind) {
    case CoefficientSpec::Kind::Constant: return c.c0;
    case CoefficientSpec::Kind::Samples: return c.samples;
    case CoefficientSpec::Kind::Affine: return {{"affine", {c.c0, c.c1}}};
  }
  return nullptr;
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  static const std::vector<std::string> known{
      "n", "length", "coefficients", "region", "T", "method", "lambda0", "lambda_sweep",
      "lambda_sweep_modes", "seed", "initial", "steps", "tolerances", "link_samples",
      "control_file", "output_dir", "threads"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw InvalidArgument("unknown config key '" + key + "'");
  ExperimentConfig c;
  c.base_dir = base_dir;
  try {
    if (!j.contains("n")) throw InvalidArgument("config needs n");
    const auto n = j.at("n").get<long long>();
    if (n < 2) throw InvalidArgument("n must be >= 2, got " + std::to_string(n));
    c.n = static_cast<std::size_t>(n);
    c.length = detail::get_or(j, "length", 1.0);
    if (!(c.length > 0.0)) throw InvalidArgument("length must be positive");
    if (j.contains("coefficients")) {
      const auto& cj = j.at("coefficients");
      if (cj.contains("kappa")) c.kappa = detail::parse_coefficient(cj.at("kappa"), "coefficients.kappa");
      if (cj.contains("a")) c.a = detail::parse_coefficient(cj.at("a"), "coefficients.a");
    }
    if (j.contains("region")) {
      const auto& r = j.at("region");
      if (r.is_string()) {
        const auto s = r.get<std::string>();
        if (s.find(',') != std::string::npos) {
          c.region.kind = RegionSpec::Kind::Intervals;
          c.region.intervals = s;
        } else {
          c.region.kind = RegionSpec::Kind::MaskFile;
          c.region.mask = std::filesystem::path(s).is_absolute() ? std::filesystem::path(s) : base_dir / s;
        }
      } else if (r.is_object() && r.contains("fat_cantor")) {
        const auto& f = r.at("fat_cantor");
        c.region.kind = RegionSpec::Kind::FatCantor;
        c.region.fat_measure = f.at("measure").get<double>();
        c.region.fat_depth = f.at("depth").get<int>();
      } else {
        throw InvalidArgument("region must be an interval string, a mask path, or {\"fat_cantor\": {...}}");
      }
    } else {
      c.region.intervals = "0," + io::format_double(c.length);
    }
    c.T = detail::get_or(j, "T", 1.0);
    if (!(c.T > 0.0)) throw InvalidArgument("T must be positive");
    c.method = parse_control_method(detail::get_or<std::string>(j, "method", "hum"));
    if (j.contains("lambda0") && !j.at("lambda0").is_null()) {
      c.lambda0 = j.at("lambda0").get<double>();
      if (!(*c.lambda0 > 0.0)) throw InvalidArgument("lambda0 must be positive");
    }
    c.lambda_sweep = detail::get_or(j, "lambda_sweep", std::vector<double>{});
    c.lambda_sweep_modes = detail::get_or(j, "lambda_sweep_modes", 0);
    if (c.lambda_sweep_modes < 0) throw InvalidArgument("lambda_sweep_modes must be nonnegative");
    c.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
    c.initial = detail::get_or<std::string>(j, "initial", "random");
    if (c.initial != "random" && c.initial != "zero" && c.initial != "equal")
      throw InvalidArgument("initial must be random, zero or equal");
    const auto steps = detail::get_or<long long>(j, "steps", 64);
    if (steps < 1) throw InvalidArgument("steps must be positive");
    c.steps = static_cast<std::size_t>(steps);
    if (j.contains("tolerances")) {
      const auto& t = j.at("tolerances");
      for (const auto& [key, _] : t.items())
        if (key != "hum" && key != "lr" && key != "double_check" && key != "extension" && key != "link")
          throw InvalidArgument("unknown tolerance '" + key + "'");
      c.tol_hum = detail::get_or(t, "hum", c.tol_hum);
      c.tol_lr = detail::get_or(t, "lr", c.tol_lr);
      c.tol_double_check = detail::get_or(t, "double_check", c.tol_double_check);
      c.tol_extension = detail::get_or(t, "extension", c.tol_extension);
      c.tol_link = detail::get_or(t, "link", c.tol_link);
    }
    c.link_samples = detail::get_or(j, "link_samples", 100);
    if (j.contains("control_file")) {
      const std::filesystem::path p = j.at("control_file").get<std::string>();
      c.control_file = p.is_absolute() ? p : base_dir / p;
    }
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    const auto threads = detail::get_or<long long>(j, "threads", 1);
    if (threads < 1) throw InvalidArgument("threads must be positive");
    c.threads = static_cast<unsigned>(threads);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument("config " + path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

/// The config with every default filled in. Output location and thread count
/// are left out so that the same experiment gives the same document.
inline nlohmann::json resolved_config_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["n"] = c.n;
  j["length"] = c.length;
  j["coefficients"] = {{"kappa", detail::coefficient_json(c.kappa)}, {"a", detail::coefficient_json(c.a)}};
  switch (c.region.kind) {
    case RegionSpec::Kind::Intervals: j["region"] = c.region.intervals; break;
    case RegionSpec::Kind::MaskFile: j["region"] = c.region.mask.filename().string(); break;
    case RegionSpec::Kind::FatCantor:
      j["region"] = {{"fat_cantor", {{"measure", c.region.fat_measure}, {"depth", c.region.fat_depth}}}};
      break;
  }
  j["T"] = c.T;
  j["method"] = to_string(c.method);
  j["lambda0"] = c.lambda0 ? nlohmann::json(*c.lambda0) : nlohmann::json(nullptr);
  j["lambda_sweep"] = c.lambda_sweep;
  j["lambda_sweep_modes"] = c.lambda_sweep_modes;
  j["seed"] = c.seed;
  j["initial"] = c.initial;
  j["steps"] = c.steps;
  j["tolerances"] = {{"hum", c.tol_hum},
                     {"lr", c.tol_lr},
                     {"double_check", c.tol_double_check},
                     {"extension", c.tol_extension},
                     {"link", c.tol_link}};
  j["link_samples"] = c.link_samples;
  if (!c.control_file.empty()) j["control_file"] = c.control_file.filename().string();
  return j;
}

inline ScalarFunction to_function(const CoefficientSpec& c) {
  const double c0 = c.c0, c1 = c.c1;
  if (c.kind == CoefficientSpec::Kind::Affine) return [c0, c1](double x) { return c0 + c1 * x; };
  return [c0](double) { return c0; };
}

inline Grid1D make_grid(const ExperimentConfig& c) {
  if (c.kappa.kind == CoefficientSpec::Kind::Samples) {
    if (c.kappa.samples.size() != c.n)
      throw InvalidArgument("coefficients.kappa has " + std::to_string(c.kappa.samples.size()) +
                            " samples, need n = " + std::to_string(c.n));
    return make_grid_from_samples(c.length, Eigen::Map<const Field>(c.kappa.samples.data(),
                                                                    static_cast<Eigen::Index>(c.n)),
                                  false);
  }
  return make_uniform_grid(c.n, c.length, to_function(c.kappa));
}

inline Coefficients make_coefficients(const ExperimentConfig& c, const Grid1D& grid) {
  if (c.a.kind == CoefficientSpec::Kind::Samples) {
    if (c.a.samples.size() != c.n + 1)
      throw InvalidArgument("coefficients.a has " + std::to_string(c.a.samples.size()) +
                            " samples, need n + 1 = " + std::to_string(c.n + 1));
    Coefficients co{grid.kappa,
                    Eigen::Map<const Field>(c.a.samples.data(), static_cast<Eigen::Index>(c.n + 1))};
    validate_coefficients(grid, co);
    return co;
  }
  return make_coefficients(grid, to_function(c.a));
}

inline ControlRegion make_region(const ExperimentConfig& c, const Grid1D& grid) {
  switch (c.region.kind) {
    case RegionSpec::Kind::Intervals: return region_from_intervals(grid, parse_interval_spec(c.region.intervals));
    case RegionSpec::Kind::MaskFile: return io::read_mask(c.region.mask, grid);
    case RegionSpec::Kind::FatCantor:
      return fat_cantor_region(grid, c.region.fat_measure, c.region.fat_depth, c.seed);
  }
  throw InvalidArgument("bad region");
}

}  // namespace simnull
