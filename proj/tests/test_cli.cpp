#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "json.hpp"
#include "simnull/commands.hpp"

using namespace simnull;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("simnull_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const nlohmann::json& j) {
  const fs::path p = dir / "config.json";
  io::write_atomic(p, j.dump());
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SIMNULL_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(io::read_file(p)); }

}  // namespace

TEST(Io, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, (i % 40) - 20);
    EXPECT_EQ(io::parse_double(io::format_double(x)), x);
  }
  EXPECT_EQ(io::format_double(std::numeric_limits<double>::infinity()), "INF");
  EXPECT_EQ(io::format_double(-std::numeric_limits<double>::infinity()), "-INF");
  EXPECT_TRUE(std::isinf(io::parse_double("INF")));
  EXPECT_THROW(io::parse_double("1.5x"), InvalidArgument);
  EXPECT_EQ(io::json_number(std::numeric_limits<double>::infinity()), "INF");
}

TEST(Io, CsvAndMask) {
  io::CsvWriter w({"a", "b"});
  w.row({"1", "2"});
  const auto rows = io::parse_csv(w.str() + "\r\n3,4\r\n");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[2][1], "4");
  const fs::path d = scratch("mask");
  const Grid1D g = make_uniform_grid(6, 1.0, 1.0);
  const ControlRegion r = region_from_mask(g, {1, 0, 0, 1, 1, 0});
  io::write_mask(d / "m.txt", r);
  EXPECT_EQ(io::read_mask(d / "m.txt", g), r);
  EXPECT_FALSE(fs::exists(d / "m.txt.tmp"));
}

TEST(Config, DefaultsAndResolution) {
  const ExperimentConfig c = parse_config(nlohmann::json{{"n", 16}});
  EXPECT_EQ(c.n, 16u);
  EXPECT_EQ(c.method, ControlMethod::Hum);
  EXPECT_EQ(c.steps, 64u);
  EXPECT_EQ(c.initial, "random");
  const auto j = resolved_config_json(c);
  EXPECT_EQ(j["region"], "0,1");
  EXPECT_FALSE(j.contains("output_dir"));
  EXPECT_FALSE(j.contains("threads"));
  // resolving is idempotent
  EXPECT_EQ(resolved_config_json(parse_config(j)), j);
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse_config(nlohmann::json{{"n", 1}}), InvalidArgument);
  EXPECT_THROW(parse_config(nlohmann::json{{"n", 8}, {"bogus", 1}}), InvalidArgument);
  EXPECT_THROW(parse_config(nlohmann::json{{"n", 8}, {"method", "bang"}}), InvalidArgument);
  EXPECT_THROW(parse_config(nlohmann::json{{"n", 8}, {"T", 0}}), InvalidArgument);
  EXPECT_THROW(parse_config(nlohmann::json{{"n", 8}, {"tolerances", {{"nope", 1}}}}), InvalidArgument);
  EXPECT_THROW(parse_config(nlohmann::json{{"n", "eight"}}), InvalidArgument);
  EXPECT_THROW(parse_config(nlohmann::json::array()), InvalidArgument);
}

TEST(Config, CoefficientsAndRegions) {
  nlohmann::json j{{"n", 4},
                   {"coefficients", {{"kappa", {1.0, 2.0, 3.0, 4.0}}, {"a", {{"affine", {1.0, 0.5}}}}}},
                   {"region", {{"fat_cantor", {{"measure", 0.5}, {"depth", 1}}}}}};
  const ExperimentConfig c = parse_config(j);
  const Grid1D g = make_grid(c);
  EXPECT_DOUBLE_EQ(g.kappa[2], 3.0);
  const Coefficients co = make_coefficients(c, g);
  EXPECT_DOUBLE_EQ(co.a[4], 1.5);
  EXPECT_EQ(make_region(c, g).cell_count(), 2u);
  j["coefficients"]["kappa"] = {1.0, 2.0};
  EXPECT_THROW(make_grid(parse_config(j)), InvalidArgument);
  // a string without a comma names a mask file next to the config
  const ExperimentConfig m = parse_config(nlohmann::json{{"n", 4}, {"region", "mask.txt"}}, "/data");
  EXPECT_EQ(m.region.kind, RegionSpec::Kind::MaskFile);
  EXPECT_EQ(m.region.mask, fs::path("/data/mask.txt"));
}

TEST(Cli, ExitCodes) {
  const fs::path d = scratch("exit");
  EXPECT_EQ(run_cli("control --config " + write_config(d, {{"n", 1}}).string()), 2);
  EXPECT_EQ(run_cli("control --config " + write_config(d, {{"n", 8}, {"oops", true}}).string()), 2);
  EXPECT_EQ(run_cli("control --config " + (d / "missing.json").string()), 2);
  EXPECT_EQ(run_cli("--config " + write_config(d, {{"n", 8}}).string()), 2);  // no verb
  EXPECT_EQ(run_cli("control --config " + write_config(d, {{"n", 8}, {"region", "0.96,0.99"}}).string()), 2);
  // eight cells, one control cell, too few time steps for the sixteen modes
  const auto infeasible = write_config(d, {{"n", 8}, {"region", "0.0,0.125"}, {"steps", 2}});
  EXPECT_EQ(run_cli("control --config " + infeasible.string() + " --output-dir " + (d / "inf").string()), 3);
  EXPECT_TRUE(read_json(d / "inf" / "summary.json").contains("error"));
}

TEST(Cli, ControlWritesArtifacts) {
  const fs::path d = scratch("control");
  const auto cfg = write_config(d, {{"n", 16}, {"region", "0.2,0.5"}, {"seed", 3}, {"method", "lr"}});
  ASSERT_EQ(run_cli("control --config " + cfg.string() + " --output-dir " + (d / "out").string()), 0);
  for (const char* f : {"control.csv", "norms.csv", "summary.json", "lr_ledger.json"})
    EXPECT_TRUE(fs::exists(d / "out" / f)) << f;
  const auto s = read_json(d / "out" / "summary.json");
  EXPECT_EQ(s["within_tolerance"], true);
  EXPECT_EQ(s["config"]["method"], "lr");
  EXPECT_LE(s["final_u_l2"].get<double>(), 1e-4);

  // replaying the written control reproduces the final norms
  const auto sim = write_config(d, {{"n", 16}, {"seed", 3}, {"control_file", "out/control.csv"}});
  ASSERT_EQ(run_cli("simulate --config " + sim.string() + " --output-dir " + (d / "sim").string()), 0);
  const auto r = read_json(d / "sim" / "simulate.json");
  EXPECT_EQ(r["controlled"], true);
  EXPECT_NEAR(r["final_u_l2"].get<double>(), s["final_u_l2"].get<double>(), 1e-12);
  EXPECT_NEAR(r["final_v_l2"].get<double>(), s["final_v_l2"].get<double>(), 1e-12);
}

TEST(Cli, ZeroInitialDataNeedsNoControl) {
  const fs::path d = scratch("zero");
  const auto cfg = write_config(d, {{"n", 16}, {"region", "0.2,0.5"}, {"initial", "zero"}});
  ASSERT_EQ(run_cli("control --config " + cfg.string() + " --output-dir " + (d / "out").string()), 0);
  const auto s = read_json(d / "out" / "summary.json");
  EXPECT_EQ(s["control_cost"].get<double>(), 0.0);
  EXPECT_EQ(s["final_u_l2"].get<double>(), 0.0);
}

TEST(Cli, SeedOverrideChangesData) {
  const fs::path d = scratch("seed");
  const auto cfg = write_config(d, {{"n", 16}, {"region", "0.2,0.5"}, {"seed", 1}});
  ASSERT_EQ(run_cli("simulate --config " + cfg.string() + " --output-dir " + (d / "a").string()), 0);
  ASSERT_EQ(run_cli("simulate --config " + cfg.string() + " --seed 2 --output-dir " + (d / "b").string()), 0);
  const auto a = read_json(d / "a" / "simulate.json"), b = read_json(d / "b" / "simulate.json");
  EXPECT_NE(a["final_u_l2"], b["final_u_l2"]);
  EXPECT_EQ(b["config"]["seed"], 2);
  EXPECT_EQ(a["dissipative"], true);
}

TEST(Cli, DoubleCheckFatCantorSpecineq) {
  const fs::path d = scratch("misc");
  const auto dc = write_config(d, {{"n", 32}, {"coefficients", {{"kappa", {{"affine", {1.0, 0.5}}}}}}, {"link_samples", 20}});
  ASSERT_EQ(run_cli("double-check --config " + dc.string() + " --output-dir " + (d / "dc").string()), 0);
  const auto j = read_json(d / "dc" / "double_check.json");
  for (const char* k : {"spectrum_union", "extension_eigenvectors", "link_identity", "split_extend"})
    EXPECT_EQ(j[k]["pass"], true) << k;

  const auto fc = write_config(d, {{"n", 256}, {"region", {{"fat_cantor", {{"measure", 0.4}, {"depth", 4}}}}}});
  ASSERT_EQ(run_cli("fatcantor --config " + fc.string() + " --output-dir " + (d / "fc").string()), 0);
  const Grid1D g = make_uniform_grid(256, 1.0, 1.0);
  const ControlRegion r = io::read_mask(d / "fc" / "fatcantor_mask.txt", g);
  EXPECT_NEAR(r.measure(), 0.4, 4 * g.h);

  const auto sp = write_config(d, {{"n", 64}, {"region", "0.3,0.6"}, {"lambda_sweep_modes", 4}});
  ASSERT_EQ(run_cli("specineq --config " + sp.string() + " --output-dir " + (d / "sp").string()), 0);
  const auto rows = io::parse_csv(io::read_file(d / "sp" / "specineq.csv"));
  EXPECT_EQ(rows[0], (std::vector<std::string>{"family", "lambda", "mode_count", "region_measure", "method", "constant"}));
  EXPECT_GT(rows.size(), 12u);
  EXPECT_TRUE(read_json(d / "sp" / "specineq_fit.json")["fits"].contains("simultaneous"));

  // a region too thin for any cutoff: every estimate infinite
  const auto thin = write_config(d, {{"n", 64}, {"region", "0.3,0.31"}, {"lambda_sweep", {30.0, 40.0}}});
  EXPECT_EQ(run_cli("specineq --config " + thin.string() + " --output-dir " + (d / "thin").string()), 3);
}
