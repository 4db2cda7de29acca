#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "simnull/commands.hpp"

namespace {

using Command = int (*)(const simnull::ExperimentConfig&, std::ostream&);

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simultaneous Dirichlet/Neumann null control on the discrete double"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  app.add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--output-dir", output_dir, "Directory for output files");
  app.add_option("--seed", seed, "Seed for random initial data and region construction");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  struct Verb {
    const char* name;
    const char* help;
    Command run;
  };
  const Verb verbs[] = {
      {"double-check", "Check the reflection identities on the double", simnull::cmd_double_check},
      {"specineq", "Estimate spectral inequality constants over a cutoff sweep", simnull::cmd_specineq},
      {"control", "Synthesize one control for both heat equations and verify it", simnull::cmd_control},
      {"fatcantor", "Write a fat Cantor mask file", simnull::cmd_fatcantor},
      {"simulate", "Propagate initial data, optionally replaying a control file", simnull::cmd_simulate},
  };
  for (const auto& v : verbs) app.add_subcommand(v.name, v.help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : simnull::kExitConfig;
  }

  simnull::ExperimentConfig cfg;
  try {
    cfg = simnull::load_config(config_path);
    if (output_dir) cfg.output_dir = *output_dir;
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
  } catch (const simnull::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return simnull::kExitConfig;
  }

  for (const auto& v : verbs) {
    if (!app.got_subcommand(v.name)) continue;
    try {
      return v.run(cfg, std::cerr);
    } catch (const simnull::InvalidArgument& e) {
      std::cerr << v.name << ": " << e.what() << "\n";
      return simnull::kExitConfig;
    } catch (const simnull::NumericalError& e) {
      std::cerr << v.name << ": " << e.what() << "\n";
      return simnull::kExitInfeasible;
    } catch (const std::exception& e) {
      std::cerr << v.name << ": " << e.what() << "\n";
      return 1;
    }
  }
  return simnull::kExitConfig;
}
