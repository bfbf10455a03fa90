#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sdeabc/io.hpp"
#include "sdeabc/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Bayesian inference for SDE models: ABC-MCMC and particle MCMC"};
  app.set_version_flag("--version", sdeabc::software_version());
  app.require_subcommand(1);

  std::string config;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "Run the pipeline described by a config file");
  run->add_option("config", config, "INI configuration file")->required()->check(CLI::ExistingFile);
  run->add_option("--set", overrides, "Override a config value: section.key=value");

  std::uint64_t seed = 1;
  auto* verify = app.add_subcommand("verify", "Run the built-in numerical oracle checks");
  verify->add_option("--seed", seed, "Seed for the Monte Carlo checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? sdeabc::kExitOk : sdeabc::kExitConfig;
  }

  if (*run) return sdeabc::run_command(config, overrides, std::cout, std::cerr);
  return sdeabc::verify_command(std::cout, seed);
}
