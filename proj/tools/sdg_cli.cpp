// sdg: experiment runner for the game value solvers.
#include "sdg/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Lattice solvers and property suites for stochastic differential games"};
  app.require_subcommand(1);

  std::string config_path, output_override;
  auto* run = app.add_subcommand("run", "run the suites listed in a JSON config");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("-o,--output-dir", output_override, "overrides output_dir from the config");

  std::string results_path, golden_path;
  auto* golden = app.add_subcommand("golden-check", "compare results against a golden run");
  golden->add_option("results", results_path, "results directory or results.json")->required();
  golden->add_option("golden", golden_path, "golden directory or results.json")->required();

  app.add_subcommand("list-problems", "named problems");
  app.add_subcommand("list-suites", "suite identifiers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sdg::cli::kSchemaError;
  }

  if (*run) return sdg::cli::run(config_path, output_override, std::cout, std::cerr);
  if (*golden) return sdg::cli::golden_check(results_path, golden_path, std::cout, std::cerr);
  if (app.got_subcommand("list-problems")) return sdg::cli::list_problems(std::cout);
  return sdg::cli::list_suites(std::cout);
}
