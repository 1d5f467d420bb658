// Batch front end: lsvar --config run.json [--output DIR] [--jobs N] [--seed N]

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "lsvar/app.hpp"

int main(int argc, char** argv) {
  CLI::App cli{"Simulate and estimate locally stationary VAR(1) processes"};
  cli.set_version_flag("--version", lsvar::app::kToolVersion);

  std::string config_path;
  std::optional<std::string> output;
  std::optional<unsigned> jobs;
  std::optional<std::uint64_t> seed;
  cli.add_option("--config", config_path, "JSON run configuration (or metadata.json of a previous run)")->required();
  cli.add_option("--output", output, "Output directory (overrides config)");
  cli.add_option("--jobs", jobs, "Worker threads for Monte Carlo replications")->check(CLI::PositiveNumber);
  cli.add_option("--seed", seed, "Base random seed (overrides config)");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : 2;
  }

  lsvar::app::RunConfig config;
  try {
    config = lsvar::app::load_config(config_path);
  } catch (const lsvar::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == lsvar::ErrorCode::IoError ? 1 : 2;
  }
  if (output) config.output = *output;
  if (jobs) config.jobs = *jobs;
  if (seed) config.seed = *seed;
  return lsvar::app::run(config, std::cerr);
}
