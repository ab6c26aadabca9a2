#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "spinqfi/harness.hpp"

using namespace spinqfi;

int main(int argc, char** argv) {
  CLI::App app{"XX-chain quantum metrology sweeps"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int workers = 0;
  std::uint64_t seed = 0;
  bool quiet = false;

  const char* names[] = {"qfi_map", "otoc_map", "decode_map", "hierarchy_series", "depletion", "rate_fit", "analytic_check"};
  for (const char* name : names) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
    sub->add_option("--config", config_path, "JSON run config")->required();
    sub->add_option("--out", out_dir, "output directory (overrides config)");
    sub->add_option("--workers", workers, "worker threads (overrides config)");
    sub->add_option("--seed", seed, "64-bit seed (overrides config)");
    sub->add_flag("--quiet", quiet, "suppress the unit count and summary lines");
  }
  CLI11_PARSE(app, argc, argv);

  const CLI::App* chosen = app.get_subcommands().front();
  const Experiment experiment = *parse_experiment(chosen->get_name());

  RunConfig config;
  try {
    config = load_config(config_path, experiment);
    if (chosen->count("--out")) config.output = out_dir;
    if (chosen->count("--workers")) config.workers = workers;
    if (chosen->count("--seed")) config.seed = seed;
    config.finalize();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (!quiet) std::cout << chosen->get_name() << ": " << grid_product(config).size() << " work units" << std::endl;
    const RunResult result = run(config);
    if (!quiet)
      std::cout << chosen->get_name() << ": " << result.failures.size()
                << " failed, " << result.files.size() << " files in " << config.output.string() << '\n';
    for (const auto& f : result.failures) std::cerr << "unit " << f.unit.index << ": " << f.message << '\n';
    return result.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
