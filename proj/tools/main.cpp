#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bartpp/errors.hpp"
#include "bartpp/io.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> out;
};

bartpp::RunConfig resolve(const CliOptions& options) {
  bartpp::RunConfig config = bartpp::load_run_config(options.config_path);
  if (options.seed) config.sampler.seed = *options.seed;
  if (options.jobs) config.jobs = *options.jobs;
  if (options.out) config.out_dir = *options.out;
  return config;
}

void add_common_flags(CLI::App* cmd, CliOptions& options) {
  cmd->add_option("--config", options.config_path, "JSON run configuration")->required();
  cmd->add_option("--seed", options.seed, "override the config seed");
  cmd->add_option("--jobs", options.jobs, "cap on parallel chain workers");
  cmd->add_option("--out", options.out, "override the output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Poisson-process intensity estimation with multiplicative regression trees"};
  app.require_subcommand(1);

  CliOptions options;
  CLI::App* simulate = app.add_subcommand("simulate", "draw a synthetic realization by thinning");
  CLI::App* fit = app.add_subcommand("fit", "run the posterior sampler on a points file");
  CLI::App* diagnose = app.add_subcommand("diagnose", "summarize chain matrices");
  CLI::App* pipeline = app.add_subcommand("pipeline", "simulate, fit, and diagnose");
  for (CLI::App* cmd : {simulate, fit, diagnose, pipeline}) add_common_flags(cmd, options);

  CLI11_PARSE(app, argc, argv);

  try {
    const bartpp::RunConfig config = resolve(options);
    if (simulate->parsed()) bartpp::cmd_simulate(config);
    if (fit->parsed()) bartpp::cmd_fit(config);
    if (diagnose->parsed()) bartpp::cmd_diagnose(config);
    if (pipeline->parsed()) bartpp::cmd_pipeline(config);
  } catch (const bartpp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const bartpp::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const bartpp::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
