#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "mdc/commands.hpp"
#include "mdc/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multivariate security-margin forecasting with JDAN-NFN"};
  app.require_subcommand(1, 1);

  std::string config_path;
  mdc::cli::Overrides overrides;
  std::string coupling;

  for (const char* name : {"generate", "train", "forecast", "evaluate", "index", "grid-search"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "Run configuration JSON")->required();
    sub->add_option("--seed", overrides.seed, "Override the run seed");
    sub->add_option("--jobs", overrides.jobs, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--coupling", coupling, "JDAN coupling")->check(CLI::IsMember({"mixture", "paper-literal"}));
    sub->add_option("--mc", overrides.mc, "Monte-Carlo samples for the index cross-check");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  mdc::cli::RunConfig cfg;
  try {
    cfg = mdc::cli::load_run_config(config_path);
    if (!coupling.empty()) overrides.coupling = mdc::jdan::coupling_from_string(coupling);
    mdc::cli::apply_overrides(cfg, overrides);
  } catch (const mdc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  return mdc::cli::run_command(command, cfg, std::cout, std::cerr);
}
