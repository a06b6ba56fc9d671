#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "machlab/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"machlab: low Mach number flow past an obstacle"};
  app.require_subcommand(1);
  std::string config;
  std::string out = "out";
  int workers = 0;
  for (const char* name : {"build-frame", "solve", "sweep", "verify"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "config file")->required();
    sub->add_option("--out", out, "output directory");
    sub->add_option("--workers", workers, "worker threads (overrides the config)")->check(CLI::NonNegativeNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : machlab::exit_config;
  }
  return machlab::run_command(app.get_subcommands().front()->get_name(), config, out, workers);
}
