#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "fpe/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Functional a posteriori error estimates for reaction-convection-diffusion problems"};
  app.require_subcommand(1);
  CLI::App* run = app.add_subcommand("run", "solve, certify and write study tables");
  std::string config;
  run->add_option("config", config, "flat key = value configuration file");
  // flag values override the file; they are applied in this order
  const char* flags[] = {"preset", "mode", "steps", "theta", "deg-v", "deg-flux", "deg-w", "mu",
                         "eps0",   "eps",  "switch", "out",  "gamma", "sweeps",   "step-cap",
                         "layer-resolution-factor", "stabilization", "reference-degree", "reference-extra"};
  std::map<std::string, std::string> values;
  for (const char* f : flags) run->add_option(std::string("--") + f, values[f]);
  std::vector<std::string> sets;
  run->add_option("--set", sets, "extra key=value settings, e.g. problem.rhs=1");
  CLI::App* list = app.add_subcommand("presets", "list the built-in problems");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return e.get_exit_code() == 0 ? app.exit(e) : (app.exit(e), 2);
  }
  if (list->parsed()) {
    for (const auto& n : fpe::preset_names()) std::cout << n << '\n';
    return 0;
  }
  fpe::RunConfig cfg;
  try {
    if (!config.empty()) fpe::read_config_file(config, cfg);
    for (const char* f : flags)
      if (run->count(std::string("--") + f)) fpe::apply_setting(cfg, f, values[f]);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw fpe::ConfigError("--set expects key=value, got '" + s + "'");
      fpe::apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
  } catch (const fpe::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return fpe::run(cfg, std::cout);
}
