#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "aahbath/scenario.hpp"
#include "aahbath/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Quasiperiodic chain + common bosonic bath: bound states and dissipative dynamics"};
  app.set_version_flag("--version", std::string(aahbath::version));
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "execute a scenario config file");
  std::string config;
  std::vector<std::string> overrides;
  run->add_option("config", config, "path to a key=value config file")->required();
  run->add_option("--override", overrides, "key=value override (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const aahbath::Scenario sc = aahbath::load_scenario(config, overrides);
    aahbath::run_scenario(sc);
    return 0;
  } catch (const aahbath::domain_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const aahbath::numerical_error& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
