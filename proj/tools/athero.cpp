#include "athero/commands.hpp"
#include "athero/config.hpp"
#include "athero/errors.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>

int main(int argc, char** argv) {
  using namespace athero::cli;

  CLI::App app{"Optimal control of a free-boundary plaque growth model"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::string> out_dir;
  app.add_option("--config", config_path, "sectioned key = value configuration file");
  app.add_option("--out", out_dir, "output directory (same as --run.out)");

  std::map<std::string, std::string> overrides;
  for (const ConfigKey& k : config_keys()) {
    auto* opt = app.add_option_function<std::string>(
        "--" + k.dotted(), [&overrides, name = k.dotted()](const std::string& v) { overrides[name] = v; },
        k.help);
    opt->group("Configuration keys");
  }

  const std::map<std::string, std::string> help{
      {"solve-direct", "fixed-point collocation + SQP over the control segments"},
      {"solve-indirect", "adjoint system + shooting with RK4 and bang-bang control"},
      {"compare", "both methods and their cross-method differences"},
      {"convergence", "self-convergence study against a reference grid"},
      {"sweep", "controlled vs uncontrolled radius for (L0, H0) pairs"},
      {"run", "solve-direct, solve-indirect or compare according to run.method"}};
  for (const std::string& name : command_names()) app.add_subcommand(name, help.at(name));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kInvalidInput;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_config(config_path);
    for (const auto& [key, value] : overrides) apply_override(cfg, key, value);
    if (out_dir) cfg.out = *out_dir;
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return write_error(out_dir.value_or(cfg.out), command, e);
  }
  return run_command(command, cfg, std::cout);
}
