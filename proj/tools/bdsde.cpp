#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bdsde/cli/commands.hpp"

int main(int argc, char** argv) {
  namespace bc = bdsde::cli;
  CLI::App app{"Stochastic Beddington-DeAngelis predator-prey toolkit"};
  app.set_version_flag("--version", std::string(bc::kToolVersion));
  app.require_subcommand(1);

  bc::RunOptions opt;
  std::uint64_t seed = 0;
  unsigned workers = 0;
  double eps = 0;
  std::string out_dir = "bdsde-out";

  for (const auto& name : bc::command_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", opt.config_path, "scenario file (YAML)")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--workers", workers, "worker threads (else BDSDE_WORKERS, else all cores)");
    sub->add_option("--eps-critical", eps, "half-width of the critical band around lambda = 0");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : bc::kExitConfig;
  }

  auto* sub = app.get_subcommands().front();
  if (sub->count("--seed")) opt.seed = seed;
  if (sub->count("--workers")) opt.workers = workers;
  if (sub->count("--eps-critical")) opt.eps_critical = eps;
  opt.out_dir = out_dir;
  return bc::run_command(sub->get_name(), opt, std::cout, std::cerr);
}
