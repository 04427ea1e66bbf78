#include "pqlap/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Galerkin solver and certificates for the competing (p,q)-Laplacian"};
  app.require_subcommand(1);

  pqlap::CommandOptions opts;
  opts.log = &std::cerr;
  std::uint64_t seed = 0;

  auto add = [&](const std::string& name, const std::string& help) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->add_option("--config", opts.config_path, "run configuration (JSON)")->required();
    cmd->add_option("--out", opts.out_dir, "output directory")->required();
    cmd->add_option("--seed", seed, "seed for every sampled quantity (overrides estimates.seed)");
    return cmd;
  };
  auto* estimate = add("estimate", "a priori constants and the hypothesis audit");
  auto* solve = add("solve", "nested Galerkin hierarchy with condition tables");
  auto* verify = add("verify", "reload solutions and append certificates to the report");
  verify->add_option("--report", opts.report_path, "report to verify (default <out>/report.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return e.get_exit_code() == 0 ? app.exit(e) : (app.exit(e), pqlap::exit_parse);
  }
  for (auto* cmd : {estimate, solve, verify})
    if (cmd->parsed() && cmd->count("--seed")) opts.seed = seed;

  if (estimate->parsed()) return pqlap::cmd_estimate(opts);
  if (solve->parsed()) return pqlap::cmd_solve(opts);
  return pqlap::cmd_verify(opts);
}
