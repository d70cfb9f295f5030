#include <iostream>

#include <CLI11.hpp>
#include <omp.h>

#include "driftbench/commands.hpp"
#include "driftbench/common.hpp"
#include "driftbench/report.hpp"

int main(int argc, char** argv) {
  namespace cli = driftbench::cli;

  CLI::App app{"Synthetic drift / retraining / conformal benchmark"};
  app.set_version_flag("--version", driftbench::kVersion);
  app.require_subcommand(1);

  cli::CommandOptions opts;
  std::string out_dir;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config, "JSON experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("--jobs", opts.jobs, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
  };
  auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
  auto* run = app.add_subcommand("run", "replay one retraining policy");
  auto* grid = app.add_subcommand("grid", "replay a grid of policies");
  auto* pca = app.add_subcommand("pca", "PCA scores and block summaries of a dataset");
  for (auto* sub : {gen, run, grid, pca}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kConfigError;
  }

  try {
    opts.seed_override = cli::seed_from_env();
  } catch (const driftbench::report::ConfigError& ex) {
    std::cerr << driftbench::report::json{{"error", {{"kind", "config"}, {"field", ex.field()}, {"message", ex.what()}}}}.dump()
              << "\n";
    return cli::kConfigError;
  }
  if (!out_dir.empty()) opts.out = out_dir;
  if (opts.jobs > 0) omp_set_num_threads(opts.jobs);

  if (*gen) return cli::cmd_generate(opts, std::cout, std::cerr);
  if (*run) return cli::cmd_run(opts, std::cout, std::cerr);
  if (*grid) return cli::cmd_grid(opts, std::cout, std::cerr);
  return cli::cmd_pca(opts, std::cout, std::cerr);
}
