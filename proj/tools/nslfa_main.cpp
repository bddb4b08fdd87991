#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nslfa/cli.hpp"
#include "nslfa/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Nonlinear structured latent factor analysis"};
  app.set_version_flag("--version", nslfa::kLibraryVersion);
  app.require_subcommand(1);

  // check-q
  std::string design_path;
  auto* check = app.add_subcommand(
      "check-q", "Structural identifiability verdicts for a design matrix");
  check->add_option("design", design_path, "design matrix CSV (0/1 entries)")
      ->required();

  // fit
  nslfa::FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Fit the model to a data matrix");
  fit->add_option("data", fit_args.data_path, "data CSV (N rows, J columns)")
      ->required();
  fit->add_option("design", fit_args.design_path, "design matrix CSV")
      ->required();
  fit->add_option("--method", fit_args.method, "joint-map | iterative")
      ->default_val("joint-map");
  fit->add_option("--k", fit_args.k, "factor count (checked against design)");
  fit->add_option("--x-prior", fit_args.x_prior, "normal | uniform")
      ->default_val("normal");
  fit->add_option("--algorithm", fit_args.algorithm, "scg | gd")
      ->default_val("scg");
  fit->add_option("--seed", fit_args.seed, "random seed");
  fit->add_option("--links", fit_args.links_grid,
                  "emit link curves on this many grid points");
  fit->add_option("--out", fit_args.out_dir, "output directory")
      ->default_val(".");

  // simulate
  nslfa::SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Run a replication study");
  sim->add_option("scenario", sim_args.scenario,
                  "k2-scenario1 | k2-scenario2 | k3-scenario1 | "
                  "k3-scenario2 | k5-scenario1 | k5-scenario2")
      ->required();
  sim->add_option("--J", sim_args.j_list, "item counts (comma separated)")
      ->delimiter(',');
  sim->add_option("--reps", sim_args.reps, "replications per cell")
      ->default_val(20);
  sim->add_flag("--full", sim_args.full, "use 100 replications");
  sim->add_option("--methods", sim_args.methods,
                  "nslfa|nslfa-joint|nslfa-iterative|lfa|unconstrained")
      ->delimiter(',');
  sim->add_option("--seed", sim_args.seed, "random seed");
  sim->add_flag("--dump-replications", sim_args.dump_replications,
                "write per-replication metrics as JSON lines");
  sim->add_option("--out", sim_args.out_dir, "output directory")
      ->default_val(".");

  // oil
  nslfa::OilArgs oil_args;
  auto* oil = app.add_subcommand(
      "oil", "Varimax-derived design pipeline for labeled 12-feature data");
  oil->add_option("data", oil_args.data_path,
                  "feature CSV with a trailing label column")
      ->required();
  oil->add_option("--subsample", oil_args.subsample,
                  "subsample size (0: use all rows)")
      ->default_val(100);
  oil->add_option("--threshold", oil_args.threshold,
                  "varimax zeroing threshold (fraction of row max)")
      ->default_val(0.3);
  oil->add_option("--seed", oil_args.seed, "random seed");
  oil->add_flag("--standardize", oil_args.standardize,
                "z-score the feature columns first");
  oil->add_option("--out", oil_args.out_dir, "output directory")
      ->default_val(".");

  CLI11_PARSE(app, argc, argv);

  if (check->parsed()) {
    return nslfa::cmd_check_q(design_path, std::cout, std::cerr);
  }
  if (fit->parsed()) {
    return nslfa::cmd_fit(fit_args, std::cout, std::cerr);
  }
  if (sim->parsed()) {
    return nslfa::cmd_simulate(sim_args, std::cout, std::cerr);
  }
  if (oil->parsed()) {
    return nslfa::cmd_oil(oil_args, std::cout, std::cerr);
  }
  return nslfa::kExitError;
}
