#include <iostream>

#include <CLI11.hpp>

#include "cli_ops.hpp"

int main(int argc, char** argv) {
  using namespace cwish::cli;

  CLI::App app{
      "Correlated-Wishart toolkit: simulate grouped SPD-matrix data, fit the "
      "composite-likelihood EM classifier, score baselines, and extract "
      "region covariance descriptors from images."};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "Read options from an INI/TOML file; command-line flags "
                 "override file values");

  SimulateArgs sim;
  CLI::App* cmd_sim =
      app.add_subcommand("simulate", "Draw a synthetic dataset directory");
  cmd_sim->add_option("--n-obs", sim.n_obs, "Observation count T")
      ->capture_default_str();
  cmd_sim->add_option("--dim", sim.dim, "Matrix dimension p")
      ->capture_default_str();
  cmd_sim->add_option("--n-groups", sim.n_groups, "Group count K")
      ->capture_default_str();
  cmd_sim->add_option("--dof", sim.dof, "Degrees of freedom M (integer-valued)")
      ->capture_default_str();
  cmd_sim->add_option("--phi", sim.phi, "Correlation range")
      ->capture_default_str();
  cmd_sim->add_option("--weights", sim.weights,
                      "Group probabilities (default uniform)")
      ->delimiter(',');
  cmd_sim->add_option("--covariate-dim", sim.covariate_dim,
                      "Covariate dimension d")
      ->capture_default_str();
  cmd_sim->add_option("--seed", sim.seed, "Simulation seed")
      ->capture_default_str();
  cmd_sim->add_option("--train-draws", sim.train_draws,
                      "Training draws per group mean (0 disables "
                      "trained_means.csv)")
      ->capture_default_str();
  cmd_sim->add_option("--train-seed", sim.train_seed,
                      "Seed of the training draws (default: seed + 1)");
  cmd_sim->add_option("--out", sim.out_dir, "Output dataset directory")
      ->capture_default_str();

  FitArgs fitargs;
  CLI::App* cmd_fit_app = app.add_subcommand(
      "fit", "Composite-likelihood EM fit on a dataset directory");
  cmd_fit_app->add_option("--data", fitargs.data_dir, "Dataset directory")
      ->required();
  cmd_fit_app->add_option("--means", fitargs.means_path,
                          "Group-means CSV (default: trained_means.csv, then "
                          "means.csv, inside --data)");
  cmd_fit_app->add_option("--out", fitargs.out_dir, "Output directory")
      ->capture_default_str();
  cmd_fit_app->add_option("--lambda", fitargs.lambda, "Pair-weight decay")
      ->capture_default_str();
  cmd_fit_app->add_option("--u", fitargs.u, "Pair retention fraction")
      ->capture_default_str();
  cmd_fit_app->add_option("--plan-seed", fitargs.plan_seed,
                          "Pair retention seed")
      ->capture_default_str();
  cmd_fit_app->add_option("--tol", fitargs.tol, "EM relative tolerance")
      ->capture_default_str();
  cmd_fit_app->add_option("--max-iter", fitargs.max_iter, "EM iteration cap")
      ->capture_default_str();
  cmd_fit_app->add_option("--init-phi", fitargs.init_phi,
                          "Initial correlation range (default: median "
                          "pairwise distance)");
  cmd_fit_app->add_option("--init-dof", fitargs.init_dof,
                          "Initial degrees of freedom (default: p + 2)");
  cmd_fit_app->add_option("--init-weights", fitargs.init_weights,
                          "Initial group weights (default: uniform)")
      ->delimiter(',');
  cmd_fit_app->add_option("--max-weight", fitargs.max_weight,
                          "Series truncation order")
      ->capture_default_str();
  cmd_fit_app->add_option("--series-tol", fitargs.series_tol,
                          "Series relative tolerance")
      ->capture_default_str();

  ClassifyArgs cls;
  CLI::App* cmd_cls = app.add_subcommand(
      "classify", "Group-membership scores at fixed fitted parameters");
  cmd_cls->add_option("--data", cls.data_dir, "Dataset directory")->required();
  cmd_cls->add_option("--means", cls.means_path,
                      "Group-means CSV (same default as fit)");
  cmd_cls->add_option("--params", cls.params_path,
                      "fit.json holding the parameters")
      ->required();
  cmd_cls->add_option("--out", cls.out_dir, "Output directory")
      ->capture_default_str();
  cmd_cls->add_option("--lambda", cls.lambda, "Pair-weight decay")
      ->capture_default_str();
  cmd_cls->add_option("--u", cls.u, "Pair retention fraction")
      ->capture_default_str();
  cmd_cls->add_option("--plan-seed", cls.plan_seed, "Pair retention seed")
      ->capture_default_str();
  cmd_cls->add_option("--max-weight", cls.max_weight,
                      "Series truncation order")
      ->capture_default_str();
  cmd_cls->add_option("--series-tol", cls.series_tol,
                      "Series relative tolerance")
      ->capture_default_str();

  BenchmarkArgs bench;
  CLI::App* cmd_bench = app.add_subcommand(
      "benchmark", "Replicated synthetic comparison of all methods");
  cmd_bench->add_option("--replications", bench.replications,
                        "Replication count")
      ->capture_default_str();
  cmd_bench->add_option("--methods", bench.methods,
                        "Methods: em_hybrid, log_euclidean, kmeans_eigen, "
                        "gmm_eigen (default: all)")
      ->delimiter(',');
  cmd_bench->add_option("--lambdas", bench.lambdas,
                        "Pair-weight decays (default: 5*2^-5 .. 5)")
      ->delimiter(',');
  cmd_bench->add_option("--us", bench.us,
                        "Retention fractions (default: 0.2,0.4,0.6,0.8)")
      ->delimiter(',');
  cmd_bench->add_option("--n-obs", bench.n_obs, "Observation count T")
      ->capture_default_str();
  cmd_bench->add_option("--dim", bench.dim, "Matrix dimension p")
      ->capture_default_str();
  cmd_bench->add_option("--n-groups", bench.n_groups, "Group count K")
      ->capture_default_str();
  cmd_bench->add_option("--dof", bench.dof, "Degrees of freedom M")
      ->capture_default_str();
  cmd_bench->add_option("--phi", bench.phi, "Correlation range")
      ->capture_default_str();
  cmd_bench->add_option("--covariate-dim", bench.covariate_dim,
                        "Covariate dimension d")
      ->capture_default_str();
  cmd_bench->add_option("--train-draws", bench.train_draws,
                        "Training draws per group mean")
      ->capture_default_str();
  cmd_bench->add_option("--seed", bench.seed, "Master seed")
      ->capture_default_str();
  cmd_bench->add_option("--tol", bench.tol, "EM relative tolerance")
      ->capture_default_str();
  cmd_bench->add_option("--max-iter", bench.max_iter, "EM iteration cap")
      ->capture_default_str();
  cmd_bench->add_option("--max-weight", bench.max_weight,
                        "Series truncation order")
      ->capture_default_str();
  cmd_bench->add_option("--series-tol", bench.series_tol,
                        "Series relative tolerance")
      ->capture_default_str();
  cmd_bench->add_option("--jobs", bench.jobs,
                        "Worker threads over replications")
      ->capture_default_str();
  cmd_bench->add_option("--out", bench.out_csv, "Output CSV path")
      ->capture_default_str();
  cmd_bench->add_option("--manifest", bench.manifest_path,
                        "Manifest path (default: <out>.manifest.json)");

  RcdExtractArgs rcd;
  CLI::App* cmd_rcd = app.add_subcommand(
      "rcd-extract", "Region covariance descriptors from images");
  cmd_rcd->add_option("--images", rcd.images, "Image paths (.ppm or .csv)")
      ->required()
      ->delimiter(',');
  cmd_rcd->add_option("--masks", rcd.masks,
                      "Mask CSVs, one per image (optional)")
      ->delimiter(',');
  cmd_rcd->add_option("--out", rcd.out_dir, "Output directory")
      ->capture_default_str();
  cmd_rcd->add_option("--jobs", rcd.jobs, "Worker threads over images")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (cmd_sim->parsed()) return cmd_simulate(sim, std::cout);
  if (cmd_fit_app->parsed()) return cmd_fit(fitargs, std::cout);
  if (cmd_cls->parsed()) return cmd_classify(cls, std::cout);
  if (cmd_bench->parsed()) return cmd_benchmark(bench, std::cout);
  if (cmd_rcd->parsed()) return cmd_rcd_extract(rcd, std::cout);
  return kExitUsage;
}
