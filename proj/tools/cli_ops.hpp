#pragma once
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cwish::cli {

inline constexpr int kExitOk = 0;         // success
inline constexpr int kExitUsage = 1;      // usage / config / input error
inline constexpr int kExitNumerical = 2;  // numerical failure
inline constexpr int kExitPartial = 3;    // some batch items failed

/// `simulate`: draw one synthetic dataset and write the dataset directory
/// (matrices.csv, covariates.csv, labels.csv, means.csv), optionally a
/// trained_means.csv estimated from fresh training draws, and manifest.json.
struct SimulateArgs {
  int n_obs = 50;
  int dim = 3;
  int n_groups = 3;
  double dof = 5.0;
  double phi = 1.0;
  std::vector<double> weights;  // empty = uniform
  int covariate_dim = 10;
  std::uint64_t seed = 0;
  int train_draws = 10;  // 0 disables trained_means.csv
  std::optional<std::uint64_t> train_seed;  // default: seed + 1
  std::string out_dir = "dataset";
};

/// `fit`: composite-likelihood EM on a dataset directory. Group means come
/// from `means_path`; when empty, <data_dir>/trained_means.csv is preferred
/// and <data_dir>/means.csv is the fallback. Writes fit.json, labels.csv
/// and manifest.json (with wall-clock timing) into out_dir.
struct FitArgs {
  std::string data_dir;
  std::string means_path;
  std::string out_dir = "fit";
  double lambda = 1.25;
  double u = 0.4;
  std::uint64_t plan_seed = 0;
  double tol = 1e-6;
  int max_iter = 200;
  std::optional<double> init_phi;
  std::optional<double> init_dof;
  std::vector<double> init_weights;  // empty = uniform
  int max_weight = 60;     // series truncation order
  double series_tol = 1e-10;
};

/// `classify`: group-membership scores at fixed parameters, read from a
/// fit.json produced by `fit`. Writes labels.csv, scores.csv, manifest.json.
struct ClassifyArgs {
  std::string data_dir;
  std::string means_path;
  std::string params_path;  // fit.json
  std::string out_dir = "classify";
  double lambda = 1.25;
  double u = 0.4;
  std::uint64_t plan_seed = 0;
  int max_weight = 60;
  double series_tol = 1e-10;
};

/// `benchmark`: replicated synthetic study. Per replication: simulate,
/// estimate trained means, run each requested method, score against the
/// simulated truth. Emits a long-format CSV with the columns
/// replication,method,lambda,u,rand_index,wall_ms (lambda/u empty on
/// methods that do not use them) plus manifest.json. Per-replication
/// failures are recorded and the run continues.
struct BenchmarkArgs {
  int replications = 20;
  std::vector<std::string> methods;  // default: all four
  std::vector<double> lambdas;       // default: 5 * 2^-5 .. 5 * 2^0
  std::vector<double> us;            // default: 0.2, 0.4, 0.6, 0.8
  int n_obs = 50;
  int dim = 3;
  int n_groups = 3;
  double dof = 5.0;
  double phi = 1.0;
  int covariate_dim = 10;
  int train_draws = 10;
  std::uint64_t seed = 0;
  double tol = 1e-6;
  int max_iter = 200;
  int max_weight = 60;
  double series_tol = 1e-10;
  int jobs = 1;
  std::string out_csv = "benchmark.csv";
  std::string manifest_path;  // default: out_csv + ".manifest.json"
};

/// `rcd-extract`: region-covariance descriptors for a batch of images
/// (.ppm or .csv), with optional per-image masks. Writes one CSV per image
/// plus manifest.json recording each image's blue-channel normalizer.
/// Per-image failures are logged and the batch continues.
struct RcdExtractArgs {
  std::vector<std::string> images;
  std::vector<std::string> masks;  // empty, or one per image
  std::string out_dir = "descriptors";
  int jobs = 1;
};

int cmd_simulate(const SimulateArgs& args, std::ostream& log);
int cmd_fit(const FitArgs& args, std::ostream& log);
int cmd_classify(const ClassifyArgs& args, std::ostream& log);
int cmd_benchmark(const BenchmarkArgs& args, std::ostream& log);
int cmd_rcd_extract(const RcdExtractArgs& args, std::ostream& log);

}  // namespace cwish::cli
