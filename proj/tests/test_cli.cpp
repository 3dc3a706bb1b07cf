#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "cli_ops.hpp"
#include "cwish/io.hpp"
#include "cwish/rng.hpp"

using namespace cwish;
using namespace cwish::cli;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cwish_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::json manifest_of(const fs::path& dir) {
  return nlohmann::json::parse(slurp(dir / "manifest.json"));
}

SimulateArgs tiny_sim(const fs::path& out) {
  SimulateArgs args;
  args.n_obs = 10;
  args.dim = 2;
  args.n_groups = 2;
  args.dof = 4.0;
  args.covariate_dim = 3;
  args.seed = 5;
  args.train_draws = 3;
  args.out_dir = out.string();
  return args;
}

std::vector<std::vector<std::string>> parse_csv(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (line.empty() || line.back() == ',') fields.push_back("");
    rows.push_back(std::move(fields));
  }
  return rows;
}

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("simulate writes a reproducible dataset directory") {
  const fs::path a = fresh_dir("sim_a");
  const fs::path b = fresh_dir("sim_b");
  std::ostringstream log;
  REQUIRE(cmd_simulate(tiny_sim(a), log) == kExitOk);
  REQUIRE(cmd_simulate(tiny_sim(b), log) == kExitOk);

  for (const char* name :
       {"matrices.csv", "covariates.csv", "labels.csv", "means.csv",
        "trained_means.csv", "manifest.json"}) {
    CHECK(fs::exists(a / name));
  }
  CHECK(read_labels_csv((a / "labels.csv").string()).size() == 10);
  CHECK(read_spd_stack_csv((a / "trained_means.csv").string()).size() == 2);

  const nlohmann::json manifest = manifest_of(a);
  CHECK(manifest["command"] == "simulate");
  CHECK(manifest["seed"].get<std::uint64_t>() == 5);
  CHECK(manifest["config_hash"].get<std::string>().size() == 16);

  for (const char* name :
       {"matrices.csv", "covariates.csv", "labels.csv", "means.csv",
        "trained_means.csv"}) {
    CHECK(slurp(a / name) == slurp(b / name));
  }

  SimulateArgs no_train = tiny_sim(fresh_dir("sim_c"));
  no_train.train_draws = 0;
  REQUIRE(cmd_simulate(no_train, log) == kExitOk);
  CHECK(!fs::exists(fs::path(no_train.out_dir) / "trained_means.csv"));
}

TEST_CASE("fit writes parameters, labels, and a timing manifest") {
  const fs::path data = fresh_dir("fit_data");
  std::ostringstream log;
  REQUIRE(cmd_simulate(tiny_sim(data), log) == kExitOk);

  FitArgs args;
  args.data_dir = data.string();
  args.out_dir = fresh_dir("fit_a").string();
  args.lambda = 1.0;
  args.u = 0.5;
  args.plan_seed = 2;
  args.max_iter = 60;
  REQUIRE(cmd_fit(args, log) == kExitOk);

  const fs::path out(args.out_dir);
  REQUIRE(fs::exists(out / "fit.json"));
  const nlohmann::json fitdoc = nlohmann::json::parse(slurp(out / "fit.json"));
  CHECK(fitdoc["params"]["phi"].get<double>() > 0.0);
  CHECK(fitdoc["params"]["dof"].get<double>() > 1.0);
  CHECK(fitdoc["params"]["weights"].size() == 2);
  CHECK(fitdoc["composite_loglik_trace"].size() ==
        fitdoc["iterations"].get<std::size_t>());
  const std::vector<int> labels =
      read_labels_csv((out / "labels.csv").string());
  REQUIRE(labels.size() == 10);
  for (int l : labels) CHECK((l == 1 || l == 2));
  const nlohmann::json manifest = manifest_of(out);
  CHECK(manifest["command"] == "fit");
  CHECK(manifest["wall_ms"].get<double>() >= 0.0);
  CHECK(manifest.contains("converged"));

  // byte-identical model outputs on a rerun
  FitArgs again = args;
  again.out_dir = fresh_dir("fit_b").string();
  REQUIRE(cmd_fit(again, log) == kExitOk);
  CHECK(slurp(fs::path(again.out_dir) / "fit.json") ==
        slurp(out / "fit.json"));
  CHECK(slurp(fs::path(again.out_dir) / "labels.csv") ==
        slurp(out / "labels.csv"));
}

TEST_CASE("fit reports usage errors and numerical failures distinctly") {
  std::ostringstream log;
  FitArgs missing;
  missing.data_dir = (fs::temp_directory_path() / "cwish_cli_tests" /
                      "no_such_dataset")
                         .string();
  missing.out_dir = fresh_dir("fit_missing").string();
  CHECK(cmd_fit(missing, log) == kExitUsage);

  const fs::path data = fresh_dir("fit_data_num");
  REQUIRE(cmd_simulate(tiny_sim(data), log) == kExitOk);
  FitArgs cramped;
  cramped.data_dir = data.string();
  cramped.out_dir = fresh_dir("fit_num").string();
  cramped.u = 0.5;
  cramped.max_weight = 4;  // truncation far too low for the series
  cramped.init_phi = 50.0;
  CHECK(cmd_fit(cramped, log) == kExitNumerical);
}

TEST_CASE("fit with a single group labels everything together") {
  const fs::path data = fresh_dir("fit_single");
  std::ostringstream log;
  REQUIRE(cmd_simulate(tiny_sim(data), log) == kExitOk);
  const std::vector<SpdMatrix> means =
      read_spd_stack_csv((data / "means.csv").string());
  const fs::path one_mean = data / "one_mean.csv";
  write_spd_stack_csv(one_mean.string(), {means[0]});

  FitArgs args;
  args.data_dir = data.string();
  args.means_path = one_mean.string();
  args.out_dir = fresh_dir("fit_single_out").string();
  args.u = 0.5;
  // one covariate-near pair needs a deeper series than the default cap
  args.max_weight = 120;
  REQUIRE(cmd_fit(args, log) == kExitOk);
  const std::vector<int> labels =
      read_labels_csv((fs::path(args.out_dir) / "labels.csv").string());
  for (int l : labels) CHECK(l == 1);
}

TEST_CASE("classify reproduces the labels of the fit it loads") {
  const fs::path data = fresh_dir("cls_data");
  std::ostringstream log;
  REQUIRE(cmd_simulate(tiny_sim(data), log) == kExitOk);

  FitArgs fit_args;
  fit_args.data_dir = data.string();
  fit_args.out_dir = fresh_dir("cls_fit").string();
  fit_args.lambda = 1.0;
  fit_args.u = 0.5;
  fit_args.plan_seed = 9;
  REQUIRE(cmd_fit(fit_args, log) == kExitOk);

  ClassifyArgs cls;
  cls.data_dir = data.string();
  cls.params_path = (fs::path(fit_args.out_dir) / "fit.json").string();
  cls.out_dir = fresh_dir("cls_out").string();
  cls.lambda = 1.0;
  cls.u = 0.5;
  cls.plan_seed = 9;
  REQUIRE(cmd_classify(cls, log) == kExitOk);

  CHECK(slurp(fs::path(cls.out_dir) / "labels.csv") ==
        slurp(fs::path(fit_args.out_dir) / "labels.csv"));

  const auto scores = parse_csv(fs::path(cls.out_dir) / "scores.csv");
  REQUIRE(scores.size() == 10);
  double first_row = 0.0;
  for (const std::string& f : scores[0]) first_row += std::stod(f);
  CHECK(first_row == doctest::Approx(1.0).epsilon(1e-9));

  ClassifyArgs wrong = cls;
  const fs::path one_mean = data / "one_mean.csv";
  write_spd_stack_csv(
      one_mean.string(),
      {read_spd_stack_csv((data / "means.csv").string())[0]});
  wrong.means_path = one_mean.string();
  wrong.out_dir = fresh_dir("cls_bad").string();
  CHECK(cmd_classify(wrong, log) == kExitUsage);
}

TEST_CASE("benchmark writes the long csv with blank decay fields on baselines") {
  std::ostringstream log;
  BenchmarkArgs args;
  args.replications = 2;
  args.methods = {"log_euclidean"};
  args.n_obs = 10;
  args.dim = 2;
  args.n_groups = 2;
  args.dof = 4.0;
  args.covariate_dim = 3;
  args.train_draws = 2;
  args.seed = 77;
  args.out_csv = (fresh_dir("bench_le") / "out.csv").string();
  REQUIRE(cmd_benchmark(args, log) == kExitOk);

  const auto rows = parse_csv(args.out_csv);
  REQUIRE(rows.size() == 3);  // header + one row per replication
  CHECK(rows[0] == std::vector<std::string>{"replication", "method", "lambda",
                                            "u", "rand_index", "wall_ms"});
  for (int r = 1; r <= 2; ++r) {
    CHECK(rows[r][0] == std::to_string(r - 1));
    CHECK(rows[r][1] == "log_euclidean");
    CHECK(rows[r][2].empty());
    CHECK(rows[r][3].empty());
    const double ri = std::stod(rows[r][4]);
    CHECK(ri >= 0.0);
    CHECK(ri <= 1.0);
  }
  const nlohmann::json manifest =
      nlohmann::json::parse(slurp(args.out_csv + ".manifest.json"));
  CHECK(manifest["command"] == "benchmark");
  CHECK(manifest["rows"].get<int>() == 2);
  CHECK(manifest["failures"].empty());

  BenchmarkArgs bogus = args;
  bogus.methods = {"nearest_centroid"};
  CHECK(cmd_benchmark(bogus, log) == kExitUsage);
}

TEST_CASE("benchmark em cells carry their decay and retention settings") {
  std::ostringstream log;
  BenchmarkArgs args;
  args.replications = 1;
  args.methods = {"em_hybrid"};
  args.lambdas = {1.0};
  args.us = {0.5};
  args.n_obs = 8;
  args.dim = 2;
  args.n_groups = 2;
  args.dof = 4.0;
  args.covariate_dim = 3;
  args.train_draws = 2;
  args.seed = 11;
  args.max_iter = 50;
  args.out_csv = (fresh_dir("bench_em") / "out.csv").string();
  REQUIRE(cmd_benchmark(args, log) == kExitOk);

  const auto rows = parse_csv(args.out_csv);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1][1] == "em_hybrid");
  CHECK(rows[1][2] == "1");
  CHECK(rows[1][3] == "0.5");
  const double ri = std::stod(rows[1][4]);
  CHECK(ri >= 0.0);
  CHECK(ri <= 1.0);
}

TEST_CASE("benchmark results do not depend on the worker count") {
  std::ostringstream log;
  BenchmarkArgs args;
  args.replications = 3;
  args.methods = {"log_euclidean", "kmeans_eigen"};
  args.n_obs = 10;
  args.dim = 2;
  args.n_groups = 2;
  args.dof = 4.0;
  args.covariate_dim = 3;
  args.train_draws = 2;
  args.seed = 13;
  args.out_csv = (fresh_dir("bench_j1") / "out.csv").string();
  REQUIRE(cmd_benchmark(args, log) == kExitOk);

  BenchmarkArgs threaded = args;
  threaded.jobs = 2;
  threaded.out_csv = (fresh_dir("bench_j2") / "out.csv").string();
  REQUIRE(cmd_benchmark(threaded, log) == kExitOk);

  const auto serial = parse_csv(args.out_csv);
  const auto parallel = parse_csv(threaded.out_csv);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t r = 0; r < serial.size(); ++r) {
    for (int c = 0; c < 5; ++c) {  // all columns except wall_ms
      CHECK(serial[r][c] == parallel[r][c]);
    }
  }
}

TEST_CASE("rcd-extract batches images and isolates failures") {
  const fs::path in_dir = fresh_dir("rcd_in");
  Rng rng(81);
  for (int i = 0; i < 2; ++i) {
    std::string bytes = "P6\n6 6\n255\n";
    for (int k = 0; k < 6 * 6 * 3; ++k) {
      bytes.push_back(static_cast<char>(rng.index(256)));
    }
    std::ofstream(in_dir / ("img" + std::to_string(i) + ".ppm"),
                  std::ios::binary)
        << bytes;
  }
  {
    std::ofstream csv(in_dir / "grid.csv", std::ios::binary);
    csv << "2,3\n";
    for (int y = 0; y < 3; ++y) {
      for (int x = 0; x < 6; ++x) csv << (x ? "," : "") << rng.uniform01();
      csv << "\n";
    }
  }

  RcdExtractArgs args;
  args.images = {(in_dir / "img0.ppm").string(), (in_dir / "img1.ppm").string(),
                 (in_dir / "grid.csv").string()};
  args.out_dir = fresh_dir("rcd_out").string();
  std::ostringstream log;
  REQUIRE(cmd_rcd_extract(args, log) == kExitOk);
  for (const char* name : {"img0.rcd.csv", "img1.rcd.csv", "grid.rcd.csv"}) {
    CHECK(fs::exists(fs::path(args.out_dir) / name));
  }
  const SpdMatrix rcd =
      read_spd_stack_csv((fs::path(args.out_dir) / "img0.rcd.csv").string())
          .at(0);
  REQUIRE(rcd.dim() == 3);
  CHECK(std::abs(rcd.mat()(2, 2) - 1.0) <= 1e-10);
  const nlohmann::json manifest = manifest_of(args.out_dir);
  REQUIRE(manifest["descriptors"].size() == 3);
  for (const auto& d : manifest["descriptors"]) {
    CHECK(d["blue_sd"].get<double>() > 0.0);
  }

  std::ofstream(in_dir / "broken.ppm", std::ios::binary) << "P9 nonsense";
  RcdExtractArgs partial = args;
  partial.images.push_back((in_dir / "broken.ppm").string());
  partial.out_dir = fresh_dir("rcd_partial").string();
  REQUIRE(cmd_rcd_extract(partial, log) == kExitPartial);
  CHECK(fs::exists(fs::path(partial.out_dir) / "img1.rcd.csv"));
  CHECK(manifest_of(partial.out_dir)["failures"].size() == 1);

  RcdExtractArgs dup = args;
  const fs::path other = fresh_dir("rcd_dup");
  fs::copy_file(in_dir / "img0.ppm", other / "img0.ppm");
  dup.images = {(in_dir / "img0.ppm").string(), (other / "img0.ppm").string()};
  dup.out_dir = fresh_dir("rcd_dup_out").string();
  CHECK(cmd_rcd_extract(dup, log) == kExitUsage);

  RcdExtractArgs mismatched = args;
  mismatched.masks = {"only_one.csv"};
  mismatched.out_dir = fresh_dir("rcd_mask_out").string();
  CHECK(cmd_rcd_extract(mismatched, log) == kExitUsage);
}

TEST_CASE("command binary honors config files with flag precedence") {
  if (!fs::exists("cwish")) {
    MESSAGE("cwish binary not in working directory; skipping process checks");
    return;
  }
  CHECK(run_command("./cwish --help > /dev/null 2>&1") == kExitOk);
  CHECK(run_command("./cwish transmogrify > /dev/null 2>&1") == kExitUsage);
  CHECK(run_command("./cwish fit > /dev/null 2>&1") == kExitUsage);

  const fs::path dir = fresh_dir("binary");
  const fs::path cfg = dir / "run.ini";
  std::ofstream(cfg) << "[simulate]\n"
                     << "n-obs=6\n"
                     << "dim=2\n"
                     << "n-groups=2\n"
                     << "dof=4\n"
                     << "covariate-dim=3\n"
                     << "seed=7\n"
                     << "train-draws=0\n";
  const fs::path out = dir / "dataset";
  const std::string cmd = "./cwish --config " + cfg.string() + " simulate --seed 99 --out " +
                          out.string() + " > /dev/null 2>&1";
  REQUIRE(run_command(cmd) == kExitOk);
  CHECK(read_labels_csv((out / "labels.csv").string()).size() == 6);
  CHECK(manifest_of(out)["seed"].get<std::uint64_t>() == 99);
}

}  // TEST_SUITE
