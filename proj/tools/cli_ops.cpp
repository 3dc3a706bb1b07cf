#include "cli_ops.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cwish/baselines.hpp"
#include "cwish/em.hpp"
#include "cwish/errors.hpp"
#include "cwish/io.hpp"
#include "cwish/rcd.hpp"
#include "cwish/rng.hpp"
#include "cwish/sim.hpp"

namespace cwish::cli {

namespace {

namespace fsys = std::filesystem;
using nlohmann::json;

int exit_code_for(const std::exception& e) {
  // Input/configuration problems exit 1; the numerical error family exits 2.
  if (dynamic_cast<const IoError*>(&e) != nullptr ||
      dynamic_cast<const DomainError*>(&e) != nullptr ||
      dynamic_cast<const DimensionMismatch*>(&e) != nullptr ||
      dynamic_cast<const LengthMismatch*>(&e) != nullptr ||
      dynamic_cast<const EmptyPlan*>(&e) != nullptr ||
      dynamic_cast<const MaskTooSmall*>(&e) != nullptr) {
    return kExitUsage;
  }
  if (dynamic_cast<const Error*>(&e) != nullptr) return kExitNumerical;
  return kExitUsage;
}

template <typename F>
int run_guarded(std::ostream& log, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

void write_manifest(const std::string& path, const std::string& command,
                    std::uint64_t seed, const std::string& config_text,
                    json extra = json::object()) {
  json j = std::move(extra);
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = config_text;
  j["config_hash"] = hash_hex(fnv1a64(config_text));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << j.dump(2) << '\n';
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) s += ';';
    s += format_double(v[i]);
  }
  return s;
}

std::string join_strings(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) s += ';';
    s += v[i];
  }
  return s;
}

long long elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now() - start)
      .count();
}

std::vector<double> uniform_weights(int k) {
  return std::vector<double>(k, 1.0 / k);
}

// ---------------------------------------------------------------- simulate

SimConfig sim_config_from(const SimulateArgs& a) {
  SimConfig cfg;
  cfg.n_obs = a.n_obs;
  cfg.dim = a.dim;
  cfg.n_groups = a.n_groups;
  cfg.dof = a.dof;
  cfg.phi = a.phi;
  cfg.weights = a.weights.empty() ? uniform_weights(a.n_groups) : a.weights;
  cfg.covariate_dim = a.covariate_dim;
  cfg.seed = a.seed;
  return cfg;
}

std::string simulate_config_text(const SimulateArgs& a, const SimConfig& cfg,
                                 std::uint64_t train_seed) {
  std::ostringstream os;
  os << "simulate n_obs=" << cfg.n_obs << " dim=" << cfg.dim
     << " n_groups=" << cfg.n_groups << " dof=" << format_double(cfg.dof)
     << " phi=" << format_double(cfg.phi)
     << " weights=" << join_doubles(cfg.weights)
     << " covariate_dim=" << cfg.covariate_dim << " seed=" << cfg.seed
     << " train_draws=" << a.train_draws << " train_seed=" << train_seed;
  return os.str();
}

// --------------------------------------------------------------------- fit

std::string resolve_means_path(const std::string& means_path,
                               const std::string& data_dir) {
  if (!means_path.empty()) return means_path;
  const fsys::path trained = fsys::path(data_dir) / "trained_means.csv";
  if (fsys::exists(trained)) return trained.string();
  const fsys::path plain = fsys::path(data_dir) / "means.csv";
  if (fsys::exists(plain)) return plain.string();
  throw IoError(data_dir +
                ": neither trained_means.csv nor means.csv found; "
                "pass a means file explicitly");
}

std::string fit_config_text(const FitArgs& a, const std::string& means_path) {
  std::ostringstream os;
  os << "fit data_dir=" << a.data_dir << " means=" << means_path
     << " lambda=" << format_double(a.lambda) << " u=" << format_double(a.u)
     << " plan_seed=" << a.plan_seed << " tol=" << format_double(a.tol)
     << " max_iter=" << a.max_iter
     << " max_weight=" << a.max_weight
     << " series_tol=" << format_double(a.series_tol);
  if (a.init_phi) os << " init_phi=" << format_double(*a.init_phi);
  if (a.init_dof) os << " init_dof=" << format_double(*a.init_dof);
  if (!a.init_weights.empty()) {
    os << " init_weights=" << join_doubles(a.init_weights);
  }
  return os.str();
}

// ---------------------------------------------------------------- classify

ModelParams read_params_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  ModelParams params;
  try {
    const json j = json::parse(in);
    const json& p = j.at("params");
    params.dof = p.at("dof").get<double>();
    params.phi = p.at("phi").get<double>();
    params.weights = p.at("weights").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  return params;
}

void write_scores_csv(const std::string& path, const Eigen::MatrixXd& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  for (int i = 0; i < g.rows(); ++i) {
    for (int j = 0; j < g.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(g(i, j));
    }
    out << '\n';
  }
}

// --------------------------------------------------------------- benchmark

const std::vector<std::string> kAllMethods = {
    "em_hybrid", "log_euclidean", "kmeans_eigen", "gmm_eigen"};

struct BenchRow {
  int replication = 0;
  std::string method;
  std::optional<double> lambda;
  std::optional<double> u;
  double rand_index = 0.0;
  long long wall_ms = 0;
};

struct RepOutcome {
  std::vector<BenchRow> rows;
  std::vector<std::string> failures;
};

std::vector<double> default_lambdas() {
  std::vector<double> v;
  for (int e = -5; e <= 0; ++e) v.push_back(5.0 * std::pow(2.0, e));
  return v;
}

BenchmarkArgs with_defaults(BenchmarkArgs a) {
  if (a.methods.empty()) a.methods = kAllMethods;
  if (a.lambdas.empty()) a.lambdas = default_lambdas();
  if (a.us.empty()) a.us = {0.2, 0.4, 0.6, 0.8};
  return a;
}

std::string benchmark_config_text(const BenchmarkArgs& a) {
  std::ostringstream os;
  os << "benchmark replications=" << a.replications
     << " methods=" << join_strings(a.methods)
     << " lambdas=" << join_doubles(a.lambdas)
     << " us=" << join_doubles(a.us) << " n_obs=" << a.n_obs
     << " dim=" << a.dim << " n_groups=" << a.n_groups
     << " dof=" << format_double(a.dof) << " phi=" << format_double(a.phi)
     << " covariate_dim=" << a.covariate_dim
     << " train_draws=" << a.train_draws << " seed=" << a.seed
     << " tol=" << format_double(a.tol) << " max_iter=" << a.max_iter
     << " max_weight=" << a.max_weight
     << " series_tol=" << format_double(a.series_tol);
  return os.str();
}

RepOutcome run_replication(const BenchmarkArgs& a, int rep) {
  RepOutcome out;
  const Rng rep_stream = Rng(a.seed).derive(rep);
  Dataset data;
  std::vector<SpdMatrix> means;
  try {
    SimConfig cfg;
    cfg.n_obs = a.n_obs;
    cfg.dim = a.dim;
    cfg.n_groups = a.n_groups;
    cfg.dof = a.dof;
    cfg.phi = a.phi;
    cfg.weights = uniform_weights(a.n_groups);
    cfg.covariate_dim = a.covariate_dim;
    cfg.seed = rep_stream.derive(0).seed();
    cfg.validate();
    SimOutput sim = simulate(cfg);
    means = trained_means(cfg, a.train_draws, rep_stream.derive(1).seed());
    data.matrices = std::move(sim.matrices);
    data.covariates = std::move(sim.covariates);
    data.labels = std::move(sim.labels);
  } catch (const std::exception& e) {
    out.failures.push_back("replication " + std::to_string(rep) +
                           ": simulation: " + e.what());
    return out;
  }
  const std::uint64_t plan_seed = rep_stream.derive(2).seed();
  const HypergeomConfig hcfg{a.max_weight, a.series_tol};

  auto record = [&](const std::string& method, std::optional<double> lambda,
                    std::optional<double> u, auto&& run) {
    const auto start = std::chrono::steady_clock::now();
    try {
      const std::vector<int> labels = run();
      out.rows.push_back(BenchRow{rep, method, lambda, u,
                                  rand_index(labels, data.labels),
                                  elapsed_ms(start)});
    } catch (const std::exception& e) {
      std::string cell = method;
      if (lambda) cell += " lambda=" + format_double(*lambda);
      if (u) cell += " u=" + format_double(*u);
      out.failures.push_back("replication " + std::to_string(rep) + ": " +
                             cell + ": " + e.what());
    }
  };

  for (const std::string& method : a.methods) {
    if (method == "em_hybrid") {
      for (double u : a.us) {
        for (double lambda : a.lambdas) {
          record(method, lambda, u, [&]() {
            const PairWeightPlan plan =
                build_weight_plan(data.covariates, lambda, u, plan_seed);
            const ModelParams init = default_init(data, a.n_groups);
            return fit(data, means, init, plan, hcfg, a.max_iter, a.tol)
                .labels;
          });
        }
      }
    } else if (method == "log_euclidean") {
      record(method, std::nullopt, std::nullopt,
             [&]() { return log_euclidean_classify(data.matrices, means); });
    } else if (method == "kmeans_eigen") {
      record(method, std::nullopt, std::nullopt, [&]() {
        return kmeans_eigen(data.matrices, a.n_groups,
                            rep_stream.derive(3).seed());
      });
    } else if (method == "gmm_eigen") {
      record(method, std::nullopt, std::nullopt, [&]() {
        return gmm_eigen(data.matrices, a.n_groups,
                         rep_stream.derive(4).seed());
      });
    } else {
      throw DomainError("benchmark: unknown method '" + method + "'");
    }
  }
  return out;
}

// ------------------------------------------------------------- rcd-extract

RgbImage read_image_any(const std::string& path) {
  const std::string ext = fsys::path(path).extension().string();
  if (ext == ".ppm") return read_ppm(path);
  if (ext == ".csv") return read_image_csv(path);
  throw IoError(path + ": unsupported image extension (use .ppm or .csv)");
}

}  // namespace

int cmd_simulate(const SimulateArgs& args, std::ostream& log) {
  return run_guarded(log, [&]() {
    const SimConfig cfg = sim_config_from(args);
    cfg.validate();
    if (args.train_draws < 0) {
      throw DomainError("simulate: train_draws must be >= 0");
    }
    const SimOutput out = simulate(cfg);
    write_dataset_dir(args.out_dir, out);
    const std::uint64_t train_seed =
        args.train_seed ? *args.train_seed : args.seed + 1;
    if (args.train_draws > 0) {
      const std::vector<SpdMatrix> tm =
          trained_means(cfg, args.train_draws, train_seed);
      write_spd_stack_csv(
          (fsys::path(args.out_dir) / "trained_means.csv").string(), tm);
    }
    write_manifest((fsys::path(args.out_dir) / "manifest.json").string(),
                   "simulate", cfg.seed,
                   simulate_config_text(args, cfg, train_seed));
    log << "dataset with " << cfg.n_obs << " matrices written to "
        << args.out_dir << '\n';
    return kExitOk;
  });
}

int cmd_fit(const FitArgs& args, std::ostream& log) {
  return run_guarded(log, [&]() {
    const Dataset data = read_dataset_dir(args.data_dir);
    const std::string means_path =
        resolve_means_path(args.means_path, args.data_dir);
    const std::vector<SpdMatrix> means = read_spd_stack_csv(means_path);
    if (means.empty()) throw IoError(means_path + ": no mean blocks");

    const PairWeightPlan plan =
        build_weight_plan(data.covariates, args.lambda, args.u,
                          args.plan_seed);
    ModelParams init = default_init(data, static_cast<int>(means.size()));
    if (args.init_phi) init.phi = *args.init_phi;
    if (args.init_dof) init.dof = *args.init_dof;
    if (!args.init_weights.empty()) init.weights = args.init_weights;
    init.validate(data.matrices[0].dim());
    const HypergeomConfig hcfg{args.max_weight, args.series_tol};

    const auto start = std::chrono::steady_clock::now();
    const FitResult result =
        fit(data, means, init, plan, hcfg, args.max_iter, args.tol);
    const long long wall_ms = elapsed_ms(start);

    fsys::create_directories(args.out_dir);
    const fsys::path out_dir(args.out_dir);
    {
      std::ofstream out((out_dir / "fit.json").string(), std::ios::binary);
      if (!out) throw IoError(args.out_dir + "/fit.json: cannot write");
      out << fit_result_to_json(result);
    }
    write_labels_csv((out_dir / "labels.csv").string(), result.labels);
    json extra;
    extra["wall_ms"] = wall_ms;
    extra["converged"] = result.converged;
    extra["iterations"] = result.iterations;
    write_manifest((out_dir / "manifest.json").string(), "fit",
                   args.plan_seed, fit_config_text(args, means_path),
                   std::move(extra));
    log << "fit " << (result.converged ? "converged" : "stopped") << " after "
        << result.iterations << " iterations in " << wall_ms << " ms; "
        << "results in " << args.out_dir << '\n';
    return kExitOk;
  });
}

int cmd_classify(const ClassifyArgs& args, std::ostream& log) {
  return run_guarded(log, [&]() {
    const Dataset data = read_dataset_dir(args.data_dir);
    const std::string means_path =
        resolve_means_path(args.means_path, args.data_dir);
    const std::vector<SpdMatrix> means = read_spd_stack_csv(means_path);
    if (means.empty()) throw IoError(means_path + ": no mean blocks");
    const ModelParams params = read_params_json(args.params_path);
    params.validate(data.matrices[0].dim());
    if (params.weights.size() != means.size()) {
      throw LengthMismatch("classify: weight count differs from mean count");
    }

    const PairWeightPlan plan =
        build_weight_plan(data.covariates, args.lambda, args.u,
                          args.plan_seed);
    const HypergeomConfig hcfg{args.max_weight, args.series_tol};
    const auto start = std::chrono::steady_clock::now();
    const auto [scores, labels] = classify(data, means, params, plan, hcfg);
    const long long wall_ms = elapsed_ms(start);

    fsys::create_directories(args.out_dir);
    const fsys::path out_dir(args.out_dir);
    write_labels_csv((out_dir / "labels.csv").string(), labels);
    write_scores_csv((out_dir / "scores.csv").string(), scores);
    std::ostringstream cfg_text;
    cfg_text << "classify data_dir=" << args.data_dir
             << " means=" << means_path << " params=" << args.params_path
             << " lambda=" << format_double(args.lambda)
             << " u=" << format_double(args.u)
             << " plan_seed=" << args.plan_seed
             << " max_weight=" << args.max_weight
             << " series_tol=" << format_double(args.series_tol);
    json extra;
    extra["wall_ms"] = wall_ms;
    write_manifest((out_dir / "manifest.json").string(), "classify",
                   args.plan_seed, cfg_text.str(), std::move(extra));
    log << "labels for " << data.size() << " observations written to "
        << args.out_dir << '\n';
    return kExitOk;
  });
}

int cmd_benchmark(const BenchmarkArgs& raw_args, std::ostream& log) {
  return run_guarded(log, [&]() {
    const BenchmarkArgs args = with_defaults(raw_args);
    if (args.replications < 1) {
      throw DomainError("benchmark: replications must be >= 1");
    }
    if (args.jobs < 1) throw DomainError("benchmark: jobs must be >= 1");
    for (const std::string& m : args.methods) {
      if (std::find(kAllMethods.begin(), kAllMethods.end(), m) ==
          kAllMethods.end()) {
        throw DomainError("benchmark: unknown method '" + m + "'");
      }
    }

    const int reps = args.replications;
    std::vector<RepOutcome> outcomes(reps);
    std::atomic<int> next{0};
    auto worker = [&]() {
      while (true) {
        const int rep = next.fetch_add(1);
        if (rep >= reps) break;
        outcomes[rep] = run_replication(args, rep);
      }
    };
    const int n_workers = std::max(1, std::min(args.jobs, reps));
    if (n_workers == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(n_workers);
      for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }

    // merge in replication order — identical for any worker count
    std::ofstream out(args.out_csv, std::ios::binary);
    if (!out) throw IoError(args.out_csv + ": cannot open for writing");
    out << "replication,method,lambda,u,rand_index,wall_ms\n";
    std::vector<std::string> failures;
    std::size_t n_rows = 0;
    for (const RepOutcome& outcome : outcomes) {
      for (const BenchRow& row : outcome.rows) {
        out << row.replication << ',' << row.method << ','
            << (row.lambda ? format_double(*row.lambda) : "") << ','
            << (row.u ? format_double(*row.u) : "") << ','
            << format_double(row.rand_index) << ',' << row.wall_ms << '\n';
        ++n_rows;
      }
      failures.insert(failures.end(), outcome.failures.begin(),
                      outcome.failures.end());
    }
    out.close();

    const std::string manifest_path = args.manifest_path.empty()
                                          ? args.out_csv + ".manifest.json"
                                          : args.manifest_path;
    json extra;
    extra["rows"] = n_rows;
    extra["failures"] = failures;
    write_manifest(manifest_path, "benchmark", args.seed,
                   benchmark_config_text(args), std::move(extra));

    log << n_rows << " rows written to " << args.out_csv << '\n';
    for (const std::string& f : failures) log << "failed: " << f << '\n';
    return failures.empty() ? kExitOk : kExitPartial;
  });
}

int cmd_rcd_extract(const RcdExtractArgs& args, std::ostream& log) {
  return run_guarded(log, [&]() {
    if (args.images.empty()) {
      throw DomainError("rcd-extract: no input images");
    }
    if (!args.masks.empty() && args.masks.size() != args.images.size()) {
      throw LengthMismatch(
          "rcd-extract: mask count must match image count (or be zero)");
    }
    if (args.jobs < 1) throw DomainError("rcd-extract: jobs must be >= 1");

    const int n = static_cast<int>(args.images.size());
    std::vector<std::string> out_names(n);
    for (int i = 0; i < n; ++i) {
      out_names[i] = fsys::path(args.images[i]).stem().string() + ".rcd.csv";
    }
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (out_names[i] == out_names[j]) {
          throw DomainError("rcd-extract: images '" + args.images[i] +
                            "' and '" + args.images[j] +
                            "' map to the same output name");
        }
      }
    }
    fsys::create_directories(args.out_dir);

    struct ImageOutcome {
      bool ok = false;
      double blue_sd = 0.0;
      std::string error;
    };
    std::vector<ImageOutcome> outcomes(n);
    std::atomic<int> next{0};
    auto worker = [&]() {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= n) break;
        try {
          const RgbImage img = read_image_any(args.images[i]);
          VoxelMask mask;
          const VoxelMask* mask_ptr = nullptr;
          if (!args.masks.empty() && !args.masks[i].empty()) {
            mask = read_mask_csv(args.masks[i]);
            mask_ptr = &mask;
          }
          double blue_sd = 0.0;
          const SpdMatrix descriptor = rcd_pipeline(img, mask_ptr, &blue_sd);
          std::ofstream out(
              (fsys::path(args.out_dir) / out_names[i]).string(),
              std::ios::binary);
          if (!out) throw IoError(out_names[i] + ": cannot write");
          out << spd_to_csv(descriptor);
          outcomes[i].ok = true;
          outcomes[i].blue_sd = blue_sd;
        } catch (const std::exception& e) {
          outcomes[i].error = e.what();
        }
      }
    };
    const int n_workers = std::max(1, std::min(args.jobs, n));
    if (n_workers == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(n_workers);
      for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }

    json entries = json::array();
    json failures = json::array();
    int n_failed = 0;
    for (int i = 0; i < n; ++i) {
      if (outcomes[i].ok) {
        json e;
        e["image"] = args.images[i];
        e["descriptor"] = out_names[i];
        e["blue_sd"] = outcomes[i].blue_sd;
        entries.push_back(std::move(e));
      } else {
        json f;
        f["image"] = args.images[i];
        f["error"] = outcomes[i].error;
        failures.push_back(std::move(f));
        log << "failed: " << args.images[i] << ": " << outcomes[i].error
            << '\n';
        ++n_failed;
      }
    }
    std::ostringstream cfg_text;
    cfg_text << "rcd-extract images=" << join_strings(args.images)
             << " masks=" << join_strings(args.masks)
             << " out_dir=" << args.out_dir;
    json extra;
    extra["descriptors"] = std::move(entries);
    extra["failures"] = std::move(failures);
    write_manifest((fsys::path(args.out_dir) / "manifest.json").string(),
                   "rcd-extract", 0, cfg_text.str(), std::move(extra));
    log << (n - n_failed) << " of " << n << " descriptors written to "
        << args.out_dir << '\n';
    return n_failed == 0 ? kExitOk : kExitPartial;
  });
}

}  // namespace cwish::cli
