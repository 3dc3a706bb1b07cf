#include "cwish/io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cwish/errors.hpp"

namespace cwish {

namespace {

namespace fsys = std::filesystem;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: stable line endings
  if (!out) throw IoError(path + ": cannot open for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  return in;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

double parse_double(const std::string& token, const std::string& path) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(token, &used);
  } catch (const std::exception&) {
    throw IoError(path + ": expected a number, got '" + token + "'");
  }
  if (used != token.size()) {
    throw IoError(path + ": trailing characters in '" + token + "'");
  }
  return value;
}

std::vector<double> split_csv(const std::string& line,
                              const std::string& path) {
  std::vector<double> values;
  std::stringstream ss(line);
  std::string token;
  while (std::getline(ss, token, ',')) {
    const auto first = token.find_first_not_of(" \t");
    if (first == std::string::npos) throw IoError(path + ": empty CSV field");
    const auto last = token.find_last_not_of(" \t");
    values.push_back(parse_double(token.substr(first, last - first + 1), path));
  }
  if (values.empty()) throw IoError(path + ": empty CSV line");
  return values;
}

void write_row(std::ofstream& out, const Eigen::VectorXd& row) {
  for (int j = 0; j < row.size(); ++j) {
    if (j > 0) out << ',';
    out << format_double(row(j));
  }
  out << '\n';
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw IoError("format_double: conversion failed");
  return std::string(buf, ptr);
}

void write_spd_stack_csv(const std::string& path,
                         const std::vector<SpdMatrix>& mats) {
  std::ofstream out = open_out(path);
  for (const auto& m : mats) {
    for (int i = 0; i < m.dim(); ++i) {
      write_row(out, m.mat().row(i).transpose());
    }
  }
}

std::vector<SpdMatrix> read_spd_stack_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw IoError(path + ": no data");
  const int dim = static_cast<int>(split_csv(lines[0], path).size());
  if (lines.size() % dim != 0) {
    throw IoError(path + ": line count is not a multiple of the dimension");
  }
  std::vector<SpdMatrix> mats;
  mats.reserve(lines.size() / dim);
  for (std::size_t start = 0; start < lines.size(); start += dim) {
    Eigen::MatrixXd m(dim, dim);
    for (int i = 0; i < dim; ++i) {
      const std::vector<double> row = split_csv(lines[start + i], path);
      if (static_cast<int>(row.size()) != dim) {
        throw IoError(path + ": ragged row inside a block");
      }
      for (int j = 0; j < dim; ++j) m(i, j) = row[j];
    }
    try {
      mats.emplace_back(m);
    } catch (const Error& e) {
      throw IoError(path + ": block " + std::to_string(start / dim) + ": " +
                    e.what());
    }
  }
  return mats;
}

void write_covariates_csv(const std::string& path,
                          const std::vector<CovariateVector>& covs) {
  std::ofstream out = open_out(path);
  for (const auto& c : covs) write_row(out, c.values);
}

std::vector<CovariateVector> read_covariates_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw IoError(path + ": no data");
  std::vector<CovariateVector> covs;
  covs.reserve(lines.size());
  for (const auto& line : lines) {
    const std::vector<double> row = split_csv(line, path);
    Eigen::VectorXd v(static_cast<int>(row.size()));
    for (std::size_t j = 0; j < row.size(); ++j) v(j) = row[j];
    covs.push_back(CovariateVector{std::move(v)});
  }
  for (const auto& c : covs) {
    if (c.dim() != covs[0].dim()) {
      throw IoError(path + ": covariate rows have mixed dimensions");
    }
  }
  return covs;
}

void write_labels_csv(const std::string& path,
                      const std::vector<int>& labels) {
  std::ofstream out = open_out(path);
  for (int label : labels) out << label << '\n';
}

std::vector<int> read_labels_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  std::vector<int> labels;
  labels.reserve(lines.size());
  for (const auto& line : lines) {
    const double v = parse_double(line, path);
    const int label = static_cast<int>(v);
    if (label != v) throw IoError(path + ": labels must be integers");
    labels.push_back(label);
  }
  return labels;
}

void write_dataset_dir(const std::string& dir, const SimOutput& out) {
  fsys::create_directories(dir);
  const fsys::path base(dir);
  write_spd_stack_csv((base / "matrices.csv").string(), out.matrices);
  write_covariates_csv((base / "covariates.csv").string(), out.covariates);
  write_labels_csv((base / "labels.csv").string(), out.labels);
  write_spd_stack_csv((base / "means.csv").string(), out.group_means);
}

Dataset read_dataset_dir(const std::string& dir) {
  const fsys::path base(dir);
  Dataset data;
  data.matrices = read_spd_stack_csv((base / "matrices.csv").string());
  data.covariates = read_covariates_csv((base / "covariates.csv").string());
  if (data.matrices.size() != data.covariates.size()) {
    throw LengthMismatch(dir + ": matrices.csv and covariates.csv disagree");
  }
  const fsys::path labels_path = base / "labels.csv";
  if (fsys::exists(labels_path)) {
    data.labels = read_labels_csv(labels_path.string());
    if (data.labels.size() != data.matrices.size()) {
      throw LengthMismatch(dir + ": labels.csv and matrices.csv disagree");
    }
  }
  return data;
}

std::string fit_result_to_json(const FitResult& result) {
  nlohmann::json j;
  j["params"]["dof"] = result.params.dof;
  j["params"]["phi"] = result.params.phi;
  j["params"]["weights"] = result.params.weights;
  j["composite_loglik_trace"] = result.composite_loglik_trace;
  j["labels"] = result.labels;
  std::vector<std::vector<double>> rows;
  rows.reserve(result.classifier.rows());
  for (int i = 0; i < result.classifier.rows(); ++i) {
    rows.emplace_back(result.classifier.row(i).begin(),
                      result.classifier.row(i).end());
  }
  j["classifier"] = rows;
  j["converged"] = result.converged;
  j["iterations"] = result.iterations;
  return j.dump(2) + "\n";
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

}  // namespace cwish
