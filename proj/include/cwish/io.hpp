#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "cwish/em.hpp"
#include "cwish/sim.hpp"

namespace cwish {

/// Shortest decimal string that parses back to the identical double.
std::string format_double(double v);

/// Stacked square blocks: each matrix contributes `dim` consecutive lines
/// of `dim` comma-separated values. The dimension is inferred on read from
/// the column count of the first line; the line count must be a multiple of
/// it. Every block is validated as an SpdMatrix.
void write_spd_stack_csv(const std::string& path,
                         const std::vector<SpdMatrix>& mats);
std::vector<SpdMatrix> read_spd_stack_csv(const std::string& path);

/// One line per observation, comma-separated covariate entries.
void write_covariates_csv(const std::string& path,
                          const std::vector<CovariateVector>& covs);
std::vector<CovariateVector> read_covariates_csv(const std::string& path);

/// One integer label per line.
void write_labels_csv(const std::string& path, const std::vector<int>& labels);
std::vector<int> read_labels_csv(const std::string& path);

/// Dataset directory layout: matrices.csv (stacked observation blocks),
/// covariates.csv, labels.csv, means.csv (stacked group-mean blocks).
/// Creates the directory when missing.
void write_dataset_dir(const std::string& dir, const SimOutput& out);

/// Reads matrices.csv and covariates.csv; labels.csv is optional (labels
/// left empty when the file is absent). Throws IoError with path context
/// and LengthMismatch when counts disagree.
Dataset read_dataset_dir(const std::string& dir);

/// FitResult as JSON: params {dof, phi, weights}, composite_loglik_trace,
/// labels, classifier (array of rows), converged, iterations.
std::string fit_result_to_json(const FitResult& result);

/// 64-bit FNV-1a hash, used to fingerprint configs in manifests.
std::uint64_t fnv1a64(const std::string& text);

}  // namespace cwish
