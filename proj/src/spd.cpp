#include "cwish/spd.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

namespace cwish {

namespace {
constexpr double kSymmetryTol = 1e-10;
constexpr double kPivotMin = 1e-14;

// Plain row-by-row Cholesky. Eigen's LLT does not expose a pivot threshold,
// and the positive-definiteness contract is "every pivot > 1e-14".
Eigen::MatrixXd cholesky_impl(const Eigen::MatrixXd& m, double pivot_min) {
  const int p = static_cast<int>(m.rows());
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = m(i, j);
      for (int k = 0; k < j; ++k) sum -= l(i, k) * l(j, k);
      if (i == j) {
        if (!(sum > pivot_min)) {
          throw NotPositiveDefinite(
              "cholesky: pivot " + std::to_string(sum) + " at index " +
              std::to_string(i) + " is not above " + std::to_string(pivot_min));
        }
        l(i, i) = std::sqrt(sum);
      } else {
        l(i, j) = sum / l(j, j);
      }
    }
  }
  return l;
}
}  // namespace

SpdMatrix::SpdMatrix(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw DimensionMismatch("SpdMatrix: input must be square and nonempty");
  }
  if (!m.allFinite()) {
    throw DomainError("SpdMatrix: non-finite entries");
  }
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol) {
    throw DomainError("SpdMatrix: asymmetry " + std::to_string(asym) +
                      " exceeds tolerance 1e-10");
  }
  // symmetrize: downstream sample covariances accumulate asymmetric rounding
  mat_ = 0.5 * (m + m.transpose());
  cholesky_impl(mat_, kPivotMin);  // certify positive definiteness
}

double LowerTriangular::log_diag_sum() const {
  return mat_.diagonal().array().log().sum();
}

LowerTriangular cholesky(const SpdMatrix& m) {
  return LowerTriangular(cholesky_impl(m.mat(), kPivotMin));
}

Eigen::MatrixXd cholesky_raw(const Eigen::MatrixXd& m, double pivot_min) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatch("cholesky_raw: matrix must be square");
  }
  return cholesky_impl(m, pivot_min);
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> eigensystem(const SpdMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m.mat());
  if (solver.info() != Eigen::Success) {
    throw ConvergenceFailure("eigensystem: solver did not converge");
  }
  // Eigen returns ascending order; the contract is descending
  const int p = m.dim();
  Eigen::VectorXd values(p);
  Eigen::MatrixXd vectors(p, p);
  for (int i = 0; i < p; ++i) {
    values(i) = solver.eigenvalues()(p - 1 - i);
    vectors.col(i) = solver.eigenvectors().col(p - 1 - i);
  }
  return {values, vectors};
}

Eigen::MatrixXd matrix_log(const SpdMatrix& m) {
  auto [values, vectors] = eigensystem(m);
  return vectors * values.array().log().matrix().asDiagonal() *
         vectors.transpose();
}

double log_det(const SpdMatrix& m) { return 2.0 * cholesky(m).log_diag_sum(); }

double frobenius_sq(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch("frobenius_sq: shapes differ");
  }
  return (a - b).squaredNorm();
}

Eigen::MatrixXd spd_sqrt_raw(const Eigen::MatrixXd& sym_psd) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym_psd);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceFailure("spd_sqrt_raw: eigendecomposition failed");
  }
  const Eigen::VectorXd roots =
      solver.eigenvalues().array().max(0.0).sqrt().matrix();
  return solver.eigenvectors() * roots.asDiagonal() *
         solver.eigenvectors().transpose();
}

double euclidean_distance(const CovariateVector& x, const CovariateVector& y) {
  if (x.dim() != y.dim()) {
    throw DimensionMismatch("euclidean_distance: dimensions differ");
  }
  return (x.values - y.values).norm();
}

std::string spd_to_csv(const SpdMatrix& m) {
  std::ostringstream out;
  out.precision(17);
  for (int i = 0; i < m.dim(); ++i) {
    for (int j = 0; j < m.dim(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
  return out.str();
}

SpdMatrix spd_from_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError("spd_from_csv: bad numeric cell '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("spd_from_csv: empty block");
  const size_t p = rows.size();
  Eigen::MatrixXd m(p, p);
  for (size_t i = 0; i < p; ++i) {
    if (rows[i].size() != p) {
      throw IoError("spd_from_csv: block is not square");
    }
    for (size_t j = 0; j < p; ++j) m(i, j) = rows[i][j];
  }
  return SpdMatrix(m);  // validates invariants
}

std::string spd_to_json(const SpdMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.dim(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.dim(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows.dump();
}

SpdMatrix spd_from_json(const std::string& text) {
  nlohmann::json rows;
  try {
    rows = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw IoError(std::string("spd_from_json: ") + e.what());
  }
  if (!rows.is_array() || rows.empty()) {
    throw IoError("spd_from_json: expected a nonempty array of arrays");
  }
  const size_t p = rows.size();
  Eigen::MatrixXd m(p, p);
  for (size_t i = 0; i < p; ++i) {
    if (!rows[i].is_array() || rows[i].size() != p) {
      throw IoError("spd_from_json: ragged or non-square rows");
    }
    for (size_t j = 0; j < p; ++j) m(i, j) = rows[i][j].get<double>();
  }
  return SpdMatrix(m);
}

}  // namespace cwish
