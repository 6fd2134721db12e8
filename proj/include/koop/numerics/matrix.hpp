#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "koop/errors.hpp"

namespace koop {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline std::string shape_str(const Matrix& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

// Model-facing matrices must be finite; `what` names the offending matrix.
inline void require_finite(const Matrix& m, const std::string& what) {
    if (!m.allFinite())
        throw DataError(what + " (" + shape_str(m) + ") contains NaN or Inf");
}

inline void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
    if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream os;
        os << what << ": expected " << rows << "x" << cols << ", got " << shape_str(m);
        throw UsageError(os.str());
    }
}

// Build from row-major data; the serialized form of every matrix in this project.
inline Matrix from_row_major(std::size_t rows, std::size_t cols, std::span<const double> data) {
    if (data.size() != rows * cols)
        throw UsageError("row-major data length " + std::to_string(data.size()) + " != " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i * cols + j];
    return m;
}

inline std::vector<double> to_row_major(const Matrix& m) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
    return out;
}

inline std::vector<std::vector<double>> to_nested(const Matrix& m) {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)].push_back(m(i, j));
    return out;
}

inline Matrix from_nested(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return Matrix(0, 0);
    const auto cols = rows.front().size();
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols) throw UsageError("ragged nested matrix at row " + std::to_string(i));
        for (std::size_t j = 0; j < cols; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return m;
}

inline double spectral_radius(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success)
        throw NumericalError("eigenvalue computation failed for " + shape_str(a) + " matrix");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline double inf_norm(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

} // namespace koop
