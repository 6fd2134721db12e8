#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "koop/embedding/model.hpp"
#include "koop/io/format.hpp"

namespace koop {

struct EmbeddedTrajectory {
    Matrix embedded; // (steps+1) x N_x
    bool diverged = false;
};

// g+_0 = g(chi_0), g+_k = A g+_{k-1} + B u_{k-1}; the features are never re-evaluated.
inline EmbeddedTrajectory forecast_pure(const EmbeddingModel& m, const Vector& chi0, const Matrix& inputs,
                                        std::size_t horizon) {
    if (inputs.rows() < static_cast<Eigen::Index>(horizon)) throw UsageError("forecast_pure: fewer input rows than horizon");
    if (horizon > 0 && inputs.cols() != m.input_dim()) throw UsageError("forecast_pure: input width mismatch");
    std::vector<Vector> xs{m.embed(chi0)};
    EmbeddedTrajectory t;
    for (std::size_t k = 0; k < horizon; ++k) {
        Vector next = m.step_embedded(xs.back(), inputs.row(static_cast<Eigen::Index>(k)).transpose());
        if (!next.allFinite() || next.cwiseAbs().maxCoeff() > kRolloutDivergence) {
            t.diverged = true;
            break;
        }
        xs.push_back(std::move(next));
    }
    t.embedded.resize(static_cast<Eigen::Index>(xs.size()), m.embed_dim());
    for (std::size_t k = 0; k < xs.size(); ++k) t.embedded.row(static_cast<Eigen::Index>(k)) = xs[k].transpose();
    return t;
}

// `k,c_1..c_m,flag`, one row per step.
inline std::string sequence_csv(const Matrix& rows, const std::string& prefix, bool diverged) {
    std::ostringstream os;
    os << "k";
    for (Eigen::Index j = 0; j < rows.cols(); ++j) os << "," << prefix << j + 1;
    os << ",flag\n";
    for (Eigen::Index k = 0; k < rows.rows(); ++k) {
        os << k;
        for (Eigen::Index j = 0; j < rows.cols(); ++j) os << "," << io::fmt(rows(k, j));
        os << "," << (diverged ? 1 : 0) << "\n";
    }
    return os.str();
}

} // namespace koop
