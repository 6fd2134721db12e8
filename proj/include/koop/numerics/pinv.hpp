#pragma once

#include "koop/numerics/matrix.hpp"

namespace koop {

inline constexpr double kDefaultRcond = 1e-12;

struct PinvResult {
    Matrix inverse;
    Eigen::Index rank = 0;
    // sigma_max / sigma_min over the kept singular values; 1 when rank is 0.
    double condition = 1.0;
};

// Moore-Penrose pseudo-inverse via SVD. Singular values <= rcond * sigma_max
// are treated as zero.
inline PinvResult pinv_with_info(const Matrix& m, double rcond = kDefaultRcond) {
    if (rcond < 0.0) throw UsageError("pinv: rcond must be >= 0");
    require_finite(m, "pinv input");
    PinvResult out;
    out.inverse = Matrix::Zero(m.cols(), m.rows());
    if (m.size() == 0) return out;

    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success)
        throw NumericalError("pinv: SVD did not converge for " + shape_str(m) + " input");

    const Vector& s = svd.singularValues();
    const double smax = s.size() ? s(0) : 0.0;
    if (smax == 0.0) return out;
    const double cutoff = rcond * smax;

    Vector inv_s = Vector::Zero(s.size());
    double smin_kept = smax;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > cutoff) {
            inv_s(i) = 1.0 / s(i);
            smin_kept = s(i);
            ++out.rank;
        }
    }
    out.inverse = svd.matrixV() * inv_s.asDiagonal() * svd.matrixU().transpose();
    out.condition = smax / smin_kept;
    return out;
}

inline Matrix pinv(const Matrix& m, double rcond = kDefaultRcond) { return pinv_with_info(m, rcond).inverse; }

} // namespace koop
