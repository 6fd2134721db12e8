#pragma once

#include "koop/numerics/matrix.hpp"
#include "koop/numerics/tape.hpp"

#include <cmath>
#include <memory>
#include <optional>

namespace koop {

inline constexpr double kDefaultTikhonov = 1e-8;

namespace detail {

// R from the QR factorization of [G^T; sqrt(lambda) I], so R^T R = G G^T + lambda I
// without forming the product (which would square the condition number).
struct TikhonovFactor {
    Matrix r;  // upper triangular, N x N
    Matrix qb; // first N rows of Q^T [H^T; 0]

    TikhonovFactor(const Matrix& g, const Matrix& h, double lambda) {
        const auto nr = g.rows(), nc = g.cols();
        Matrix aug = Matrix::Zero(nc + nr, nr);
        aug.topRows(nc) = g.transpose();
        aug.bottomRows(nr).diagonal().setConstant(std::sqrt(lambda));
        Matrix rhs = Matrix::Zero(nc + nr, h.rows());
        rhs.topRows(nc) = h.transpose();
        Eigen::HouseholderQR<Matrix> qr(aug);
        r = qr.matrixQR().topRows(nr).triangularView<Eigen::Upper>();
        qb = (qr.householderQ().transpose() * rhs).topRows(nr);
        if (!r.allFinite() || r.diagonal().cwiseAbs().minCoeff() == 0.0)
            throw NumericalError("solve_tikhonov: factorization failed for " + shape_str(g));
    }

    // X = (G G^T + lambda I)^{-1} G H^T
    [[nodiscard]] Matrix solution() const { return r.triangularView<Eigen::Upper>().solve(qb); }

    // (G G^T + lambda I)^{-1} y
    [[nodiscard]] Matrix apply_inverse(const Matrix& y) const {
        const Matrix z = r.transpose().triangularView<Eigen::Lower>().solve(y);
        return r.triangularView<Eigen::Upper>().solve(z);
    }
};

inline void check_tikhonov_args(const Matrix& g, const Matrix& h, double lambda) {
    if (lambda <= 0.0) throw UsageError("solve_tikhonov: lambda_reg must be > 0");
    if (g.cols() != h.cols())
        throw UsageError("solve_tikhonov: G " + shape_str(g) + " and H " + shape_str(h) + " disagree in columns");
}

} // namespace detail

// H G^T (G G^T + lambda I)^{-1}; tends to H pinv(G) as lambda -> 0.
inline Matrix solve_tikhonov(const Matrix& g, const Matrix& h, double lambda) {
    detail::check_tikhonov_args(g, h, lambda);
    Matrix x = detail::TikhonovFactor(g, h, lambda).solution();
    if (!x.allFinite()) throw NumericalError("solve_tikhonov: non-finite solution");
    return x.transpose();
}

namespace ad {

// Fused node, output X^T with X = S^{-1} G H^T and S = G G^T + lambda I.
// Adjoints: Rbar = S^{-1} Xbar, Gbar = Rbar H - (Rbar X^T + X Rbar^T) G, Hbar = Rbar^T G.
inline Var solve_tikhonov(Var g, Var h, double lambda) {
    koop::detail::check_tikhonov_args(g.value(), h.value(), lambda);
    Tape& t = detail::same_tape(g, h);
    auto factor = std::make_shared<std::optional<koop::detail::TikhonovFactor>>();
    return t.record(
        {g.id(), h.id()},
        [factor, lambda](const Inputs& in) -> Matrix {
            factor->emplace(*in[0], *in[1], lambda);
            Matrix x = (*factor)->solution();
            if (!x.allFinite()) throw NumericalError("solve_tikhonov: non-finite solution");
            return x.transpose();
        },
        [factor](const Matrix& ybar, const Matrix& y, const Inputs& in, std::vector<Matrix*>& adj) {
            const Matrix& gm = *in[0];
            const Matrix& hm = *in[1];
            const Matrix x = y.transpose();
            const Matrix rbar = (*factor)->apply_inverse(ybar.transpose());
            if (adj[0]) adj[0]->noalias() += rbar * hm - (rbar * x.transpose() + x * rbar.transpose()) * gm;
            if (adj[1]) adj[1]->noalias() += rbar.transpose() * gm;
        });
}

} // namespace ad
} // namespace koop
