#pragma once

#include <string>

#include "koop/embedding/test_functions.hpp"
#include "koop/numerics/pinv.hpp"
#include "koop/numerics/tikhonov.hpp"

namespace koop {

struct FitMode {
    enum class Kind { pinv, tikhonov };
    Kind kind = Kind::pinv;
    double value = kDefaultRcond; // rcond for pinv, lambda_reg for tikhonov

    static FitMode exact(double rcond = kDefaultRcond) { return {Kind::pinv, rcond}; }
    static FitMode regularized(double lambda = kDefaultTikhonov) { return {Kind::tikhonov, lambda}; }
};

struct FitResult {
    Matrix A; // N_x x N_x
    Matrix B; // N_x x p
    // sigma_max / sigma_min over the kept singular values of [g(X) U]^T Phi.
    double condition = 1.0;
    Eigen::Index rank = 0;
};

namespace detail {

inline void require_finite_rows(const Matrix& m, const char* what) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        if (!m.row(i).allFinite())
            throw DataError(std::string(what) + " are non-finite at sample " + std::to_string(i));
}

} // namespace detail

// [A B] = G_Y^T Phi (Psi^T Phi)^+ with Psi = [g(X) U], G_Y = g(Y) and Phi the
// stacked test-function values (rows are samples). The 1/M factors of the
// empirical averages cancel and are left out.
inline FitResult oblique_fit_from_blocks(const Matrix& psi, const Matrix& phi, const Matrix& gy, Eigen::Index nx,
                                         FitMode mode) {
    const Matrix h = gy.transpose() * phi;
    const Matrix g = psi.transpose() * phi;
    FitResult r;
    Matrix k;
    const auto info = pinv_with_info(g, mode.kind == FitMode::Kind::pinv ? mode.value : kDefaultRcond);
    r.condition = info.condition;
    r.rank = info.rank;
    if (mode.kind == FitMode::Kind::pinv)
        k = h * info.inverse;
    else
        k = solve_tikhonov(g, h, mode.value);
    r.A = k.leftCols(nx);
    r.B = k.rightCols(k.cols() - nx);
    return r;
}

inline FitResult oblique_edmd_fit(const Matrix& x, const Matrix& u, const Matrix& y, const FeatureMap& g,
                                  const TestFunctionSet& phi, FitMode mode = FitMode::exact()) {
    if (x.rows() == 0) throw UsageError("oblique_edmd_fit: empty data subset");
    if (u.rows() != x.rows() || y.rows() != x.rows())
        throw UsageError("oblique_edmd_fit: X, U, Y row counts differ");
    if (y.cols() != x.cols() || x.cols() != g.state_dim)
        throw UsageError("oblique_edmd_fit: state width does not match the feature map");
    if (u.cols() != phi.input_dim) throw UsageError("oblique_edmd_fit: input width does not match the test functions");
    const Matrix gx = g.embed_batch(x);
    const Matrix gy = g.embed_batch(y);
    detail::require_finite_rows(gx, "features of states");
    detail::require_finite_rows(gy, "features of successors");
    Matrix psi(x.rows(), gx.cols() + u.cols());
    psi << gx, u;
    const Matrix tests = phi.kind == TestFunctionSet::Kind::tied ? psi : phi.eval_batch(g, x, u);
    detail::require_finite_rows(tests, "test-function values");
    return oblique_fit_from_blocks(psi, tests, gy, g.dim(), mode);
}

// Orthogonal special case: test functions tied to the features.
inline FitResult edmd_fit(const Matrix& x, const Matrix& u, const Matrix& y, const FeatureMap& g,
                          FitMode mode = FitMode::exact()) {
    return oblique_edmd_fit(x, u, y, g, TestFunctionSet::tied(g.state_dim, u.cols()), mode);
}

namespace ad {

// Differentiable [A B] = H G^T (G G^T + lambda I)^{-1} with H = G_Y^T Phi, G = Psi^T Phi.
inline Var oblique_operator(Var psi, Var phi, Var gy, double lambda) {
    Var h = matmul(transpose(gy), phi);
    Var g = matmul(transpose(psi), phi);
    return solve_tikhonov(g, h, lambda);
}

} // namespace ad
} // namespace koop
