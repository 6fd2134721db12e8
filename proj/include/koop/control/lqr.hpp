#pragma once

#include <algorithm>
#include <cstddef>
#include <string>

#include "koop/numerics/matrix.hpp"

namespace koop {

struct DareOptions {
    double tol = 1e-10;
    std::size_t max_iter = 100000;
};

struct DareResult {
    Matrix P;
    Matrix K;    // u = -K xi
    Matrix gain; // u = gain * xi, gain = -K
    std::size_t iterations = 0;
    double closed_loop_radius = 0.0;
};

// || P - A'PA + A'PB (R + B'PB)^{-1} B'PA - Q ||_inf
inline double dare_residual(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r, const Matrix& p) {
    const Matrix btpa = b.transpose() * p * a;
    const Matrix s = r + b.transpose() * p * b;
    const Matrix rhs = a.transpose() * p * a - btpa.transpose() * s.ldlt().solve(btpa) + q;
    return inf_norm(p - rhs);
}

// Discrete algebraic Riccati equation by fixed-point (value) iteration from P = Q.
// Stops once the sup-norm update falls below tol * max(1, ||P||_inf).
inline DareResult solve_dare(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                             const DareOptions& opts = {}) {
    const auto nx = a.rows();
    require_shape(a, nx, nx, "solve_dare A");
    if (b.rows() != nx) throw UsageError("solve_dare: B has " + std::to_string(b.rows()) + " rows");
    require_shape(q, nx, nx, "solve_dare Q_w");
    require_shape(r, b.cols(), b.cols(), "solve_dare R_w");
    require_finite(a, "solve_dare A");
    require_finite(b, "solve_dare B");

    Eigen::LLT<Matrix> r_chol(r);
    if (r_chol.info() != Eigen::Success) throw UsageError("solve_dare: R_w must be symmetric positive definite");

    Matrix p = q;
    DareResult out;
    bool converged = false;
    for (std::size_t it = 1; it <= opts.max_iter; ++it) {
        const Matrix btpa = b.transpose() * p * a;
        const Matrix s = r + b.transpose() * p * b;
        Matrix next = a.transpose() * p * a - btpa.transpose() * s.ldlt().solve(btpa) + q;
        next = 0.5 * (next + next.transpose());
        if (!next.allFinite()) throw SynthesisError("solve_dare: Riccati iteration diverged");
        const double change = inf_norm(next - p);
        p = std::move(next);
        out.iterations = it;
        if (change < opts.tol * std::max(1.0, inf_norm(p))) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw SynthesisError("solve_dare: no convergence in " + std::to_string(opts.max_iter) +
                             " iterations (is (A, B) stabilizable?)");
    const Matrix s = r + b.transpose() * p * b;
    out.P = p;
    out.K = s.ldlt().solve(b.transpose() * p * a);
    out.gain = -out.K;
    out.closed_loop_radius = spectral_radius(a + b * out.gain);
    if (!(out.closed_loop_radius < 1.0))
        throw SynthesisError("solve_dare: closed loop is not stable (spectral radius " +
                             std::to_string(out.closed_loop_radius) + ")");
    return out;
}

// Q_w = blkdiag(Q_state, 0) for an N_x-dimensional embedded state.
inline Matrix embedded_state_weight(const Matrix& q_state, Eigen::Index nx) {
    if (q_state.rows() != q_state.cols() || q_state.rows() > nx)
        throw UsageError("Q_state must be square and no larger than the embedded state");
    Matrix q = Matrix::Zero(nx, nx);
    q.topLeftCorner(q_state.rows(), q_state.cols()) = q_state;
    return q;
}

struct LqrController {
    Matrix gain; // u = gain * xi
};

inline LqrController design_lqr(const Matrix& a, const Matrix& b, const Matrix& q_w, const Matrix& r_w,
                                const DareOptions& opts = {}) {
    return {solve_dare(a, b, q_w, r_w, opts).gain};
}

} // namespace koop
