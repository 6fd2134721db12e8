#pragma once

#include "koop/control/lqr.hpp"

namespace koop {

// Integral servo: u_k = -Q_s xi_k + Q_I nu_k, nu_k = nu_{k-1} + r - C xi_k.
struct ServoController {
    Matrix C;       // q x N_x
    Matrix Q_s;     // p x N_x
    Matrix Q_I;     // p x q
    Vector reference;
    double closed_loop_radius = 0.0;
};

struct ServoWeights {
    Matrix q_w;          // N_x x N_x
    double w_nu = 100.0; // weight on each integrator state
    Matrix r_w;          // p x p
};

// LQR on the integrator-augmented model
//   [xi; nu]+ = [[A, 0], [-C A, I]] [xi; nu] + [B; -C B] u + [0; r].
inline ServoController design_servo(const Matrix& a, const Matrix& b, const Matrix& c, const Vector& reference,
                                    const ServoWeights& w, const DareOptions& opts = {}) {
    const auto nx = a.rows();
    const auto p = b.cols();
    const auto q = c.rows();
    if (c.cols() != nx) throw UsageError("design_servo: C must have N_x columns");
    if (reference.size() != q) throw UsageError("design_servo: reference size must equal the number of outputs");
    if (!(w.w_nu > 0.0)) throw UsageError("design_servo: integrator weight must be > 0");

    Matrix aa = Matrix::Zero(nx + q, nx + q);
    aa.topLeftCorner(nx, nx) = a;
    aa.bottomLeftCorner(q, nx) = -c * a;
    aa.bottomRightCorner(q, q) = Matrix::Identity(q, q);
    Matrix ba(nx + q, p);
    ba << b, -c * b;
    Matrix qa = Matrix::Zero(nx + q, nx + q);
    qa.topLeftCorner(nx, nx) = w.q_w;
    qa.bottomRightCorner(q, q) = w.w_nu * Matrix::Identity(q, q);

    const auto dare = solve_dare(aa, ba, qa, w.r_w, opts);
    ServoController s;
    s.C = c;
    s.Q_s = dare.K.leftCols(nx);
    s.Q_I = -dare.K.rightCols(q);
    s.reference = reference;
    s.closed_loop_radius = dare.closed_loop_radius;
    return s;
}

} // namespace koop
