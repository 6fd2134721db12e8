#pragma once

#include "koop/dynamics/dataset.hpp"
#include "koop/embedding/model.hpp"

namespace koop {

struct LossWeights {
    double modeling = 1.0; // lambda1, weight on E^2
    double state = 1.0;    // lambda2, weight on E_state^2

    void validate() const {
        if (modeling < 0.0 || state < 0.0) throw UsageError("loss weights must be >= 0");
        if (modeling == 0.0 && state == 0.0) throw UsageError("loss weights must not both be zero");
    }
};

namespace ad {

// sum_i lambda1 ||g(y_i) - K psi_i||^2 + lambda2 ||y_i - [I 0] K psi_i||^2,
// where K = [A B] and psi_i = [g(chi_i); u_i]. The first n columns of g(Y) are Y.
inline Var weighted_residual_loss(Var psi, Var gy, Var k, Eigen::Index n, const LossWeights& w) {
    Var residual = sub(gy, matmul(psi, transpose(k)));
    Var total = scale(sum_squares(residual), w.modeling);
    if (w.state != 0.0) total = add(total, scale(sum_squares(cols(residual, 0, n)), w.state));
    return total;
}

struct LossGraph {
    Var loss;
    Var op; // [A B]
};

// Orthogonal-projection loss J: test functions tied to the features.
inline LossGraph loss_J(const FeatureMap& g, const MlpVars* gvars, Var x, Var u, Var y, const LossWeights& w,
                        double lambda_reg) {
    Var psi = hcat(g.embed(x, gvars), u);
    Var gy = g.embed(y, gvars);
    Var k = oblique_operator(psi, psi, gy, lambda_reg);
    return {weighted_residual_loss(psi, gy, k, g.state_dim, w), k};
}

// Oblique-projection loss J_oblique with learnable test functions.
inline LossGraph loss_J_oblique(const FeatureMap& g, const MlpVars* gvars, const TestFunctionSet& phi,
                                const TestFunctionVars& phivars, Var x, Var u, Var y, const LossWeights& w,
                                double lambda_reg) {
    Var psi = hcat(g.embed(x, gvars), u);
    Var gy = g.embed(y, gvars);
    Var tests = eval_tests(phi, phivars, x, u, psi);
    Var k = oblique_operator(psi, tests, gy, lambda_reg);
    return {weighted_residual_loss(psi, gy, k, g.state_dim, w), k};
}

} // namespace ad

// Same objective evaluated directly for a fixed model, without a tape.
inline double summed_loss(const EmbeddingModel& m, const Matrix& x, const Matrix& u, const Matrix& y,
                          const LossWeights& w) {
    if (x.rows() == 0) return 0.0;
    const Matrix gx = m.features.embed_batch(x);
    const Matrix gy = m.features.embed_batch(y);
    const Matrix residual = gy - gx * m.A.transpose() - u * m.B.transpose();
    return w.modeling * residual.squaredNorm() + w.state * residual.leftCols(m.state_dim()).squaredNorm();
}

inline double summed_loss(const EmbeddingModel& m, const Dataset& d, const LossWeights& w) {
    return summed_loss(m, d.states, d.inputs, d.successors, w);
}

} // namespace koop
