#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "koop/numerics/matrix.hpp"

namespace koop {

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamOptions options;
    long step = 0;
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;

    AdamState() = default;
    explicit AdamState(AdamOptions opts) : options(opts) {}
};

// One bias-corrected Adam update, in place. Moment buffers are allocated on
// the first call and must keep matching the parameter shapes afterwards.
inline void adam_step(AdamState& state, std::span<Matrix* const> params, std::span<const Matrix> grads) {
    if (params.size() != grads.size())
        throw UsageError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
    if (state.first_moment.empty() && state.step == 0) {
        for (const Matrix* p : params) {
            state.first_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
            state.second_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
        }
    }
    if (state.first_moment.size() != params.size())
        throw UsageError("adam_step: parameter count changed between steps");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Matrix& p = *params[i];
        if (grads[i].rows() != p.rows() || grads[i].cols() != p.cols() ||
            state.first_moment[i].rows() != p.rows() || state.first_moment[i].cols() != p.cols())
            throw UsageError("adam_step: shape mismatch at parameter " + std::to_string(i) + ": param " +
                             shape_str(p) + ", grad " + shape_str(grads[i]));
    }

    const auto& o = state.options;
    ++state.step;
    const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix& m = state.first_moment[i];
        Matrix& v = state.second_moment[i];
        m = o.beta1 * m + (1.0 - o.beta1) * grads[i];
        v = o.beta2 * v + (1.0 - o.beta2) * grads[i].cwiseAbs2();
        const Matrix mhat = m / c1;
        const Matrix vhat = v / c2;
        params[i]->array() -= o.learning_rate * mhat.array() / (vhat.array().sqrt() + o.epsilon);
    }
}

} // namespace koop
