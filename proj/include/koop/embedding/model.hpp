#pragma once

#include <string>
#include <vector>

#include "koop/embedding/fit.hpp"

namespace koop {

// xi+ = A xi + B u with xi = g(chi); the decoder is [I_n 0].
struct EmbeddingModel {
    FeatureMap features;
    Matrix A;
    Matrix B;

    EmbeddingModel() = default;
    EmbeddingModel(FeatureMap g, Matrix a, Matrix b) : features(std::move(g)), A(std::move(a)), B(std::move(b)) {
        validate();
    }

    [[nodiscard]] Eigen::Index state_dim() const { return features.state_dim; }
    [[nodiscard]] Eigen::Index embed_dim() const { return features.dim(); }
    [[nodiscard]] Eigen::Index input_dim() const { return B.cols(); }

    void validate() const {
        features.validate();
        const auto nx = features.dim();
        require_shape(A, nx, nx, "model A");
        if (B.rows() != nx) throw DataError("model B has " + std::to_string(B.rows()) + " rows, expected " + std::to_string(nx));
        require_finite(A, "model A");
        require_finite(B, "model B");
    }

    [[nodiscard]] Vector embed(const Vector& chi) const { return features.embed(chi); }

    [[nodiscard]] Vector step_embedded(const Vector& xi, const Vector& u) const { return A * xi + B * u; }

    [[nodiscard]] Vector decode(const Vector& xi) const { return xi.head(state_dim()); }

    // One-step state prediction [I 0](A g(chi) + B u).
    [[nodiscard]] Vector predict(const Vector& chi, const Vector& u) const {
        return decode(step_embedded(embed(chi), u));
    }
};

inline EmbeddingModel make_model(FeatureMap g, const FitResult& fit) { return EmbeddingModel(std::move(g), fit.A, fit.B); }

// || g(y) - (A g(chi) + B u) ||_2
inline double modeling_error(const EmbeddingModel& m, const Vector& chi, const Vector& u, const Vector& y) {
    return (m.embed(y) - m.step_embedded(m.embed(chi), u)).norm();
}

// || y - [I 0](A g(chi) + B u) ||_2
inline double state_prediction_error(const EmbeddingModel& m, const Vector& chi, const Vector& u, const Vector& y) {
    return (y - m.predict(chi, u)).norm();
}

struct Trajectory {
    Matrix states; // (steps+1) x dim, truncated on divergence
    bool diverged = false;
};

inline constexpr double kRolloutDivergence = 1e6;

// chi_{k+1} = [I 0](A g(chi_k) + B u_k), features re-evaluated every step.
// `inputs` has one row per step (horizon x p).
inline Trajectory rollout(const EmbeddingModel& m, const Vector& chi0, const Matrix& inputs, std::size_t horizon) {
    if (inputs.rows() < static_cast<Eigen::Index>(horizon)) throw UsageError("rollout: fewer input rows than horizon");
    if (horizon > 0 && inputs.cols() != m.input_dim()) throw UsageError("rollout: input width mismatch");
    Trajectory t;
    std::vector<Vector> states{chi0};
    for (std::size_t k = 0; k < horizon; ++k) {
        Vector next = m.predict(states.back(), inputs.row(static_cast<Eigen::Index>(k)).transpose());
        if (!next.allFinite() || next.cwiseAbs().maxCoeff() > kRolloutDivergence) {
            t.diverged = true;
            break;
        }
        states.push_back(std::move(next));
    }
    t.states.resize(static_cast<Eigen::Index>(states.size()), chi0.size());
    for (std::size_t k = 0; k < states.size(); ++k) t.states.row(static_cast<Eigen::Index>(k)) = states[k].transpose();
    return t;
}

} // namespace koop
