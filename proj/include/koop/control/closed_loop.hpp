#pragma once

#include <memory>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "koop/control/lqr.hpp"
#include "koop/control/mpc.hpp"
#include "koop/control/servo.hpp"
#include "koop/dynamics/integrator.hpp"
#include "koop/embedding/model.hpp"
#include "koop/io/format.hpp"

namespace koop {

using Controller = std::variant<LqrController, ServoController, std::shared_ptr<const MpcController>>;

struct ClosedLoopRun {
    Matrix states;   // (K+1) x n, true plant states
    Matrix inputs;   // K x p
    Matrix embedded; // (K+1) x N_x, xi_k = g(chi_k) as seen by the controller
    bool diverged = false;
    double dt = 0.0;
};

inline constexpr double kClosedLoopDivergence = 1e3;

// Controller designed on the model, applied to the true plant. The embedded
// state is re-evaluated from the true state at every step.
inline ClosedLoopRun simulate_closed_loop(const DynSystem& sys, const EmbeddingModel& model, const Controller& controller,
                                          const Vector& chi0, std::size_t steps, double dt, double h,
                                          double divergence_bound = kClosedLoopDivergence) {
    if (chi0.size() != sys.state_dim || model.state_dim() != sys.state_dim || model.input_dim() != sys.input_dim)
        throw UsageError("simulate_closed_loop: dimensions of plant, model and initial state disagree");
    const auto p = sys.input_dim;
    std::vector<Vector> xs{chi0}, us, xis;
    Vector nu;         // servo integrator
    Vector u_prev = Vector::Zero(p);
    if (const auto* s = std::get_if<ServoController>(&controller)) nu = Vector::Zero(s->C.rows());

    bool diverged = false;
    for (std::size_t k = 0; k < steps; ++k) {
        const Vector& chi = xs.back();
        Vector xi = model.embed(chi);
        xis.push_back(xi);
        Vector u(p);
        if (const auto* lqr = std::get_if<LqrController>(&controller)) {
            u = lqr->gain * xi;
        } else if (const auto* servo = std::get_if<ServoController>(&controller)) {
            nu += servo->reference - servo->C * xi;
            u = -servo->Q_s * xi + servo->Q_I * nu;
        } else {
            const auto& mpc = std::get<std::shared_ptr<const MpcController>>(controller);
            u = mpc->step(xi, u_prev, static_cast<long>(k)).u0;
        }
        if (!u.allFinite()) {
            diverged = true;
            break;
        }
        Vector next;
        try {
            next = sample_map(sys, chi, u, dt, h);
        } catch (const DivergenceError&) {
            us.push_back(u);
            diverged = true;
            break;
        }
        us.push_back(u);
        u_prev = u;
        if (!next.allFinite() || next.cwiseAbs().maxCoeff() > divergence_bound) {
            diverged = true;
            break;
        }
        xs.push_back(std::move(next));
    }
    if (xis.size() < xs.size()) xis.push_back(model.embed(xs.back()));

    ClosedLoopRun run;
    run.diverged = diverged;
    run.dt = dt;
    run.states.resize(static_cast<Eigen::Index>(xs.size()), sys.state_dim);
    for (std::size_t i = 0; i < xs.size(); ++i) run.states.row(static_cast<Eigen::Index>(i)) = xs[i].transpose();
    run.inputs.resize(static_cast<Eigen::Index>(us.size()), p);
    for (std::size_t i = 0; i < us.size(); ++i) run.inputs.row(static_cast<Eigen::Index>(i)) = us[i].transpose();
    run.embedded.resize(static_cast<Eigen::Index>(xis.size()), model.embed_dim());
    for (std::size_t i = 0; i < xis.size(); ++i) run.embedded.row(static_cast<Eigen::Index>(i)) = xis[i].transpose();
    return run;
}

// `k,t,chi_1..chi_n,u_1..u_p,flag`. The input cells of the final state row are
// empty (no input is applied after it); flag is 1 on every row of a diverged run.
inline std::string closed_loop_csv(const ClosedLoopRun& run) {
    const auto n = run.states.cols();
    const auto p = run.inputs.cols();
    std::ostringstream os;
    os << "k,t";
    for (Eigen::Index j = 0; j < n; ++j) os << ",chi_" << j + 1;
    for (Eigen::Index j = 0; j < p; ++j) os << ",u_" << j + 1;
    os << ",flag\n";
    for (Eigen::Index k = 0; k < run.states.rows(); ++k) {
        os << k << "," << io::fmt(static_cast<double>(k) * run.dt);
        for (Eigen::Index j = 0; j < n; ++j) os << "," << io::fmt(run.states(k, j));
        for (Eigen::Index j = 0; j < p; ++j) os << "," << (k < run.inputs.rows() ? io::fmt(run.inputs(k, j)) : "");
        os << "," << (run.diverged ? 1 : 0) << "\n";
    }
    return os.str();
}

} // namespace koop
