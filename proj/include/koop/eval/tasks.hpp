#pragma once

#include <array>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "koop/control/closed_loop.hpp"
#include "koop/eval/forecast.hpp"

namespace koop {

enum class Task { predict, lqr, servo, mpc };

inline constexpr std::array<Task, 4> kAllTasks{Task::predict, Task::lqr, Task::servo, Task::mpc};

inline const char* to_string(Task t) {
    switch (t) {
    case Task::predict: return "predict";
    case Task::lqr: return "lqr";
    case Task::servo: return "servo";
    case Task::mpc: return "mpc";
    }
    return "?";
}

inline Task task_from_string(const std::string& s) {
    for (Task t : kAllTasks)
        if (s == to_string(t)) return t;
    throw UsageError("unknown task '" + s + "'");
}

// Everything the four tasks need besides the plant and the model. Matrices
// indexed by state component are padded with zeros up to N_x.
struct TaskSettings {
    double dt = 0.05;
    double h = 0.01;
    double success_radius = 0.1;

    Vector predict_x0;
    std::size_t predict_horizon = 100;

    Matrix q_state;   // n x n
    Matrix r_w;       // p x p
    Vector lqr_x0;
    std::size_t lqr_steps = 400;

    Matrix servo_c;   // q x n
    Vector servo_reference;
    double w_nu = 100.0;
    Vector servo_x0;
    std::size_t servo_steps = 400;

    Eigen::Index mpc_component = 0;
    double mpc_rate_weight = 1.0;
    std::size_t mpc_horizon = 20;
    double mpc_switch_time = 10.0;
    double mpc_before = -1.0;
    double mpc_after = 1.0;
    Vector mpc_x0;
    std::size_t mpc_steps = 400;

    // Duffing/pendulum defaults: Q_state = diag(100, 1), R_w = 1, C = [1 0], r = 1.
    static TaskSettings planar(Eigen::Index n, Eigen::Index p) {
        TaskSettings s;
        s.predict_x0 = Vector::Zero(n);
        s.predict_x0(0) = 0.4;
        s.q_state = Matrix::Identity(n, n);
        s.q_state(0, 0) = 100.0;
        s.r_w = Matrix::Identity(p, p);
        s.lqr_x0 = Vector::Constant(n, 1.0);
        s.servo_c = Matrix::Zero(1, n);
        s.servo_c(0, 0) = 1.0;
        s.servo_reference = Vector::Ones(1);
        s.servo_x0 = Vector::Zero(n);
        s.mpc_x0 = Vector::Zero(n);
        return s;
    }

    void validate(Eigen::Index n, Eigen::Index p) const {
        if (!(dt > 0.0) || !(h > 0.0)) throw UsageError("tasks: dt and h must be > 0");
        if (!(success_radius > 0.0)) throw UsageError("tasks: success_radius must be > 0");
        auto vec = [&](const Vector& v, const char* what) {
            if (v.size() != n) throw UsageError(std::string("tasks: ") + what + " must have " + std::to_string(n) + " entries");
        };
        vec(predict_x0, "predict x0");
        vec(lqr_x0, "lqr x0");
        vec(servo_x0, "servo x0");
        vec(mpc_x0, "mpc x0");
        require_shape(q_state, n, n, "tasks Q_state");
        require_shape(r_w, p, p, "tasks R_w");
        if (servo_c.cols() != n || servo_c.rows() < 1) throw UsageError("tasks: servo C must have n columns");
        if (servo_reference.size() != servo_c.rows()) throw UsageError("tasks: servo reference size must match C rows");
        if (mpc_component < 0 || mpc_component >= n) throw UsageError("tasks: mpc component out of range");
        if (mpc_horizon < 1) throw UsageError("tasks: mpc horizon must be >= 1");
    }

    [[nodiscard]] long mpc_switch_step() const { return std::lround(mpc_switch_time / dt); }
};

inline Matrix pad_columns(const Matrix& m, Eigen::Index cols) {
    Matrix out = Matrix::Zero(m.rows(), cols);
    out.leftCols(m.cols()) = m;
    return out;
}

struct TaskRecord {
    Task task = Task::predict;
    bool ok = false;       // completed without divergence and met the success threshold
    bool diverged = false;
    double metric = 0.0;   // see task_metric_name
    std::string error;     // non-empty when the task could not run
    Matrix states;         // true-plant trajectory (closed loop) or model prediction
    Matrix reference;      // predict: true trajectory; tracking tasks: reference per row
};

inline const char* task_metric_name(Task t) {
    switch (t) {
    case Task::predict: return "max_state_error";
    case Task::lqr: return "final_state_norm";
    case Task::servo: return "final_tracking_error";
    case Task::mpc: return "final_tracking_error";
    }
    return "?";
}

inline Trajectory true_trajectory(const DynSystem& sys, const Vector& chi0, const Matrix& inputs, std::size_t horizon,
                                  double dt, double h) {
    Trajectory t;
    std::vector<Vector> xs{chi0};
    for (std::size_t k = 0; k < horizon; ++k) {
        Vector next;
        try {
            next = sample_map(sys, xs.back(), inputs.row(static_cast<Eigen::Index>(k)).transpose(), dt, h);
        } catch (const DivergenceError&) {
            t.diverged = true;
            break;
        }
        if (next.cwiseAbs().maxCoeff() > kRolloutDivergence) {
            t.diverged = true;
            break;
        }
        xs.push_back(std::move(next));
    }
    t.states.resize(static_cast<Eigen::Index>(xs.size()), chi0.size());
    for (std::size_t k = 0; k < xs.size(); ++k) t.states.row(static_cast<Eigen::Index>(k)) = xs[k].transpose();
    return t;
}

inline Controller synthesize(Task task, const EmbeddingModel& m, const TaskSettings& s) {
    const auto nx = m.embed_dim();
    const auto p = m.input_dim();
    switch (task) {
    case Task::lqr:
        return design_lqr(m.A, m.B, embedded_state_weight(s.q_state, nx), s.r_w);
    case Task::servo: {
        ServoWeights w{embedded_state_weight(s.q_state, nx), s.w_nu, s.r_w};
        return design_servo(m.A, m.B, pad_columns(s.servo_c, nx), s.servo_reference, w);
    }
    case Task::mpc: {
        auto spec = MpcSpec::tracking(nx, p, s.mpc_component, s.mpc_rate_weight, s.mpc_horizon,
                                      step_reference(s.mpc_switch_step(), s.mpc_before, s.mpc_after));
        return std::make_shared<const MpcController>(std::move(spec), m.A, m.B);
    }
    case Task::predict: break;
    }
    throw UsageError("synthesize: predict is not a control task");
}

inline TaskRecord run_task(Task task, const DynSystem& sys, const EmbeddingModel& m, const TaskSettings& s) {
    s.validate(sys.state_dim, sys.input_dim);
    TaskRecord r;
    r.task = task;
    try {
        if (task == Task::predict) {
            const Matrix u = Matrix::Zero(static_cast<Eigen::Index>(s.predict_horizon), sys.input_dim);
            const auto pred = rollout(m, s.predict_x0, u, s.predict_horizon);
            const auto truth = true_trajectory(sys, s.predict_x0, u, s.predict_horizon, s.dt, s.h);
            r.states = pred.states;
            r.reference = truth.states;
            r.diverged = pred.diverged || truth.diverged;
            const auto rows = std::min(pred.states.rows(), truth.states.rows());
            r.metric = (pred.states.topRows(rows) - truth.states.topRows(rows)).rowwise().norm().maxCoeff();
            r.ok = !r.diverged && r.metric < s.success_radius;
            return r;
        }
        const Controller c = synthesize(task, m, s);
        const Vector& x0 = task == Task::lqr ? s.lqr_x0 : task == Task::servo ? s.servo_x0 : s.mpc_x0;
        const std::size_t steps = task == Task::lqr ? s.lqr_steps : task == Task::servo ? s.servo_steps : s.mpc_steps;
        const auto run = simulate_closed_loop(sys, m, c, x0, steps, s.dt, s.h);
        r.states = run.states;
        r.diverged = run.diverged;
        const Vector last = run.states.bottomRows(1).transpose();
        if (task == Task::lqr) {
            r.metric = last.norm();
        } else if (task == Task::servo) {
            r.reference = s.servo_reference.transpose().replicate(run.states.rows(), 1);
            r.metric = (s.servo_c * last - s.servo_reference).norm();
        } else {
            const auto ref = step_reference(s.mpc_switch_step(), s.mpc_before, s.mpc_after);
            r.reference.resize(run.states.rows(), 1);
            for (Eigen::Index k = 0; k < run.states.rows(); ++k) r.reference(k, 0) = ref(k);
            r.metric = std::abs(last(s.mpc_component) - r.reference(run.states.rows() - 1, 0));
        }
        r.ok = !r.diverged && r.metric < s.success_radius;
    } catch (const Error& e) {
        r.ok = false;
        r.error = std::string(e.category()) + ": " + e.what();
    }
    return r;
}

} // namespace koop
