#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "koop/control/closed_loop.hpp"
#include "koop/eval/contour.hpp"
#include "koop/parallel.hpp"

namespace koop {

enum class BasinOutcome { converged, steady_error, diverged };

inline const char* to_string(BasinOutcome o) {
    switch (o) {
    case BasinOutcome::converged: return "converged";
    case BasinOutcome::steady_error: return "steady-error";
    case BasinOutcome::diverged: return "diverged";
    }
    return "?";
}

struct BasinOptions {
    std::size_t steps = 400;
    double success_radius = 0.1;
    double dt = 0.05;
    double h = 0.01;
    unsigned threads = 1;
};

struct BasinResult {
    std::vector<Vector> initial;
    std::vector<BasinOutcome> outcomes;

    [[nodiscard]] std::size_t count(BasinOutcome o) const {
        std::size_t c = 0;
        for (auto x : outcomes) c += (x == o);
        return c;
    }
};

inline std::vector<Vector> grid_points(const GridSpec& grid) {
    std::vector<Vector> pts(grid.size());
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = grid.point(i);
    return pts;
}

inline BasinOutcome classify(const ClosedLoopRun& run, double radius) {
    if (run.diverged) return BasinOutcome::diverged;
    return run.states.bottomRows(1).norm() < radius ? BasinOutcome::converged : BasinOutcome::steady_error;
}

inline BasinResult basin_estimate(const DynSystem& sys, const EmbeddingModel& model, const Controller& controller,
                                  const std::vector<Vector>& initial, const BasinOptions& opt = {}) {
    if (!(opt.success_radius > 0.0)) throw UsageError("basin_estimate: success_radius must be > 0");
    BasinResult r;
    r.initial = initial;
    r.outcomes.resize(initial.size());
    parallel_for(initial.size(), opt.threads, [&](std::size_t i) {
        const auto run = simulate_closed_loop(sys, model, controller, initial[i], opt.steps, opt.dt, opt.h);
        r.outcomes[i] = classify(run, opt.success_radius);
    });
    return r;
}

inline std::string basin_csv(const BasinResult& r, Eigen::Index n) {
    std::ostringstream os;
    for (Eigen::Index j = 0; j < n; ++j) os << "x0_" << j + 1 << ",";
    os << "outcome\n";
    for (std::size_t i = 0; i < r.initial.size(); ++i) {
        for (Eigen::Index j = 0; j < n; ++j) os << io::fmt(r.initial[i](j)) << ",";
        os << to_string(r.outcomes[i]) << "\n";
    }
    return os.str();
}

} // namespace koop
