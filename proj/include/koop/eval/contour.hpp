#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "koop/dynamics/integrator.hpp"
#include "koop/embedding/model.hpp"
#include "koop/io/format.hpp"
#include "koop/parallel.hpp"

namespace koop {

struct GridAxis {
    Eigen::Index component = 0;
    double lo = -2.0;
    double hi = 2.0;
    std::size_t resolution = 101;

    [[nodiscard]] double at(std::size_t i) const {
        if (resolution == 1) return lo;
        return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(resolution - 1);
    }
};

// One or two plotted axes over the state; the remaining components are held
// at `base` (e.g. z2 = z4 = 0 for the four-dimensional plant).
struct GridSpec {
    std::vector<GridAxis> axes;
    Vector base;

    void validate(Eigen::Index n) const {
        if (axes.empty() || axes.size() > 2) throw UsageError("GridSpec: one or two axes required");
        if (base.size() != n) throw UsageError("GridSpec: base point must have n entries");
        for (const auto& a : axes) {
            if (a.component < 0 || a.component >= n) throw UsageError("GridSpec: axis component out of range");
            if (a.resolution < 1) throw UsageError("GridSpec: resolution must be >= 1");
            if (!std::isfinite(a.lo) || !std::isfinite(a.hi) || a.lo > a.hi) throw UsageError("GridSpec: invalid range");
            if (a.resolution == 1 && a.lo != a.hi) throw UsageError("GridSpec: a single-point axis needs lo == hi");
        }
        if (axes.size() == 2 && axes[0].component == axes[1].component)
            throw UsageError("GridSpec: axes must use different components");
    }

    [[nodiscard]] std::size_t size() const {
        std::size_t s = 1;
        for (const auto& a : axes) s *= a.resolution;
        return s;
    }

    // Row-major over axes: the last axis varies fastest.
    [[nodiscard]] Vector point(std::size_t idx) const {
        Vector x = base;
        for (std::size_t a = axes.size(); a-- > 0;) {
            const auto& ax = axes[a];
            x(ax.component) = ax.at(idx % ax.resolution);
            idx /= ax.resolution;
        }
        return x;
    }

    static GridSpec square(Eigen::Index n, double lo, double hi, std::size_t res) {
        GridSpec g;
        g.base = Vector::Zero(n);
        g.axes = {{0, lo, hi, res}, {1, lo, hi, res}};
        return g;
    }
};

enum class ErrorMetric { state_prediction, modeling };

struct ContourResult {
    GridSpec grid;
    std::vector<Vector> points;
    std::vector<double> errors;

    [[nodiscard]] double mean() const {
        double s = 0.0;
        for (double e : errors) s += e;
        return errors.empty() ? 0.0 : s / static_cast<double>(errors.size());
    }
    [[nodiscard]] double max() const {
        double m = 0.0;
        for (double e : errors) m = std::max(m, e);
        return m;
    }
};

inline double one_step_error(const EmbeddingModel& m, const DynSystem& sys, const Vector& chi, const Vector& u,
                             ErrorMetric metric, double dt, double h) {
    const Vector y = sample_map(sys, chi, u, dt, h);
    return metric == ErrorMetric::modeling ? modeling_error(m, chi, u, y) : state_prediction_error(m, chi, u, y);
}

inline ContourResult error_contour(const EmbeddingModel& m, const DynSystem& sys, const GridSpec& grid,
                                   const Vector& u_fixed, ErrorMetric metric, double dt, double h,
                                   unsigned threads = 1) {
    grid.validate(sys.state_dim);
    if (u_fixed.size() != sys.input_dim) throw UsageError("error_contour: u_fixed must have p entries");
    ContourResult r;
    r.grid = grid;
    r.points.resize(grid.size());
    r.errors.resize(grid.size());
    parallel_for(grid.size(), threads, [&](std::size_t i) {
        r.points[i] = grid.point(i);
        r.errors[i] = one_step_error(m, sys, r.points[i], u_fixed, metric, dt, h);
    });
    return r;
}

// `x,y,err` for two-axis grids, `x,err` for one axis.
inline std::string contour_csv(const ContourResult& r) {
    std::ostringstream os;
    const auto& axes = r.grid.axes;
    os << (axes.size() == 2 ? "x,y,err\n" : "x,err\n");
    for (std::size_t i = 0; i < r.points.size(); ++i) {
        os << io::fmt(r.points[i](axes[0].component));
        if (axes.size() == 2) os << "," << io::fmt(r.points[i](axes[1].component));
        os << "," << io::fmt(r.errors[i]) << "\n";
    }
    return os.str();
}

} // namespace koop
