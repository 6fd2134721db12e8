#pragma once

#include <cmath>
#include <sstream>

#include "koop/dynamics/system.hpp"

namespace koop {

inline std::string vec_str(const Vector& v) {
    std::ostringstream os;
    os << "[";
    for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v(i);
    os << "]";
    return os.str();
}

// Classical RK4 with u held constant over the step.
inline Vector rk4_step(const DynSystem& sys, const Vector& z, const Vector& u, double h) {
    if (!(h > 0.0)) throw UsageError("rk4_step: step size must be > 0");
    if (!sys.is_continuous()) throw UsageError("rk4_step: " + sys.name + " is a discrete-time map");
    const Vector k1 = sys.evaluate(z, u);
    const Vector k2 = sys.evaluate(z + 0.5 * h * k1, u);
    const Vector k3 = sys.evaluate(z + 0.5 * h * k2, u);
    const Vector k4 = sys.evaluate(z + h * k3, u);
    Vector next = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite()) throw DivergenceError(sys.name + ": RK4 produced non-finite state " + vec_str(next));
    return next;
}

// Number of RK4 substeps per sampling period; dt must be an integer multiple of h.
inline long substeps(double dt, double h) {
    if (!(dt > 0.0) || !(h > 0.0)) throw UsageError("sample_map: dt and h must be > 0");
    const double ratio = dt / h;
    const long n = std::lround(ratio);
    if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * std::max(1.0, ratio))
        throw UsageError("sample_map: dt is not an integer multiple of h");
    return n;
}

// The sampled map F: dt/h RK4 substeps for continuous plants, one map
// application for discrete ones.
inline Vector sample_map(const DynSystem& sys, const Vector& chi, const Vector& u, double dt, double h) {
    if (!sys.is_continuous()) {
        Vector next = sys.evaluate(chi, u);
        if (!next.allFinite()) throw DivergenceError(sys.name + ": map produced non-finite state " + vec_str(next));
        return next;
    }
    const long n = substeps(dt, h);
    Vector z = chi;
    for (long i = 0; i < n; ++i) z = rk4_step(sys, z, u, h);
    return z;
}

} // namespace koop
