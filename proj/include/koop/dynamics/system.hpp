#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "koop/numerics/matrix.hpp"

namespace koop {

enum class TimeKind { continuous, discrete };

// A benchmark plant. Continuous systems provide the drift dz/dt = f(z, u);
// discrete systems provide the map z+ = F(z, u) directly.
struct DynSystem {
    std::string name;
    Eigen::Index state_dim = 0;
    Eigen::Index input_dim = 0;
    TimeKind kind = TimeKind::continuous;
    std::function<Vector(const Vector&, const Vector&)> rhs;
    std::vector<Vector> fixed_points;
    std::map<std::string, double> parameters;

    [[nodiscard]] bool is_continuous() const { return kind == TimeKind::continuous; }

    [[nodiscard]] Vector evaluate(const Vector& z, const Vector& u) const {
        if (z.size() != state_dim || u.size() != input_dim)
            throw UsageError(name + ": expected state/input sizes " + std::to_string(state_dim) + "/" +
                             std::to_string(input_dim) + ", got " + std::to_string(z.size()) + "/" +
                             std::to_string(u.size()));
        Vector out = rhs(z, u);
        if (out.size() != state_dim)
            throw NumericalError(name + ": right-hand side returned " + std::to_string(out.size()) + " entries");
        return out;
    }
};

} // namespace koop
