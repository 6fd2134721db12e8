#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "koop/dynamics/system.hpp"

namespace koop::systems {

// z'' = -0.5 z' + z - 4 z^3 + u; state (z, z').
inline DynSystem duffing() {
    DynSystem s;
    s.name = "duffing";
    s.state_dim = 2;
    s.input_dim = 1;
    s.rhs = [](const Vector& z, const Vector& u) {
        Vector d(2);
        d << z(1), -0.5 * z(1) + z(0) - 4.0 * z(0) * z(0) * z(0) + u(0);
        return d;
    };
    s.fixed_points = {Vector::Zero(2), Vector{{0.5, 0.0}}, Vector{{-0.5, 0.0}}};
    return s;
}

// z'' = -sin z + u.
inline DynSystem pendulum() {
    DynSystem s;
    s.name = "pendulum";
    s.state_dim = 2;
    s.input_dim = 1;
    s.rhs = [](const Vector& z, const Vector& u) {
        Vector d(2);
        d << z(1), -std::sin(z(0)) + u(0);
        return d;
    };
    s.fixed_points = {Vector::Zero(2), Vector{{std::numbers::pi, 0.0}}, Vector{{-std::numbers::pi, 0.0}}};
    return s;
}

// Rotational/translational actuator with coupling eps in (0, 1).
inline DynSystem rtac(double eps = 0.2) {
    if (!(eps > 0.0 && eps < 1.0)) throw UsageError("rtac: coupling eps must lie in (0, 1)");
    DynSystem s;
    s.name = "rtac";
    s.state_dim = 4;
    s.input_dim = 1;
    s.parameters["eps"] = eps;
    s.rhs = [eps](const Vector& z, const Vector& u) {
        const double c = std::cos(z(2));
        const double den = 1.0 - eps * eps * c * c;
        const double coupling = eps * z(3) * z(3) * std::sin(z(2));
        Vector d(4);
        d << z(1), (-z(0) + coupling) / den - eps * c / den * u(0), z(3), (z(0) - coupling) / den + u(0) / den;
        return d;
    };
    s.fixed_points = {Vector::Zero(4), Vector{{0.0, 0.0, 1.0, 0.0}}, Vector{{0.0, 0.0, -2.0, 0.0}}};
    return s;
}

// Discrete map whose Jacobian at the origin is [[0.5, a], [b, 0.2]]; normal iff a == b.
inline DynSystem normality_example(double a = 0.3, double b = -0.3) {
    DynSystem s;
    s.name = "example44";
    s.state_dim = 2;
    s.input_dim = 1;
    s.kind = TimeKind::discrete;
    s.parameters["a"] = a;
    s.parameters["b"] = b;
    s.rhs = [a, b](const Vector& z, const Vector& u) {
        Vector d(2);
        d << 0.5 * z(0) + a * z(1) + std::cos(z(0)) - 1.0 + 0.5 * u(0),
            b * z(0) + 0.2 * z(1) + std::cos(z(1)) - 1.0;
        return d;
    };
    s.fixed_points = {Vector::Zero(2)};
    return s;
}

// chi+ = sin(chi) + u.
inline DynSystem sine_map() {
    DynSystem s;
    s.name = "example24";
    s.state_dim = 1;
    s.input_dim = 1;
    s.kind = TimeKind::discrete;
    s.rhs = [](const Vector& z, const Vector& u) {
        Vector d(1);
        d << std::sin(z(0)) + u(0);
        return d;
    };
    s.fixed_points = {Vector::Zero(1)};
    return s;
}

// z' = A z + B u.
inline DynSystem linear_continuous(const Matrix& a, const Matrix& b, std::string name = "linear_ct") {
    if (a.rows() != a.cols() || b.rows() != a.rows()) throw UsageError("linear_continuous: inconsistent A/B");
    DynSystem s;
    s.name = std::move(name);
    s.state_dim = a.rows();
    s.input_dim = b.cols();
    s.rhs = [a, b](const Vector& z, const Vector& u) -> Vector { return a * z + b * u; };
    s.fixed_points = {Vector::Zero(a.rows())};
    return s;
}

// z+ = A z + B u.
inline DynSystem linear_discrete(const Matrix& a, const Matrix& b, std::string name = "linear_dt") {
    if (a.rows() != a.cols() || b.rows() != a.rows()) throw UsageError("linear_discrete: inconsistent A/B");
    DynSystem s;
    s.name = std::move(name);
    s.state_dim = a.rows();
    s.input_dim = b.cols();
    s.kind = TimeKind::discrete;
    s.rhs = [a, b](const Vector& z, const Vector& u) -> Vector { return a * z + b * u; };
    s.fixed_points = {Vector::Zero(a.rows())};
    return s;
}

// Lookup for the named benchmark systems; params may carry rtac "eps" or example44 "a"/"b".
inline DynSystem by_name(const std::string& name, const std::map<std::string, double>& params = {}) {
    auto get = [&](const char* key, double dflt) {
        auto it = params.find(key);
        return it == params.end() ? dflt : it->second;
    };
    if (name == "duffing") return duffing();
    if (name == "pendulum") return pendulum();
    if (name == "rtac") return rtac(get("eps", 0.2));
    if (name == "example44") return normality_example(get("a", 0.3), get("b", -0.3));
    if (name == "example24") return sine_map();
    throw UsageError("unknown system '" + name + "' (expected duffing, pendulum, rtac, example44, example24)");
}

} // namespace koop::systems
