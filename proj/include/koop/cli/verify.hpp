#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "koop/control/lqr.hpp"
#include "koop/dynamics/systems.hpp"
#include "koop/embedding/model.hpp"

namespace koop::verify {

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

inline std::string num(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

// The sine-map model with features [chi, sin chi], A = [[0, 1], [0, 0]], B = [1, 0]'.
inline EmbeddingModel sine_map_model() {
    Matrix a(2, 2);
    a << 0.0, 1.0, 0.0, 0.0;
    Matrix b(2, 1);
    b << 1.0, 0.0;
    return EmbeddingModel(FeatureMap::sine(1), a, b);
}

inline Check sine_map_errors() {
    const auto sys = systems::sine_map();
    const auto m = sine_map_model();
    const double us[] = {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, std::numbers::pi};
    const double expected[] = {0.0, 0.479, 0.841, 0.997, 0.909, 0.598, 0.0};
    Check c{"modeling error of the sine map at chi = 0", true, ""};
    double worst = 0.0;
    for (int i = 0; i < 7; ++i) {
        const Vector chi = Vector::Zero(1);
        const Vector u = Vector::Constant(1, us[i]);
        const Vector y = sys.evaluate(chi, u);
        const double e = modeling_error(m, chi, u, y);
        worst = std::max(worst, std::abs(e - expected[i]));
    }
    c.pass = worst <= 1e-3;
    c.detail = "max deviation " + num(worst) + " (tol 1e-3)";
    return c;
}

inline Check scalar_dare() {
    const Matrix one = Matrix::Ones(1, 1);
    const auto r = solve_dare(one, one, one, one);
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    const double ep = std::abs(r.P(0, 0) - phi);
    const double eg = std::abs(std::abs(r.gain(0, 0)) - (phi - 1.0));
    Check c{"scalar DARE A = B = Q = R = 1", ep < 1e-7 && eg < 1e-7, ""};
    c.detail = "P = " + num(r.P(0, 0)) + ", gain = " + num(r.gain(0, 0));
    return c;
}

// Random DARE instances: residual of the returned P.
inline Check dare_residuals(std::size_t count = 20, std::uint64_t seed = 7) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::uniform_int_distribution<int> dim(1, 4);
    double worst = 0.0;
    for (std::size_t t = 0; t < count; ++t) {
        const int n = dim(rng), p = dim(rng);
        Matrix a = Matrix::NullaryExpr(n, n, [&] { return uni(rng); });
        const Matrix b = Matrix::NullaryExpr(n, p, [&] { return uni(rng); });
        // Fully actuated direction keeps (A, B) stabilizable with high probability;
        // scale A below 1.2 so the value iteration converges quickly.
        a *= 1.2 / std::max(1.0, spectral_radius(a));
        const Matrix q = Matrix::Identity(n, n);
        const Matrix r = Matrix::Identity(p, p);
        const auto sol = solve_dare(a, b, q, r);
        worst = std::max(worst, dare_residual(a, b, q, r, sol.P));
    }
    return {"DARE residual on " + std::to_string(count) + " random systems", worst < 1e-6, "max residual " + num(worst)};
}

// Tied oblique fit against a column-pivoted QR least-squares solve.
inline Check oblique_equals_least_squares(std::size_t count = 50, std::uint64_t seed = 11) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    double worst = 0.0;
    std::size_t compared = 0;
    for (std::size_t t = 0; t < count; ++t) {
        const auto n = std::uniform_int_distribution<Eigen::Index>(1, 4)(rng);
        const auto extra = std::uniform_int_distribution<Eigen::Index>(0, 6 - n)(rng);
        const auto p = std::uniform_int_distribution<Eigen::Index>(1, 2)(rng);
        const auto nx = n + extra;
        const auto m = std::uniform_int_distribution<Eigen::Index>(nx + p + 2, 50)(rng);
        const FeatureMap g = FeatureMap::augmented(n, extra, {5}, Activation::swish, rng);
        const Matrix x = Matrix::NullaryExpr(m, n, [&] { return uni(rng); });
        const Matrix u = Matrix::NullaryExpr(m, p, [&] { return uni(rng); });
        const Matrix y = Matrix::NullaryExpr(m, n, [&] { return uni(rng); });

        const auto fit = edmd_fit(x, u, y, g);
        Matrix psi(m, nx + p);
        psi << g.embed_batch(x), u;
        const Matrix gy = g.embed_batch(y);
        const Matrix kt = psi.colPivHouseholderQr().solve(gy);
        Matrix k(nx, nx + p);
        k << fit.A, fit.B;
        // Squaring into Psi^T Psi lets the pinv cutoff drop weak directions of
        // nearly collinear random features; the identity only holds at full rank.
        if (fit.rank < nx + p || fit.condition > 1e8) continue;
        ++compared;
        worst = std::max(worst, (k - kt.transpose()).norm() / std::max(1.0, kt.norm()));
        worst = std::max(worst, (psi * k.transpose() - psi * kt).norm() / std::max(1.0, gy.norm()));
    }
    return {"tied oblique fit equals least squares on random instances", worst < 1e-8 && 2 * compared >= count,
            "max relative distance " + num(worst) + " over " + std::to_string(compared) + " of " +
                std::to_string(count) + " full-rank instances"};
}

// Identity features on data from a random LTI map recover (A0, B0).
inline Check lti_recovery(std::uint64_t seed = 3) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const Eigen::Index n = 3, p = 2, m = 40;
    const Matrix a0 = Matrix::NullaryExpr(n, n, [&] { return 0.5 * uni(rng); });
    const Matrix b0 = Matrix::NullaryExpr(n, p, [&] { return uni(rng); });
    const Matrix x = Matrix::NullaryExpr(m, n, [&] { return uni(rng); });
    const Matrix u = Matrix::NullaryExpr(m, p, [&] { return uni(rng); });
    const Matrix y = x * a0.transpose() + u * b0.transpose();
    const auto fit = edmd_fit(x, u, y, FeatureMap::identity(n));
    const double err = std::max((fit.A - a0).norm(), (fit.B - b0).norm());
    return {"identity features recover a random LTI plant", err < 1e-8, "error " + num(err)};
}

inline std::vector<Check> run_all() {
    std::vector<Check> out;
    auto guarded = [&](const char* name, auto fn) {
        try {
            out.push_back(fn());
        } catch (const std::exception& e) {
            out.push_back({name, false, e.what()});
        }
    };
    guarded("sine map", [] { return sine_map_errors(); });
    guarded("scalar DARE", [] { return scalar_dare(); });
    guarded("DARE residuals", [] { return dare_residuals(); });
    guarded("least squares", [] { return oblique_equals_least_squares(); });
    guarded("LTI recovery", [] { return lti_recovery(); });
    return out;
}

} // namespace koop::verify
