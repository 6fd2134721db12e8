#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include <unsupported/Eigen/KroneckerProduct>

#include "koop/cli/verify.hpp"
#include "koop/control/closed_loop.hpp"
#include "koop/dynamics/systems.hpp"

using namespace koop;

namespace {

Matrix uniform(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double s = 1.0) {
    std::uniform_real_distribution<double> uni(-s, s);
    return Matrix::NullaryExpr(r, c, [&] { return uni(rng); });
}

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

// Cost of an input sequence, evaluated by simulating the model forward.
double mpc_cost(const MpcSpec& s, const Matrix& a, const Matrix& b, Vector xi, Vector u_prev, long k_now,
                const Vector& useq) {
    const auto p = b.cols();
    double cost = 0.0;
    for (std::size_t k = 0; k < s.horizon; ++k) {
        const Vector u = useq.segment(static_cast<Eigen::Index>(k) * p, p);
        xi = a * xi + b * u;
        const Vector e = xi - s.reference(k_now + static_cast<long>(k) + 1) * s.reference_dir;
        const Vector du = u - u_prev;
        cost += e.dot(s.state_weight * e) + u.dot(s.input_weight * u) + du.dot(s.rate_weight * du);
        u_prev = u;
    }
    return cost;
}

} // namespace

TEST(Dare, ScalarGoldenRatio) {
    const auto c = verify::scalar_dare();
    EXPECT_TRUE(c.pass) << c.detail;
}

TEST(Dare, RandomResiduals) {
    const auto c = verify::dare_residuals(20, 7);
    EXPECT_TRUE(c.pass) << c.detail;
}

// B = 0: the Riccati equation collapses to the Stein equation P = A'PA + Q.
TEST(Dare, ZeroInputIsLyapunov) {
    std::mt19937_64 rng(1);
    Matrix a = uniform(3, 3, rng);
    a *= 0.7 / spectral_radius(a);
    const Matrix q = Matrix::Identity(3, 3);
    const auto sol = solve_dare(a, Matrix::Zero(3, 1), q, scalar(1.0));
    const Matrix at = a.transpose();
    const Matrix lhs = Matrix::Identity(9, 9) - Matrix(Eigen::kroneckerProduct(at, at));
    const Vector vq = Eigen::Map<const Vector>(q.data(), 9);
    const Vector vp = lhs.partialPivLu().solve(vq);
    const Matrix p = Eigen::Map<const Matrix>(vp.data(), 3, 3);
    EXPECT_LT((sol.P - p).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT(sol.gain.norm(), 1e-12);
}

TEST(Dare, UnstabilizableIsSynthesisError) {
    EXPECT_THROW(solve_dare(scalar(2.0), scalar(0.0), scalar(1.0), scalar(1.0)), SynthesisError);
}

TEST(Dare, IndefiniteInputWeightIsUsageError) {
    EXPECT_THROW(solve_dare(scalar(0.5), scalar(1.0), scalar(1.0), scalar(-1.0)), UsageError);
}

TEST(Dare, GainStabilizesRandomPlant) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 10; ++t) {
        const Matrix a = uniform(4, 4, rng, 1.5);
        const Matrix b = uniform(4, 2, rng);
        const auto sol = solve_dare(a, b, Matrix::Identity(4, 4), Matrix::Identity(2, 2));
        EXPECT_LT(spectral_radius(a + b * sol.gain), 1.0);
        EXPECT_EQ((sol.gain + sol.K).norm(), 0.0);
        EXPECT_LT(dare_residual(a, b, Matrix::Identity(4, 4), Matrix::Identity(2, 2), sol.P),
                  1e-8 * std::max(1.0, inf_norm(sol.P)));
    }
}

TEST(Lqr, EmbeddedWeightPadsWithZeros) {
    Matrix qs(2, 2);
    qs << 100, 0, 0, 1;
    const Matrix q = embedded_state_weight(qs, 4);
    EXPECT_EQ(q.topLeftCorner(2, 2), qs);
    EXPECT_EQ(q.bottomRows(2).norm() + q.rightCols(2).norm(), 0.0);
    EXPECT_THROW(embedded_state_weight(Matrix::Identity(5, 5), 4), UsageError);
}

TEST(Lqr, ClosedLoopDrivesLtiPlantToOrigin) {
    std::mt19937_64 rng(8);
    Matrix a = uniform(3, 3, rng);
    a *= 1.2 / spectral_radius(a);
    const Matrix b = uniform(3, 2, rng);
    const auto sys = systems::linear_discrete(a, b);
    const EmbeddingModel m(FeatureMap::identity(3), a, b);
    const auto ctl = design_lqr(a, b, Matrix::Identity(3, 3), Matrix::Identity(2, 2));
    const Vector x0 = uniform(3, 1, rng).normalized();
    const auto run = simulate_closed_loop(sys, m, ctl, x0, 50, 1.0, 1.0);
    ASSERT_EQ(run.states.rows(), 51);
    EXPECT_FALSE(run.diverged);
    EXPECT_LT(run.states.row(50).norm(), 1e-3);
    for (Eigen::Index k = 10; k <= 50; k += 10) EXPECT_LT(run.states.row(k).norm(), run.states.row(k - 10).norm());
}

TEST(Servo, ScalarPlantReachesReference) {
    const Matrix a = scalar(0.5), b = scalar(1.0), c = scalar(1.0);
    const auto sys = systems::linear_discrete(a, b);
    const EmbeddingModel m(FeatureMap::identity(1), a, b);
    const auto servo = design_servo(a, b, c, Vector::Ones(1), {scalar(1.0), 100.0, scalar(1.0)});
    EXPECT_LT(servo.closed_loop_radius, 1.0);
    const auto run = simulate_closed_loop(sys, m, servo, Vector::Zero(1), 200, 1.0, 1.0);
    EXPECT_LT(std::abs(run.states(200, 0) - 1.0), 1e-6);
}

TEST(Servo, ZeroReferenceFromRestStaysAtRest) {
    const Matrix a = scalar(0.9), b = scalar(0.3);
    const auto sys = systems::linear_discrete(a, b);
    const EmbeddingModel m(FeatureMap::identity(1), a, b);
    const auto servo = design_servo(a, b, scalar(1.0), Vector::Zero(1), {scalar(1.0), 100.0, scalar(1.0)});
    const auto run = simulate_closed_loop(sys, m, servo, Vector::Zero(1), 50, 1.0, 1.0);
    EXPECT_EQ(run.states.norm() + run.inputs.norm(), 0.0);
}

TEST(Servo, RejectsShapeErrors) {
    const Matrix a = Matrix::Identity(2, 2) * 0.5, b = Matrix::Ones(2, 1);
    EXPECT_THROW(design_servo(a, b, Matrix::Ones(1, 3), Vector::Ones(1), {Matrix::Identity(2, 2), 100, scalar(1)}),
                 UsageError);
    EXPECT_THROW(design_servo(a, b, Matrix::Ones(1, 2), Vector::Ones(2), {Matrix::Identity(2, 2), 100, scalar(1)}),
                 UsageError);
}

TEST(Mpc, OneStepClosedForm) {
    const double a = 0.8, b = 0.5, r = 2.0, ref = 1.5, x = 0.3, up = -0.2;
    const auto spec = MpcSpec::tracking(1, 1, 0, r, 1, [&](long) { return ref; });
    const auto s = mpc_step(spec, scalar(a), scalar(b), Vector::Constant(1, x), Vector::Constant(1, up), 0);
    const double expected = (b * (ref - a * x) + r * up) / (b * b + r);
    EXPECT_NEAR(s.u0(0), expected, 1e-12);
}

TEST(Mpc, ZeroStateZeroReferenceGivesZero) {
    std::mt19937_64 rng(3);
    const Matrix a = uniform(3, 3, rng), b = uniform(3, 2, rng);
    const auto spec = MpcSpec::tracking(3, 2, 1, 1.0, 20, [](long) { return 0.0; });
    EXPECT_EQ(mpc_step(spec, a, b, Vector::Zero(3), Vector::Zero(2), 0).u0.norm(), 0.0);
}

// Two-step problem: the condensed solution is a stationary point of the
// directly simulated cost and beats every nearby perturbation.
TEST(Mpc, TwoStepMatchesDirectMinimization) {
    std::mt19937_64 rng(4);
    const Matrix a = uniform(2, 2, rng), b = uniform(2, 1, rng);
    const auto spec = MpcSpec::tracking(2, 1, 0, 0.7, 2, step_reference(0, -1.0, 1.0));
    const Vector xi = uniform(2, 1, rng), up = uniform(1, 1, rng);
    const MpcController ctl(spec, a, b);
    const Vector u = ctl.solve_sequence(xi, up, 0);
    const double c0 = mpc_cost(spec, a, b, xi, up, 0, u);
    for (int i = 0; i < 2; ++i) {
        const double h = 1e-5;
        Vector p = u, m = u;
        p(i) += h;
        m(i) -= h;
        EXPECT_NEAR((mpc_cost(spec, a, b, xi, up, 0, p) - mpc_cost(spec, a, b, xi, up, 0, m)) / (2 * h), 0.0, 1e-6);
    }
    for (int t = 0; t < 100; ++t) EXPECT_GE(mpc_cost(spec, a, b, xi, up, 0, u + uniform(2, 1, rng, 0.1)), c0);
    // Objective from the condensed form agrees with simulation up to a constant.
    const Vector f = ctl.linear_term(xi, up, 0);
    const Vector v = uniform(2, 1, rng);
    EXPECT_NEAR(ctl.objective(v, f) - ctl.objective(u, f),
                0.5 * (mpc_cost(spec, a, b, xi, up, 0, v) - c0), 1e-10 * std::max(1.0, c0));
}

// Without a reference the unconstrained law is linear in (xi, u_prev).
TEST(Mpc, Superposition) {
    std::mt19937_64 rng(5);
    const Matrix a = uniform(3, 3, rng), b = uniform(3, 1, rng);
    const MpcController ctl(MpcSpec::tracking(3, 1, 2, 1.0, 20, [](long) { return 0.0; }), a, b);
    const Vector x1 = uniform(3, 1, rng), x2 = uniform(3, 1, rng);
    const Vector u1 = uniform(1, 1, rng), u2 = uniform(1, 1, rng);
    const Vector s = ctl.step(x1 + 2.0 * x2, u1 - u2, 7).u0;
    const Vector parts = ctl.step(x1, u1, 7).u0 + 2.0 * ctl.step(x2, Vector::Zero(1), 7).u0 - ctl.step(Vector::Zero(3), u2, 7).u0;
    EXPECT_LT((s - parts).norm(), 1e-10);
}

TEST(Mpc, LongHorizonApproachesLqr) {
    std::mt19937_64 rng(6);
    const Matrix a = uniform(3, 3, rng, 0.8), b = uniform(3, 1, rng);
    MpcSpec spec;
    spec.horizon = 200;
    spec.state_weight = Matrix::Identity(3, 3);
    spec.reference_dir = Vector::Zero(3);
    spec.rate_weight = Matrix::Zero(1, 1);
    spec.input_weight = Matrix::Identity(1, 1);
    const MpcController ctl(spec, a, b);
    const auto lqr = design_lqr(a, b, Matrix::Identity(3, 3), Matrix::Identity(1, 1));
    for (int t = 0; t < 5; ++t) {
        const Vector xi = uniform(3, 1, rng);
        EXPECT_LT((ctl.step(xi, Vector::Zero(1), 0).u0 - lqr.gain * xi).norm(), 1e-6);
    }
}

TEST(Mpc, BoxConstraintsAreRespectedAndOptimal) {
    std::mt19937_64 rng(7);
    const Matrix a = uniform(2, 2, rng), b = uniform(2, 1, rng);
    auto spec = MpcSpec::tracking(2, 1, 0, 0.1, 10, [](long) { return 3.0; });
    spec.input_lo = Vector::Constant(1, -0.5);
    spec.input_hi = Vector::Constant(1, 0.5);
    const MpcController ctl(spec, a, b);
    const Vector xi = uniform(2, 1, rng), up = Vector::Zero(1);
    const Vector u = ctl.solve_sequence(xi, up, 0);
    EXPECT_LE(u.maxCoeff(), 0.5 + 1e-12);
    EXPECT_GE(u.minCoeff(), -0.5 - 1e-12);
    const double c0 = mpc_cost(spec, a, b, xi, up, 0, u);
    for (int t = 0; t < 200; ++t) {
        const Vector v = (u + uniform(10, 1, rng, 0.05)).cwiseMax(-0.5).cwiseMin(0.5);
        EXPECT_GE(mpc_cost(spec, a, b, xi, up, 0, v), c0 - 1e-9);
    }
}

TEST(Mpc, ScalarBoxIsClampedClosedForm) {
    const double a = 0.8, b = 0.5, r = 2.0, ref = 10.0, x = 0.0;
    auto spec = MpcSpec::tracking(1, 1, 0, r, 1, [&](long) { return ref; });
    spec.input_lo = Vector::Constant(1, -1.0);
    spec.input_hi = Vector::Constant(1, 1.0);
    const auto s = mpc_step(spec, scalar(a), scalar(b), Vector::Constant(1, x), Vector::Zero(1), 0);
    EXPECT_NEAR(s.u0(0), std::clamp(b * (ref - a * x) / (b * b + r), -1.0, 1.0), 1e-12);
}

TEST(Mpc, StepReferenceSwitchesAfterSwitchStep) {
    const auto r = step_reference(200);
    EXPECT_EQ(r(0), -1.0);
    EXPECT_EQ(r(200), -1.0);
    EXPECT_EQ(r(201), 1.0);
}

TEST(ClosedLoop, ControllerSeesReembeddedTrueState) {
    const auto sys = systems::duffing();
    const EmbeddingModel m(FeatureMap::monomial(2, 2), Matrix::Identity(5, 5) * 0.9, Matrix::Ones(5, 1) * 0.1);
    const LqrController zero{Matrix::Zero(1, 5)};
    Vector x0(2);
    x0 << 0.3, -0.2;
    const auto run = simulate_closed_loop(sys, m, zero, x0, 20, 0.05, 0.01);
    ASSERT_EQ(run.embedded.rows(), run.states.rows());
    for (Eigen::Index k = 0; k < run.states.rows(); ++k)
        EXPECT_LT((run.embedded.row(k).transpose() - m.embed(run.states.row(k).transpose())).norm(), 1e-15);
    // Zero gain reproduces the open-loop plant.
    Vector chi = x0;
    for (Eigen::Index k = 0; k < 20; ++k) chi = sample_map(sys, chi, Vector::Zero(1), 0.05, 0.01);
    EXPECT_LT((run.states.row(20).transpose() - chi).norm(), 1e-14);
}

TEST(ClosedLoop, DivergenceTruncatesAndFlags) {
    const auto sys = systems::linear_discrete(scalar(3.0), scalar(1.0));
    const EmbeddingModel m(FeatureMap::identity(1), scalar(3.0), scalar(1.0));
    const auto run = simulate_closed_loop(sys, m, LqrController{Matrix::Zero(1, 1)}, Vector::Ones(1), 100, 1.0, 1.0);
    EXPECT_TRUE(run.diverged);
    EXPECT_LT(run.states.rows(), 101);
    EXPECT_LE(run.states.cwiseAbs().maxCoeff(), kClosedLoopDivergence);
    const auto csv = closed_loop_csv(run);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "k,t,chi_1,u_1,flag");
}

TEST(ClosedLoop, CsvLeavesFinalInputEmpty) {
    const auto sys = systems::linear_discrete(scalar(0.5), scalar(1.0));
    const EmbeddingModel m(FeatureMap::identity(1), scalar(0.5), scalar(1.0));
    const auto run = simulate_closed_loop(sys, m, LqrController{Matrix::Zero(1, 1)}, Vector::Ones(1), 3, 0.5, 0.5);
    const auto csv = closed_loop_csv(run);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
    const auto last = csv.substr(csv.rfind('\n', csv.size() - 2) + 1);
    EXPECT_EQ(last.rfind("3,1.5,", 0), 0u) << last;
    EXPECT_NE(last.find(",,0"), std::string::npos) << last;
}
