#include <gtest/gtest.h>

#include <random>

#include "koop/dynamics/systems.hpp"
#include "koop/embedding/model_io.hpp"
#include "koop/eval/basin.hpp"
#include "koop/eval/forecast.hpp"
#include "koop/eval/sensitivity.hpp"

using namespace koop;

namespace {

Matrix uniform(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double s = 1.0) {
    std::uniform_real_distribution<double> uni(-s, s);
    return Matrix::NullaryExpr(r, c, [&] { return uni(rng); });
}

struct Lti {
    Matrix a, b;
    DynSystem sys;
    EmbeddingModel model;
};

Lti random_lti(std::uint64_t seed, double radius = 0.9) {
    std::mt19937_64 rng(seed);
    Lti l;
    l.a = uniform(2, 2, rng);
    l.a *= radius / spectral_radius(l.a);
    l.b = uniform(2, 1, rng);
    l.sys = systems::linear_discrete(l.a, l.b);
    l.model = EmbeddingModel(FeatureMap::identity(2), l.a, l.b);
    return l;
}

SweepConfig tiny_sweep() {
    SweepConfig c;
    c.generation.n_traj = 12;
    c.generation.traj_len = 10;
    c.generation.init_box.assign(2, Interval{-2.0, 2.0});
    c.edmd_degree = 2;
    for (TrainConfig* t : {&c.normal, &c.proposed}) {
        t->epochs_stage1 = 5;
        t->epochs_stage2 = 5;
        t->features = {2, {6}, Activation::swish};
    }
    c.tasks = TaskSettings::planar(2, 1);
    c.tasks.lqr_steps = c.tasks.servo_steps = c.tasks.mpc_steps = 40;
    c.tasks.predict_horizon = 20;
    c.trials = 3;
    c.base_seed = 100;
    return c;
}

} // namespace

TEST(Grid, LastAxisVariesFastest) {
    GridSpec g = GridSpec::square(2, -1.0, 1.0, 3);
    ASSERT_EQ(g.size(), 9u);
    EXPECT_EQ(g.point(0), (Vector{{-1.0, -1.0}}));
    EXPECT_EQ(g.point(1), (Vector{{-1.0, 0.0}}));
    EXPECT_EQ(g.point(3), (Vector{{0.0, -1.0}}));
    EXPECT_EQ(g.point(8), (Vector{{1.0, 1.0}}));
}

TEST(Grid, ValidationErrors) {
    GridSpec g = GridSpec::square(2, -1.0, 1.0, 3);
    EXPECT_THROW(g.validate(3), UsageError);
    g.axes[1].component = 0;
    EXPECT_THROW(g.validate(2), UsageError);
    g = GridSpec::square(2, 1.0, -1.0, 3);
    EXPECT_THROW(g.validate(2), UsageError);
    g = GridSpec::square(2, -1.0, 1.0, 1);
    EXPECT_THROW(g.validate(2), UsageError);
    g.axes.clear();
    EXPECT_THROW(g.validate(2), UsageError);
}

TEST(Contour, ExactModelHasZeroError) {
    const auto l = random_lti(1);
    const auto grid = GridSpec::square(2, -2.0, 2.0, 7);
    for (auto metric : {ErrorMetric::state_prediction, ErrorMetric::modeling}) {
        const auto r = error_contour(l.model, l.sys, grid, Vector::Constant(1, 0.3), metric, 1.0, 1.0);
        ASSERT_EQ(r.errors.size(), 49u);
        EXPECT_LT(r.max(), 1e-14);
    }
}

// Swapping the axis order transposes the grid of values.
TEST(Contour, AxisOrderPermutesValues) {
    const auto sys = systems::duffing();
    const EmbeddingModel m(FeatureMap::monomial(2, 2), Matrix::Identity(5, 5), Matrix::Zero(5, 1));
    GridSpec g = GridSpec::square(2, -1.0, 1.0, 4);
    g.axes[1].hi = 0.5;
    GridSpec swapped = g;
    std::swap(swapped.axes[0], swapped.axes[1]);
    const auto a = error_contour(m, sys, g, Vector::Zero(1), ErrorMetric::state_prediction, 0.05, 0.01);
    const auto b = error_contour(m, sys, swapped, Vector::Zero(1), ErrorMetric::state_prediction, 0.05, 0.01, 2);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(a.errors[i * 4 + j], b.errors[j * 4 + i]);
}

TEST(Contour, SinglePointGridIsOneErrorCall) {
    const auto sys = systems::duffing();
    const EmbeddingModel m(FeatureMap::monomial(2, 3), Matrix::Identity(9, 9), Matrix::Zero(9, 1));
    GridSpec g;
    g.base = Vector{{0.0, 0.7}};
    g.axes = {{0, 0.3, 0.3, 1}};
    const auto r = error_contour(m, sys, g, Vector::Zero(1), ErrorMetric::modeling, 0.05, 0.01);
    ASSERT_EQ(r.errors.size(), 1u);
    EXPECT_EQ(r.errors[0], one_step_error(m, sys, Vector{{0.3, 0.7}}, Vector::Zero(1), ErrorMetric::modeling, 0.05, 0.01));
    EXPECT_EQ(contour_csv(r).substr(0, 6), "x,err\n");
}

TEST(Contour, CsvHasOneRowPerPoint) {
    const auto l = random_lti(2);
    const auto r = error_contour(l.model, l.sys, GridSpec::square(2, -1.0, 1.0, 3), Vector::Zero(1),
                                 ErrorMetric::state_prediction, 1.0, 1.0);
    const auto csv = contour_csv(r);
    EXPECT_EQ(csv.rfind("x,y,err\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 10);
}

TEST(Basin, LqrOnExactLtiModelConvergesEverywhere) {
    const auto l = random_lti(3, 1.3);
    const auto ctl = design_lqr(l.a, l.b, Matrix::Identity(2, 2), Matrix::Identity(1, 1));
    BasinOptions opt;
    opt.steps = 200;
    opt.dt = opt.h = 1.0;
    const auto r = basin_estimate(l.sys, l.model, ctl, grid_points(GridSpec::square(2, -2.0, 2.0, 5)), opt);
    EXPECT_EQ(r.count(BasinOutcome::converged), 25u);
    const auto csv = basin_csv(r, 2);
    EXPECT_EQ(csv.rfind("x0_1,x0_2,outcome\n", 0), 0u);
    EXPECT_NE(csv.find(",converged\n"), std::string::npos);
}

TEST(Basin, UncontrolledDuffingDoesNotReachOrigin) {
    const auto sys = systems::duffing();
    const EmbeddingModel m(FeatureMap::identity(2), Matrix::Identity(2, 2), Matrix::Zero(2, 1));
    const auto r = basin_estimate(sys, m, LqrController{Matrix::Zero(1, 2)}, {Vector{{2.0, 0.0}}});
    ASSERT_EQ(r.outcomes.size(), 1u);
    EXPECT_NE(r.outcomes[0], BasinOutcome::converged);
}

TEST(Basin, UnstablePlantIsClassifiedDiverged) {
    const auto l = random_lti(4, 1.5);
    BasinOptions opt;
    opt.dt = opt.h = 1.0;
    const auto r = basin_estimate(l.sys, l.model, LqrController{Matrix::Zero(1, 2)}, {Vector{{1.0, 1.0}}}, opt);
    EXPECT_EQ(r.outcomes[0], BasinOutcome::diverged);
}

TEST(Basin, EmptyInputGivesEmptyResult) {
    const auto l = random_lti(5);
    const auto r = basin_estimate(l.sys, l.model, LqrController{Matrix::Zero(1, 2)}, {});
    EXPECT_TRUE(r.outcomes.empty());
    EXPECT_EQ(basin_csv(r, 2), "x0_1,x0_2,outcome\n");
}

TEST(Forecast, IdentityFeaturesMatchRollout) {
    const auto l = random_lti(6);
    std::mt19937_64 rng(6);
    const Matrix u = uniform(30, 1, rng);
    const Vector x0{{0.5, -0.5}};
    const auto f = forecast_pure(l.model, x0, u, 30);
    const auto r = rollout(l.model, x0, u, 30);
    EXPECT_LT((f.embedded - r.states).norm(), 1e-13);
}

// With nonlinear features the forecast never re-embeds, so it departs from the rollout after one step.
TEST(Forecast, DoesNotReembed) {
    std::mt19937_64 rng(7);
    const EmbeddingModel m(FeatureMap::monomial(2, 2), uniform(5, 5, rng, 0.4), uniform(5, 1, rng));
    const Matrix u = uniform(5, 1, rng);
    const Vector x0{{0.5, -0.5}};
    const auto f = forecast_pure(m, x0, u, 5);
    const auto r = rollout(m, x0, u, 5);
    ASSERT_EQ(f.embedded.rows(), 6);
    EXPECT_EQ(f.embedded.row(0).transpose(), m.embed(x0));
    EXPECT_LT((f.embedded.row(1).head(2) - r.states.row(1)).norm(), 1e-15);
    Vector g = m.embed(x0);
    for (Eigen::Index k = 0; k < 5; ++k) g = m.A * g + m.B * u.row(k).transpose();
    EXPECT_LT((f.embedded.row(5).transpose() - g).norm(), 1e-13);
    EXPECT_GT((f.embedded.row(5).head(2) - r.states.row(5)).norm(), 1e-6);
    const auto csv = sequence_csv(f.embedded, "g_", f.diverged);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "k,g_1,g_2,g_3,g_4,g_5,flag");
}

TEST(Tasks, AllSucceedOnExactLtiModel) {
    const auto l = random_lti(8, 0.95);
    auto s = TaskSettings::planar(2, 1);
    s.dt = s.h = 1.0;
    s.mpc_switch_time = 20.0;
    s.mpc_steps = s.lqr_steps = s.servo_steps = 200;
    for (Task t : kAllTasks) {
        const auto r = run_task(t, l.sys, l.model, s);
        EXPECT_TRUE(r.error.empty()) << to_string(t) << ": " << r.error;
        EXPECT_TRUE(r.ok) << to_string(t) << " metric " << r.metric;
        EXPECT_FALSE(r.diverged);
    }
}

TEST(Tasks, SynthesisFailureIsRecorded) {
    // B = 0 with an unstable A: no stabilizing gain exists.
    const EmbeddingModel m(FeatureMap::identity(2), Matrix::Identity(2, 2) * 1.5, Matrix::Zero(2, 1));
    const auto sys = systems::linear_discrete(m.A, m.B);
    auto s = TaskSettings::planar(2, 1);
    const auto r = run_task(Task::lqr, sys, m, s);
    EXPECT_FALSE(r.ok);
    EXPECT_EQ(r.error.rfind("synthesis", 0), 0u) << r.error;
}

TEST(Tasks, NamesRoundTrip) {
    for (Task t : kAllTasks) EXPECT_EQ(task_from_string(to_string(t)), t);
    EXPECT_THROW(task_from_string("nope"), UsageError);
}

TEST(Sensitivity, ThreeTrialsGiveThirtySixRecords) {
    const auto sys = systems::duffing();
    const auto cfg = tiny_sweep();
    const auto r = sensitivity_sweep(sys, cfg);
    ASSERT_EQ(r.records.size(), 36u);
    for (std::size_t i = 0; i < r.records.size(); ++i) {
        const auto& rec = r.records[i];
        EXPECT_EQ(rec.trial, i / 12);
        EXPECT_EQ(rec.seed, 100 + i / 12);
        EXPECT_EQ(rec.trainer, kAllTrainers[(i / 4) % 3]);
        EXPECT_EQ(rec.result.task, kAllTasks[i % 4]);
    }
    const auto j = sweep_summary(r, cfg.trials, cfg.generation.dt);
    EXPECT_EQ(j.at("records").size(), 36u);
    EXPECT_EQ(j.at("aggregates").size(), 12u);
    for (const auto& a : j.at("aggregates")) EXPECT_EQ(a.at("runs"), 3);
}

TEST(Sensitivity, DeterministicAcrossRunsAndThreads) {
    const auto sys = systems::duffing();
    auto cfg = tiny_sweep();
    cfg.trials = 2;
    const auto a = sweep_summary(sensitivity_sweep(sys, cfg), 2, 0.05).dump();
    cfg.threads = 2;
    const auto b = sweep_summary(sensitivity_sweep(sys, cfg), 2, 0.05).dump();
    EXPECT_EQ(a, b);
}

TEST(Sensitivity, BaselineDropsStateTerm) {
    const auto c = baseline_config();
    EXPECT_EQ(c.weights.modeling, 1.0);
    EXPECT_EQ(c.weights.state, 0.0);
    EXPECT_THROW(sensitivity_sweep(systems::duffing(), [] {
                     auto s = tiny_sweep();
                     s.trials = 0;
                     return s;
                 }()),
                 UsageError);
}
