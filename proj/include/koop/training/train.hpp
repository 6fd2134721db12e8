#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "koop/numerics/adam.hpp"
#include "koop/training/loss.hpp"

namespace koop {

struct NetworkSpec {
    Eigen::Index outputs = 2; // extra features, or test-function count
    std::vector<Eigen::Index> hidden{10};
    Activation activation = Activation::swish;
};

struct TestFunctionSpec {
    enum class Kind { free_mlp, structured };
    Kind kind = Kind::free_mlp;
    // free_mlp: total count N_hat (N_x + p allows the exact tied start);
    // structured: number of learned components after [chi; u].
    NetworkSpec network{0, {10}, Activation::swish};
};

struct TrainConfig {
    LossWeights weights;
    std::size_t epochs_stage1 = 2000;
    std::size_t epochs_stage2 = 2000;
    AdamOptions adam;
    double lambda_reg = kDefaultTikhonov;
    std::uint64_t seed = 0;
    double split_fraction = 0.5;
    NetworkSpec features;
    TestFunctionSpec tests;
    std::size_t early_stop_window = 100;
    double early_stop_tol = 1e-10;

    void validate() const {
        weights.validate();
        if (epochs_stage1 < 1) throw UsageError("training: epochs_stage1 must be >= 1");
        if (!(lambda_reg > 0.0)) throw UsageError("training: lambda_reg must be > 0");
        if (!(split_fraction > 0.0 && split_fraction <= 1.0)) throw UsageError("training: split_fraction must lie in (0, 1]");
        if (features.outputs < 0) throw UsageError("training: feature count must be >= 0");
        if (!(adam.learning_rate > 0.0)) throw UsageError("training: learning rate must be > 0");
    }
};

struct StageReport {
    std::vector<double> loss_history; // loss before each update; length = epochs run
    double final_loss = 0.0;          // loss at the returned parameters
    double seconds = 0.0;
    bool diverged = false;
    std::size_t diverged_epoch = 0;
};

struct TrainReport {
    StageReport stage1;
    StageReport stage2;
    bool stage2_ran = false;
    double loss_d1 = 0.0;
    double loss_d2 = 0.0;
    double loss_full = 0.0;
    double condition_stage1 = 1.0;
    double condition_final = 1.0;
    bool diverged = false;
};

struct TrainResult {
    EmbeddingModel model;        // final model, exact pinv fit over D1 u D2
    TestFunctionSet tests;       // test functions used for `model`
    EmbeddingModel stage1_model; // stage-1 features, orthogonal fit over D1
    TrainReport report;
};

namespace detail {

// Mean loss over the last `w` epochs against the `w` before it; a transient
// spike from the first Adam steps does not end a stage.
inline bool window_stalled(const std::vector<double>& h, std::size_t w, double tol) {
    if (w == 0 || h.size() < 2 * w) return false;
    double older = 0.0, recent = 0.0;
    for (std::size_t i = h.size() - 2 * w; i < h.size() - w; ++i) older += h[i];
    for (std::size_t i = h.size() - w; i < h.size(); ++i) recent += h[i];
    return (older - recent) / static_cast<double>(w) < tol;
}

// Full-batch Adam on `params`. build(tape, vars) records the loss given tape
// handles for the parameters. Returns the best parameters seen (restored in place).
template <class Build>
StageReport run_stage(std::vector<Matrix*> params, Build&& build, std::size_t epochs, const TrainConfig& cfg) {
    StageReport rep;
    const auto t0 = std::chrono::steady_clock::now();

    auto evaluate = [&](bool want_grad, std::vector<Matrix>* grads) {
        ad::Tape tape;
        std::vector<ad::Var> vars;
        for (Matrix* p : params) vars.push_back(tape.input(*p));
        ad::Var loss = build(tape, vars);
        const double value = loss.scalar();
        if (want_grad && std::isfinite(value)) *grads = tape.grad(loss, vars);
        return value;
    };

    std::vector<Matrix> best;
    for (Matrix* p : params) best.push_back(*p);
    double best_loss = std::numeric_limits<double>::infinity();

    if (params.empty()) {
        const double v = evaluate(false, nullptr);
        rep.loss_history.push_back(v);
        rep.final_loss = v;
        rep.diverged = !std::isfinite(v);
        rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return rep;
    }

    AdamState adam(cfg.adam);
    std::vector<Matrix> grads;
    for (std::size_t e = 0; e < epochs; ++e) {
        double value = std::numeric_limits<double>::quiet_NaN();
        try {
            value = evaluate(true, &grads);
        } catch (const NumericalError&) {
            value = std::numeric_limits<double>::quiet_NaN();
        }
        bool finite = std::isfinite(value);
        for (const auto& g : grads) finite = finite && g.allFinite();
        if (!finite) {
            rep.diverged = true;
            rep.diverged_epoch = e;
            break;
        }
        rep.loss_history.push_back(value);
        if (value < best_loss) {
            best_loss = value;
            for (std::size_t i = 0; i < params.size(); ++i) best[i] = *params[i];
        }
        if (window_stalled(rep.loss_history, cfg.early_stop_window, cfg.early_stop_tol)) break;
        adam_step(adam, params, grads);
    }

    if (!rep.diverged) {
        double last = std::numeric_limits<double>::quiet_NaN();
        try {
            last = evaluate(false, nullptr);
        } catch (const NumericalError&) {
        }
        if (std::isfinite(last) && last <= best_loss) {
            best_loss = last;
            for (std::size_t i = 0; i < params.size(); ++i) best[i] = *params[i];
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] = best[i];
    rep.final_loss = best_loss;
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

inline MlpVars vars_for(const Mlp& net, const std::vector<ad::Var>& flat, std::size_t offset) {
    MlpVars v;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        v.weights.push_back(flat.at(offset + 2 * l));
        v.biases.push_back(flat.at(offset + 2 * l + 1));
    }
    return v;
}

inline std::size_t mlp_param_slots(const Mlp& net) { return 2 * net.weights.size(); }

inline TrainResult train_impl(const Dataset& stage1_data, const Dataset& full, const TrainConfig& cfg, bool run_stage2) {
    cfg.validate();
    if (stage1_data.size() == 0) throw UsageError("training: stage-1 data subset is empty");
    const auto n = full.state_dim();
    const auto p = full.input_dim();
    std::mt19937_64 rng(cfg.seed);
    FeatureMap g = FeatureMap::augmented(n, cfg.features.outputs, cfg.features.hidden, cfg.features.activation, rng);

    TrainResult out;
    auto& report = out.report;

    // Stage 1: orthogonal projection on D1.
    {
        const auto& d = stage1_data;
        std::vector<Matrix*> params = g.net ? g.net->parameters() : std::vector<Matrix*>{};
        auto build = [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
            ad::Var x = tape.constant(d.states), u = tape.constant(d.inputs), y = tape.constant(d.successors);
            MlpVars gv;
            if (g.net) gv = vars_for(*g.net, vars, 0);
            return ad::loss_J(g, g.net ? &gv : nullptr, x, u, y, cfg.weights, cfg.lambda_reg).loss;
        };
        report.stage1 = run_stage(params, build, cfg.epochs_stage1, cfg);
        const auto fit = edmd_fit(d.states, d.inputs, d.successors, g);
        report.condition_stage1 = fit.condition;
        out.stage1_model = make_model(g, fit);
    }

    TestFunctionSet tests = TestFunctionSet::tied(n, p);
    if (run_stage2 && cfg.epochs_stage2 > 0) {
        report.stage2_ran = true;
        const auto& ts = cfg.tests;
        if (ts.kind == TestFunctionSpec::Kind::free_mlp) {
            const Eigen::Index count = ts.network.outputs > 0 ? ts.network.outputs : g.dim() + p;
            if (count == g.dim() + p)
                tests = TestFunctionSet::tied_copy(g, p, ts.network.hidden, ts.network.activation, rng);
            else
                tests = TestFunctionSet::free_mlp(n, p, count, ts.network.hidden, ts.network.activation, rng);
        } else {
            tests = TestFunctionSet::structured(n, p, std::max<Eigen::Index>(1, ts.network.outputs), ts.network.hidden,
                                                ts.network.activation, rng);
        }

        std::vector<Matrix*> params = g.net ? g.net->parameters() : std::vector<Matrix*>{};
        const std::size_t g_slots = params.size();
        for (Matrix* m : tests.parameters()) params.push_back(m);
        auto build = [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
            ad::Var x = tape.constant(full.states), u = tape.constant(full.inputs), y = tape.constant(full.successors);
            MlpVars gv;
            if (g.net) gv = vars_for(*g.net, vars, 0);
            TestFunctionVars tv;
            tv.net = vars_for(tests.net, vars, g_slots);
            if (tests.kind == TestFunctionSet::Kind::free_mlp) tv.skip = vars.at(g_slots + mlp_param_slots(tests.net));
            return ad::loss_J_oblique(g, g.net ? &gv : nullptr, tests, tv, x, u, y, cfg.weights, cfg.lambda_reg).loss;
        };
        report.stage2 = run_stage(params, build, cfg.epochs_stage2, cfg);
    }

    const auto fit = oblique_edmd_fit(full.states, full.inputs, full.successors, g, tests);
    report.condition_final = fit.condition;
    out.model = make_model(g, fit);
    out.tests = tests;

    const Dataset d1 = full.subset({Split::d1});
    const Dataset d2 = full.subset({Split::d2});
    report.loss_d1 = summed_loss(out.model, d1, cfg.weights);
    report.loss_d2 = summed_loss(out.model, d2, cfg.weights);
    report.loss_full = summed_loss(out.model, full, cfg.weights);
    report.diverged = report.stage1.diverged || report.stage2.diverged;
    return out;
}

} // namespace detail

// Two-stage learning: orthogonal-projection initialization on D1, then joint
// optimization of features and test functions on D1 u D2, then an exact refit.
inline TrainResult train_two_stage(const Dataset& data, const TrainConfig& cfg) {
    data.validate();
    const bool stage2 = cfg.epochs_stage2 > 0;
    const Dataset d1 = data.subset({Split::d1});
    if (d1.size() == 0) throw UsageError("train_two_stage: dataset has no D1 samples");
    if (stage2 && data.count(Split::d2) == 0) throw UsageError("train_two_stage: dataset has no D2 samples");
    return detail::train_impl(d1, data, cfg, stage2);
}

// The "normal NN" baseline: orthogonal-projection training on the full data set only.
inline EmbeddingModel train_normal_nn(const Dataset& data, const TrainConfig& cfg, TrainReport* report = nullptr) {
    data.validate();
    Dataset all = data;
    std::fill(all.split.begin(), all.split.end(), Split::d1);
    auto r = detail::train_impl(all, all, cfg, false);
    if (report) *report = r.report;
    return r.model;
}

} // namespace koop
