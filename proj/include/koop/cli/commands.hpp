#pragma once

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "koop/cli/config.hpp"
#include "koop/cli/verify.hpp"
#include "koop/dynamics/dataset_io.hpp"
#include "koop/embedding/model_io.hpp"
#include "koop/eval/forecast.hpp"
#include "koop/training/report_io.hpp"

#ifndef KOOP_VERSION
#define KOOP_VERSION "dev"
#endif

namespace koop::cli {

inline constexpr const char* kCodeVersion = KOOP_VERSION;

// Output layout inside --out.
struct Paths {
    std::filesystem::path dir;

    [[nodiscard]] std::string at(const std::string& name) const { return (dir / name).string(); }
    [[nodiscard]] std::string dataset() const { return at("dataset.csv"); }
    [[nodiscard]] std::string dataset_meta() const { return at("dataset.json"); }
    [[nodiscard]] std::string model() const { return at("model.json"); }
};

struct Context {
    RunConfig config;
    Paths paths;
    std::ostream* log = &std::cerr;
};

inline Context make_context(RunConfig cfg, const std::string& out_override, std::optional<std::uint64_t> seed,
                            std::optional<unsigned> threads) {
    if (seed) set_seed(cfg, *seed);
    if (threads) {
        if (*threads < 1) throw UsageError("--threads must be >= 1");
        cfg.threads = *threads;
    }
    if (!out_override.empty()) cfg.out = out_override;
    Context ctx;
    ctx.paths.dir = cfg.out;
    ctx.config = std::move(cfg);
    return ctx;
}

// Every artifact gets `<file>.prov.json` with enough to regenerate it.
inline void write_artifact(const Context& ctx, const std::string& path, const std::string& content,
                           const std::string& command, const json& inputs = json::object()) {
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    io::write_file(path, content);
    json prov{{"command", command},
              {"code_version", kCodeVersion},
              {"config_hash", config_hash(ctx.config)},
              {"seed", ctx.config.seed},
              {"content_hash", io::hash_hex(content)},
              {"inputs", inputs},
              {"config", ctx.config.source}};
    io::write_file(path + ".prov.json", prov.dump(2) + "\n");
}

inline Dataset load_dataset(const Context& ctx) {
    const auto csv = io::read_file(ctx.paths.dataset());
    json meta;
    try {
        meta = json::parse(io::read_file(ctx.paths.dataset_meta()));
    } catch (const json::parse_error& e) {
        throw DataError(ctx.paths.dataset_meta() + ": " + e.what());
    }
    return parse_dataset(csv, meta);
}

inline EmbeddingModel load_model(const Context& ctx, ModelProvenance* prov = nullptr) {
    json j;
    try {
        j = json::parse(io::read_file(ctx.paths.model()));
    } catch (const json::parse_error& e) {
        throw DataError(ctx.paths.model() + ": " + e.what());
    }
    return model_from_json(j, prov);
}

inline Dataset generate(const RunConfig& c) {
    GenerationSpec g = c.generation;
    g.seed = c.seed;
    g.threads = c.threads;
    return split_dataset(generate_dataset(c.system, g), c.split_fraction, c.seed);
}

inline int cmd_gen_data(const Context& ctx) {
    const Dataset d = generate(ctx.config);
    const auto csv = dataset_csv(d);
    write_artifact(ctx, ctx.paths.dataset(), csv, "gen-data");
    write_artifact(ctx, ctx.paths.dataset_meta(), dataset_metadata(d).dump(2) + "\n", "gen-data",
                   {{"dataset_hash", io::hash_hex(csv)}});
    *ctx.log << "gen-data: " << d.size() << " samples from " << d.trajectory_count() << " trajectories ("
             << d.provenance.truncated_trajectories << " truncated) -> " << ctx.paths.dataset() << "\n";
    return 0;
}

inline int cmd_train(const Context& ctx) {
    const auto& c = ctx.config;
    EmbeddingModel model;
    std::optional<TrainReport> report;
    std::string dhash;
    if (c.model == ModelKind::sine) {
        if (c.system_name != "example24") throw UsageError("model.kind: sine is only defined for the example24 system");
        model = verify::sine_map_model();
    } else {
        const Dataset data = load_dataset(ctx);
        dhash = dataset_hash(data);
        if (data.state_dim() != c.system.state_dim || data.input_dim() != c.system.input_dim)
            throw DataError("dataset dimensions do not match system '" + c.system_name + "'");
        TrainConfig tc = c.training;
        tc.seed = c.seed;
        switch (c.model) {
        case ModelKind::edmd: {
            const auto g = FeatureMap::monomial(data.state_dim(), c.edmd_degree);
            model = make_model(g, edmd_fit(data.states, data.inputs, data.successors, g));
            break;
        }
        case ModelKind::normal_nn: {
            TrainReport r;
            model = train_normal_nn(data, tc, &r);
            report = r;
            break;
        }
        case ModelKind::proposed: {
            const auto nx = static_cast<Eigen::Index>(data.state_dim()) + tc.features.outputs;
            const auto& ts = tc.tests;
            const auto nhat = ts.kind == TestFunctionSpec::Kind::structured
                                  ? data.state_dim() + data.input_dim() + std::max<Eigen::Index>(1, ts.network.outputs)
                                  : (ts.network.outputs > 0 ? ts.network.outputs : nx + data.input_dim());
            if (nhat < nx + data.input_dim())
                *ctx.log << "train: warning: " << nhat << " test functions for " << nx + data.input_dim()
                         << " unknowns per row of [A B]; the oblique fit is underdetermined\n";
            auto r = train_two_stage(data, tc);
            model = r.model;
            report = r.report;
            break;
        }
        case ModelKind::sine: break;
        }
    }
    const ModelProvenance prov{dhash, config_hash(c), to_string(c.model)};
    const json inputs{{"dataset_hash", dhash}};
    write_artifact(ctx, ctx.paths.model(), to_json(model, prov).dump(2) + "\n", "train", inputs);
    if (report) {
        write_artifact(ctx, ctx.paths.at("train_report.json"), to_json(*report).dump(2) + "\n", "train", inputs);
        write_artifact(ctx, ctx.paths.at("loss.csv"), loss_csv(*report), "train", inputs);
        if (report->diverged) *ctx.log << "train: warning: optimization diverged; best parameters were kept\n";
        *ctx.log << "train: loss on full data " << io::fmt(report->loss_full) << "\n";
    }
    *ctx.log << "train: " << to_string(c.model) << " model with N_x = " << model.embed_dim() << " -> "
             << ctx.paths.model() << "\n";
    return 0;
}

inline json model_inputs(const EmbeddingModel& m) {
    return {{"model_hash", model_hash(m)}, {"model_file", "model.json"}};
}

// `k,chi_1..chi_n`, one row per step.
inline std::string trajectory_csv(const Matrix& states) {
    std::ostringstream os;
    os << "k";
    for (Eigen::Index j = 0; j < states.cols(); ++j) os << ",chi_" << j + 1;
    os << "\n";
    for (Eigen::Index k = 0; k < states.rows(); ++k) {
        os << k;
        for (Eigen::Index j = 0; j < states.cols(); ++j) os << "," << io::fmt(states(k, j));
        os << "\n";
    }
    return os.str();
}

inline int cmd_eval(const Context& ctx, const std::string& task) {
    const auto& c = ctx.config;
    if (task == "sensitivity") {
        SweepConfig sc;
        sc.generation = c.generation;
        sc.edmd_degree = c.edmd_degree;
        sc.normal = c.training;
        sc.normal.weights = {1.0, 0.0};
        sc.proposed = c.training;
        sc.tasks = c.tasks;
        sc.trials = c.sensitivity_trials;
        sc.base_seed = c.seed;
        sc.threads = c.threads;
        const auto result = sensitivity_sweep(c.system, sc);
        write_artifact(ctx, ctx.paths.at("sensitivity.json"), sweep_summary(result, sc.trials, c.tasks.dt).dump(1) + "\n",
                       "eval sensitivity");
        std::size_t failed = 0;
        for (const auto& r : result.records) failed += !r.result.error.empty();
        *ctx.log << "eval sensitivity: " << result.records.size() << " records (" << failed << " failed)\n";
        return 0;
    }

    const EmbeddingModel model = load_model(ctx);
    if (model.state_dim() != c.system.state_dim || model.input_dim() != c.system.input_dim)
        throw DataError("model dimensions do not match system '" + c.system_name + "'");
    const json inputs = model_inputs(model);

    if (task == "predict") {
        const auto rec = run_task(Task::predict, c.system, model, c.tasks);
        if (!rec.error.empty()) throw NumericalError(rec.error);
        write_artifact(ctx, ctx.paths.at("predict.csv"), trajectory_csv(rec.states), "eval predict", inputs);
        write_artifact(ctx, ctx.paths.at("predict_true.csv"), trajectory_csv(rec.reference), "eval predict", inputs);
        *ctx.log << "eval predict: max state error " << io::fmt(rec.metric) << (rec.diverged ? " (diverged)" : "") << "\n";
        return 0;
    }
    if (task == "contour") {
        const auto r = error_contour(model, c.system, c.contour.grid, c.contour.u, c.contour.metric, c.tasks.dt,
                                     c.tasks.h, c.threads);
        write_artifact(ctx, ctx.paths.at("contour.csv"), contour_csv(r), "eval contour", inputs);
        *ctx.log << "eval contour: mean " << io::fmt(r.mean()) << ", max " << io::fmt(r.max()) << "\n";
        return 0;
    }
    if (task == "basin") {
        BasinOptions opt = c.basin.options;
        opt.threads = c.threads;
        const auto controller = synthesize(c.basin.controller, model, c.tasks);
        const auto r = basin_estimate(c.system, model, controller, grid_points(c.basin.grid), opt);
        write_artifact(ctx, ctx.paths.at("basin.csv"), basin_csv(r, c.system.state_dim), "eval basin", inputs);
        *ctx.log << "eval basin: " << r.count(BasinOutcome::converged) << " converged, "
                 << r.count(BasinOutcome::steady_error) << " steady-error, " << r.count(BasinOutcome::diverged)
                 << " diverged\n";
        return 0;
    }
    if (task == "forecast") {
        const Matrix u = Matrix::Zero(static_cast<Eigen::Index>(c.forecast.horizon), c.system.input_dim);
        const auto f = forecast_pure(model, c.forecast.x0, u, c.forecast.horizon);
        write_artifact(ctx, ctx.paths.at("forecast.csv"), sequence_csv(f.embedded, "g_", f.diverged), "eval forecast",
                       inputs);
        *ctx.log << "eval forecast: " << f.embedded.rows() - 1 << " steps" << (f.diverged ? " (diverged)" : "") << "\n";
        return 0;
    }
    throw UsageError("eval: unknown task '" + task + "' (expected predict, contour, basin, forecast, sensitivity)");
}

inline int cmd_control(const Context& ctx, const std::string& task_name) {
    const auto& c = ctx.config;
    const Task task = task_from_string(task_name);
    if (task == Task::predict) throw UsageError("control: expected lqr, servo or mpc");
    const EmbeddingModel model = load_model(ctx);
    if (model.state_dim() != c.system.state_dim || model.input_dim() != c.system.input_dim)
        throw DataError("model dimensions do not match system '" + c.system_name + "'");
    const auto controller = synthesize(task, model, c.tasks);
    const Vector& x0 = task == Task::lqr ? c.tasks.lqr_x0 : task == Task::servo ? c.tasks.servo_x0 : c.tasks.mpc_x0;
    const std::size_t steps =
        task == Task::lqr ? c.tasks.lqr_steps : task == Task::servo ? c.tasks.servo_steps : c.tasks.mpc_steps;
    const auto run = simulate_closed_loop(c.system, model, controller, x0, steps, c.tasks.dt, c.tasks.h);
    const std::string name = "closed_loop_" + task_name + ".csv";
    write_artifact(ctx, ctx.paths.at(name), closed_loop_csv(run), "control " + task_name, model_inputs(model));
    *ctx.log << "control " << task_name << ": " << run.states.rows() - 1 << " steps"
             << (run.diverged ? " (diverged)" : "") << ", final state " << run.states.bottomRows(1) << "\n";
    return 0;
}

inline int cmd_verify(std::ostream& os) {
    int failures = 0;
    for (const auto& c : verify::run_all()) {
        os << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
        failures += !c.pass;
    }
    return failures == 0 ? 0 : 1;
}

} // namespace koop::cli
