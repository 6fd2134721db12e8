#pragma once

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "koop/dynamics/dataset.hpp"
#include "koop/eval/tasks.hpp"
#include "koop/parallel.hpp"
#include "koop/training/train.hpp"

namespace koop {

enum class Trainer { edmd, normal_nn, proposed };

inline constexpr std::array<Trainer, 3> kAllTrainers{Trainer::edmd, Trainer::normal_nn, Trainer::proposed};

inline const char* to_string(Trainer t) {
    switch (t) {
    case Trainer::edmd: return "edmd";
    case Trainer::normal_nn: return "normal_nn";
    case Trainer::proposed: return "proposed";
    }
    return "?";
}

// The normal-NN baseline drops the state-prediction term (lambda2 = 0).
inline TrainConfig baseline_config() {
    TrainConfig c;
    c.weights = {1.0, 0.0};
    return c;
}

struct SweepConfig {
    GenerationSpec generation;
    int edmd_degree = 3;
    TrainConfig normal = baseline_config();
    TrainConfig proposed;
    TaskSettings tasks;
    std::size_t trials = 10;
    std::uint64_t base_seed = 0;
    unsigned threads = 1; // over trials
};

struct SweepRecord {
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    Trainer trainer = Trainer::edmd;
    TaskRecord result;
};

struct SweepResult {
    std::vector<SweepRecord> records; // trial-major, then trainer, then task
};

// Trains one model of the given kind on `data` (already split).
inline EmbeddingModel train_model(Trainer kind, const Dataset& data, const SweepConfig& cfg, std::uint64_t seed) {
    switch (kind) {
    case Trainer::edmd: {
        const auto g = FeatureMap::monomial(data.state_dim(), cfg.edmd_degree);
        return make_model(g, edmd_fit(data.states, data.inputs, data.successors, g));
    }
    case Trainer::normal_nn: {
        TrainConfig c = cfg.normal;
        c.seed = seed;
        return train_normal_nn(data, c);
    }
    case Trainer::proposed: {
        TrainConfig c = cfg.proposed;
        c.seed = seed;
        return train_two_stage(split_dataset(data, c.split_fraction, seed), c).model;
    }
    }
    throw UsageError("unknown trainer");
}

// Trial k regenerates the data with seed base+k and trains all three kinds on
// that same data set. A failing trainer or task is recorded, not fatal.
inline SweepResult sensitivity_sweep(const DynSystem& sys, const SweepConfig& cfg) {
    if (cfg.trials < 1) throw UsageError("sensitivity_sweep: trials must be >= 1");
    cfg.tasks.validate(sys.state_dim, sys.input_dim);
    const std::size_t per_trial = kAllTrainers.size() * kAllTasks.size();
    SweepResult out;
    out.records.resize(cfg.trials * per_trial);
    parallel_for(cfg.trials, cfg.threads, [&](std::size_t trial) {
        const std::uint64_t seed = cfg.base_seed + trial;
        std::string data_error;
        Dataset data;
        try {
            GenerationSpec gen = cfg.generation;
            gen.seed = seed;
            gen.threads = 1;
            data = generate_dataset(sys, gen);
        } catch (const Error& e) {
            data_error = std::string(e.category()) + ": " + e.what();
        }
        for (std::size_t a = 0; a < kAllTrainers.size(); ++a) {
            std::string train_error = data_error;
            EmbeddingModel model;
            if (train_error.empty()) {
                try {
                    model = train_model(kAllTrainers[a], data, cfg, seed);
                } catch (const Error& e) {
                    train_error = std::string(e.category()) + ": " + e.what();
                }
            }
            for (std::size_t t = 0; t < kAllTasks.size(); ++t) {
                auto& rec = out.records[trial * per_trial + a * kAllTasks.size() + t];
                rec.trial = trial;
                rec.seed = seed;
                rec.trainer = kAllTrainers[a];
                if (!train_error.empty()) {
                    rec.result.task = kAllTasks[t];
                    rec.result.error = train_error;
                } else {
                    rec.result = run_task(kAllTasks[t], sys, model, cfg.tasks);
                }
            }
        }
    });
    return out;
}

inline nlohmann::json matrix_rows_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json r = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

// Per-record outcomes plus per (trainer, task) aggregates. Aggregates are
// recomputed from the records; trajectories are included for the overlay plots.
inline nlohmann::json sweep_summary(const SweepResult& r, std::size_t trials, double dt) {
    nlohmann::json j;
    j["trials"] = trials;
    j["dt"] = dt;
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& rec : r.records) {
        nlohmann::json e;
        e["trial"] = rec.trial;
        e["seed"] = rec.seed;
        e["trainer"] = to_string(rec.trainer);
        e["task"] = to_string(rec.result.task);
        e["ok"] = rec.result.ok;
        e["diverged"] = rec.result.diverged;
        e["metric_name"] = task_metric_name(rec.result.task);
        if (rec.result.error.empty())
            e["metric"] = rec.result.metric;
        else
            e["metric"] = nullptr;
        e["error"] = rec.result.error;
        e["states"] = matrix_rows_json(rec.result.states);
        e["reference"] = matrix_rows_json(rec.result.reference);
        recs.push_back(std::move(e));
    }
    j["records"] = std::move(recs);

    nlohmann::json agg = nlohmann::json::array();
    for (Trainer tr : kAllTrainers) {
        for (Task task : kAllTasks) {
            std::size_t runs = 0, success = 0, failed = 0, diverged = 0;
            double sum = 0.0, mx = 0.0;
            for (const auto& rec : r.records) {
                if (rec.trainer != tr || rec.result.task != task) continue;
                ++runs;
                if (!rec.result.error.empty()) {
                    ++failed;
                    continue;
                }
                success += rec.result.ok;
                diverged += rec.result.diverged;
                sum += rec.result.metric;
                mx = std::max(mx, rec.result.metric);
            }
            const std::size_t measured = runs - failed;
            agg.push_back({{"trainer", to_string(tr)},
                           {"task", to_string(task)},
                           {"runs", runs},
                           {"successes", success},
                           {"diverged", diverged},
                           {"failed", failed},
                           {"mean_metric", measured ? nlohmann::json(sum / static_cast<double>(measured)) : nlohmann::json(nullptr)},
                           {"max_metric", measured ? nlohmann::json(mx) : nlohmann::json(nullptr)}});
        }
    }
    j["aggregates"] = std::move(agg);
    return j;
}

} // namespace koop
