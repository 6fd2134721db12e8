#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "koop/dynamics/dataset.hpp"
#include "koop/dynamics/systems.hpp"
#include "koop/eval/basin.hpp"
#include "koop/eval/sensitivity.hpp"
#include "koop/io/format.hpp"

namespace koop::cli {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Reads one JSON object, remembering which keys were consumed so that
// leftovers can be reported with their full path.
class Fields {
public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw UsageError(where() + ": expected an object");
    }

    [[nodiscard]] std::string where(const std::string& key = "") const {
        if (key.empty()) return path_.empty() ? "<root>" : path_;
        return path_.empty() ? key : path_ + "." + key;
    }

    [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    Fields object(const std::string& key) {
        static const json empty = json::object();
        if (!has(key)) return Fields(empty, where(key));
        return Fields(raw(key), where(key));
    }

    double number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_number()) throw UsageError(where(key) + ": expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw UsageError(where(key) + ": must be finite");
        return x;
    }

    template <class Int>
    Int integer(const std::string& key, Int fallback, long long lo = 0) {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_number_integer()) throw UsageError(where(key) + ": expected an integer");
        const auto x = v.get<long long>();
        if (x < lo) throw UsageError(where(key) + ": must be >= " + std::to_string(lo));
        return static_cast<Int>(x);
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_boolean()) throw UsageError(where(key) + ": expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_string()) throw UsageError(where(key) + ": expected a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_array()) throw UsageError(where(key) + ": expected an array of numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number()) throw UsageError(where(key) + ": expected an array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    Vector vector(const std::string& key, const Vector& fallback, Eigen::Index size) {
        if (!has(key)) return fallback;
        const auto v = numbers(key);
        if (static_cast<Eigen::Index>(v.size()) != size)
            throw UsageError(where(key) + ": expected " + std::to_string(size) + " entries");
        return Eigen::Map<const Vector>(v.data(), size);
    }

    // A nested array of rows, or a flat array read as a diagonal.
    Matrix matrix(const std::string& key, const Matrix& fallback, Eigen::Index rows, Eigen::Index cols) {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_array() || v.empty()) throw UsageError(where(key) + ": expected a matrix");
        if (!v.front().is_array()) {
            if (rows != cols) throw UsageError(where(key) + ": a diagonal shorthand needs a square matrix");
            const Vector d = vector(key, Vector(), rows);
            return d.asDiagonal();
        }
        Matrix m(static_cast<Eigen::Index>(v.size()), cols);
        if (rows >= 0 && m.rows() != rows) throw UsageError(where(key) + ": expected " + std::to_string(rows) + " rows");
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_array() || static_cast<Eigen::Index>(v[i].size()) != cols)
                throw UsageError(where(key) + "[" + std::to_string(i) + "]: expected " + std::to_string(cols) + " entries");
            for (std::size_t j = 0; j < v[i].size(); ++j) {
                if (!v[i][j].is_number()) throw UsageError(where(key) + ": expected numbers");
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i][j].get<double>();
            }
        }
        return m;
    }

    // Throws on any key that was never read.
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw UsageError(where(it.key()) + ": unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

enum class ModelKind { edmd, normal_nn, proposed, sine };

inline const char* to_string(ModelKind k) {
    switch (k) {
    case ModelKind::edmd: return "edmd";
    case ModelKind::normal_nn: return "normal_nn";
    case ModelKind::proposed: return "proposed";
    case ModelKind::sine: return "sine";
    }
    return "?";
}

struct ContourSettings {
    GridSpec grid;
    Vector u;
    ErrorMetric metric = ErrorMetric::state_prediction;
};

struct BasinSettings {
    GridSpec grid;
    BasinOptions options;
    Task controller = Task::lqr;
};

struct ForecastSettings {
    Vector x0;
    std::size_t horizon = 100;
};

struct RunConfig {
    std::string system_name;
    std::map<std::string, double> system_parameters;
    DynSystem system;

    GenerationSpec generation;
    double split_fraction = 0.5;

    ModelKind model = ModelKind::proposed;
    int edmd_degree = 3;
    TrainConfig training;

    TaskSettings tasks;
    ContourSettings contour;
    BasinSettings basin;
    ForecastSettings forecast;
    std::size_t sensitivity_trials = 10;

    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string out = "out";

    json source; // normalized input, hashed for provenance
};

// Data box, contour box and task defaults per benchmark system.
inline void apply_system_defaults(RunConfig& c) {
    const auto n = c.system.state_dim;
    const auto p = c.system.input_dim;
    double box = 3.0;
    if (c.system_name == "rtac") box = 1.0;
    if (c.system_name == "example44") box = 2.0;
    if (c.system_name == "example24") box = std::numbers::pi;
    c.generation.init_box.assign(static_cast<std::size_t>(n), Interval{-box, box});

    c.tasks = TaskSettings::planar(n, p);
    if (c.system.kind == TimeKind::discrete) {
        c.tasks.dt = 1.0;
        c.tasks.h = 1.0;
        c.generation.dt = 1.0;
        c.generation.h = 1.0;
    }
    if (c.system_name == "rtac") {
        c.tasks.q_state = Vector::Ones(n).asDiagonal();
        c.tasks.q_state(0, 0) = 100.0;
        c.tasks.q_state(2, 2) = 100.0;
        c.tasks.servo_c = Matrix::Zero(1, n);
        c.tasks.servo_c(0, 2) = 1.0;
        c.tasks.mpc_component = 2;
        c.tasks.predict_x0 = Vector::Zero(n);
        c.tasks.predict_x0(0) = 0.4;
        c.tasks.lqr_x0 = Vector::Constant(n, 0.5);
    }
    c.tasks.mpc_switch_time = 10.0;

    const double grid_box = c.system_name == "example44" ? 2.0 : box;
    c.contour.grid = GridSpec::square(n, -grid_box, grid_box, 101);
    c.contour.u = Vector::Zero(p);
    c.contour.metric = c.system_name == "example44" ? ErrorMetric::modeling : ErrorMetric::state_prediction;
    if (n == 1) c.contour.grid.axes.resize(1);
    c.basin.grid = GridSpec::square(n, -2.0, 2.0, 9);
    if (n == 1) c.basin.grid.axes.resize(1);
    c.forecast.x0 = c.tasks.predict_x0;
}

inline NetworkSpec parse_network(Fields f, const NetworkSpec& fallback) {
    NetworkSpec s = fallback;
    s.outputs = f.integer<Eigen::Index>("outputs", s.outputs);
    if (f.has("hidden")) {
        s.hidden.clear();
        for (double h : f.numbers("hidden")) {
            if (h < 1 || h != std::floor(h)) throw UsageError(f.where("hidden") + ": widths must be positive integers");
            s.hidden.push_back(static_cast<Eigen::Index>(h));
        }
    }
    try {
        s.activation = activation_from_string(f.string("activation", koop::to_string(s.activation)));
    } catch (const UsageError& e) {
        throw UsageError(f.where("activation") + ": " + e.what());
    }
    f.finish();
    return s;
}

inline GridSpec parse_grid(Fields f, const GridSpec& fallback, Eigen::Index n) {
    GridSpec g = fallback;
    if (f.has("axes")) {
        const auto& arr = f.raw("axes");
        if (!arr.is_array()) throw UsageError(f.where("axes") + ": expected an array");
        g.axes.clear();
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Fields a(arr[i], f.where("axes") + "[" + std::to_string(i) + "]");
            GridAxis ax;
            ax.component = a.integer<Eigen::Index>("component", static_cast<Eigen::Index>(i));
            ax.lo = a.number("lo", ax.lo);
            ax.hi = a.number("hi", ax.hi);
            ax.resolution = a.integer<std::size_t>("resolution", ax.resolution, 1);
            a.finish();
            g.axes.push_back(ax);
        }
    }
    g.base = f.vector("base", g.base, n);
    f.finish();
    try {
        g.validate(n);
    } catch (const UsageError& e) {
        throw UsageError(f.where() + ": " + e.what());
    }
    return g;
}

inline RunConfig parse_config(const json& root) {
    RunConfig c;
    Fields top(root, "");
    const int version = top.integer<int>("schema_version", -1, -1);
    if (version != kSchemaVersion)
        throw UsageError("schema_version: expected " + std::to_string(kSchemaVersion) + " (got " +
                         (root.contains("schema_version") ? root.at("schema_version").dump() : "nothing") + ")");

    {
        Fields s = top.object("system");
        c.system_name = s.string("name", "");
        if (c.system_name.empty()) throw UsageError("system.name: required");
        if (s.has("parameters")) {
            Fields params = s.object("parameters");
            for (const char* key : {"eps", "a", "b"})
                if (params.has(key)) c.system_parameters[key] = params.number(key, 0.0);
            params.finish();
        }
        s.finish();
        try {
            c.system = systems::by_name(c.system_name, c.system_parameters);
        } catch (const UsageError& e) {
            throw UsageError(std::string("system: ") + e.what());
        }
    }
    apply_system_defaults(c);
    const auto n = c.system.state_dim;
    const auto p = c.system.input_dim;

    c.seed = top.integer<std::uint64_t>("seed", 0);
    c.threads = top.integer<unsigned>("threads", 1, 1);
    c.out = top.string("out", "out");

    {
        Fields d = top.object("data");
        auto& g = c.generation;
        g.n_traj = d.integer<std::size_t>("n_traj", g.n_traj, 1);
        g.traj_len = d.integer<std::size_t>("traj_len", g.traj_len, 1);
        g.dt = d.number("dt", g.dt);
        g.h = d.number("h", g.h);
        if (d.has("init_box")) {
            const auto& arr = d.raw("init_box");
            if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != n)
                throw UsageError(d.where("init_box") + ": expected " + std::to_string(n) + " [lo, hi] pairs");
            g.init_box.clear();
            for (const auto& iv : arr) {
                if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number() || !iv[1].is_number())
                    throw UsageError(d.where("init_box") + ": expected [lo, hi] pairs");
                g.init_box.push_back({iv[0].get<double>(), iv[1].get<double>()});
            }
        }
        c.split_fraction = d.number("split_fraction", c.split_fraction);
        d.finish();
        if (!(g.dt > 0.0) || !(g.h > 0.0)) throw UsageError("data: dt and h must be > 0");
        c.tasks.dt = g.dt;
        c.tasks.h = g.h;
    }

    {
        Fields m = top.object("model");
        const auto kind = m.string("kind", "proposed");
        if (kind == "edmd") c.model = ModelKind::edmd;
        else if (kind == "normal_nn") c.model = ModelKind::normal_nn;
        else if (kind == "proposed") c.model = ModelKind::proposed;
        else if (kind == "sine") c.model = ModelKind::sine;
        else throw UsageError("model.kind: expected edmd, normal_nn, proposed or sine (got '" + kind + "')");
        c.edmd_degree = m.integer<int>("edmd_degree", c.edmd_degree, 1);
        if (m.has("features")) c.training.features = parse_network(m.object("features"), c.training.features);
        if (m.has("tests")) {
            Fields t = m.object("tests");
            const auto tk = t.string("kind", "free_mlp");
            if (tk == "free_mlp") c.training.tests.kind = TestFunctionSpec::Kind::free_mlp;
            else if (tk == "structured") c.training.tests.kind = TestFunctionSpec::Kind::structured;
            else throw UsageError(t.where("kind") + ": expected free_mlp or structured");
            NetworkSpec& ns = c.training.tests.network;
            ns.outputs = t.integer<Eigen::Index>("outputs", ns.outputs);
            if (t.has("hidden")) {
                ns.hidden.clear();
                for (double h : t.numbers("hidden")) {
                    if (h < 1 || h != std::floor(h)) throw UsageError(t.where("hidden") + ": widths must be positive integers");
                    ns.hidden.push_back(static_cast<Eigen::Index>(h));
                }
            }
            ns.activation = activation_from_string(t.string("activation", koop::to_string(ns.activation)));
            t.finish();
        }
        m.finish();
    }

    {
        Fields t = top.object("training");
        auto& tc = c.training;
        tc.epochs_stage1 = t.integer<std::size_t>("epochs_stage1", tc.epochs_stage1, 1);
        tc.epochs_stage2 = t.integer<std::size_t>("epochs_stage2", tc.epochs_stage2);
        tc.adam.learning_rate = t.number("learning_rate", tc.adam.learning_rate);
        tc.lambda_reg = t.number("lambda_reg", tc.lambda_reg);
        tc.early_stop_window = t.integer<std::size_t>("early_stop_window", tc.early_stop_window);
        tc.early_stop_tol = t.number("early_stop_tol", tc.early_stop_tol);
        if (t.has("loss_weights")) {
            Fields w = t.object("loss_weights");
            tc.weights.modeling = w.number("modeling", tc.weights.modeling);
            tc.weights.state = w.number("state", tc.weights.state);
            w.finish();
        }
        t.finish();
        tc.split_fraction = c.split_fraction;
        try {
            tc.validate();
        } catch (const UsageError& e) {
            throw UsageError(std::string("training: ") + e.what());
        }
    }

    {
        Fields t = top.object("tasks");
        auto& s = c.tasks;
        s.success_radius = t.number("success_radius", s.success_radius);
        if (t.has("predict")) {
            Fields f = t.object("predict");
            s.predict_x0 = f.vector("x0", s.predict_x0, n);
            s.predict_horizon = f.integer<std::size_t>("horizon", s.predict_horizon);
            f.finish();
        }
        if (t.has("lqr")) {
            Fields f = t.object("lqr");
            s.q_state = f.matrix("q_state", s.q_state, n, n);
            s.r_w = f.matrix("r_w", s.r_w, p, p);
            s.lqr_x0 = f.vector("x0", s.lqr_x0, n);
            s.lqr_steps = f.integer<std::size_t>("steps", s.lqr_steps);
            f.finish();
        }
        if (t.has("servo")) {
            Fields f = t.object("servo");
            s.servo_c = f.matrix("c", s.servo_c, -1, n);
            s.servo_reference = f.has("reference") ? f.vector("reference", Vector(), s.servo_c.rows()) : s.servo_reference;
            s.w_nu = f.number("w_nu", s.w_nu);
            s.servo_x0 = f.vector("x0", s.servo_x0, n);
            s.servo_steps = f.integer<std::size_t>("steps", s.servo_steps);
            f.finish();
        }
        if (t.has("mpc")) {
            Fields f = t.object("mpc");
            s.mpc_component = f.integer<Eigen::Index>("component", s.mpc_component);
            s.mpc_rate_weight = f.number("rate_weight", s.mpc_rate_weight);
            s.mpc_horizon = f.integer<std::size_t>("horizon", s.mpc_horizon, 1);
            s.mpc_switch_time = f.number("switch_time", s.mpc_switch_time);
            s.mpc_before = f.number("before", s.mpc_before);
            s.mpc_after = f.number("after", s.mpc_after);
            s.mpc_x0 = f.vector("x0", s.mpc_x0, n);
            s.mpc_steps = f.integer<std::size_t>("steps", s.mpc_steps);
            f.finish();
        }
        t.finish();
        try {
            s.validate(n, p);
        } catch (const UsageError& e) {
            throw UsageError(std::string("tasks: ") + e.what());
        }
    }

    {
        Fields e = top.object("eval");
        if (e.has("contour")) {
            Fields f = e.object("contour");
            if (f.has("grid")) c.contour.grid = parse_grid(f.object("grid"), c.contour.grid, n);
            c.contour.u = f.vector("u", c.contour.u, p);
            const auto metric = f.string("metric", c.contour.metric == ErrorMetric::modeling ? "modeling" : "state_prediction");
            if (metric == "modeling") c.contour.metric = ErrorMetric::modeling;
            else if (metric == "state_prediction") c.contour.metric = ErrorMetric::state_prediction;
            else throw UsageError(f.where("metric") + ": expected modeling or state_prediction");
            f.finish();
        }
        if (e.has("basin")) {
            Fields f = e.object("basin");
            if (f.has("grid")) c.basin.grid = parse_grid(f.object("grid"), c.basin.grid, n);
            c.basin.options.steps = f.integer<std::size_t>("steps", c.basin.options.steps);
            c.basin.options.success_radius = f.number("success_radius", c.basin.options.success_radius);
            const auto ctl = f.string("controller", "lqr");
            c.basin.controller = task_from_string(ctl);
            if (c.basin.controller == Task::predict) throw UsageError(f.where("controller") + ": expected lqr, servo or mpc");
            f.finish();
        }
        if (e.has("forecast")) {
            Fields f = e.object("forecast");
            c.forecast.x0 = f.vector("x0", c.forecast.x0, n);
            c.forecast.horizon = f.integer<std::size_t>("horizon", c.forecast.horizon);
            f.finish();
        }
        if (e.has("sensitivity")) {
            Fields f = e.object("sensitivity");
            c.sensitivity_trials = f.integer<std::size_t>("trials", c.sensitivity_trials, 1);
            f.finish();
        }
        e.finish();
    }
    c.basin.options.dt = c.tasks.dt;
    c.basin.options.h = c.tasks.h;
    top.finish();

    c.source = root;
    return c;
}

// Replaces the seed everywhere it is used (the `--seed` override).
inline void set_seed(RunConfig& c, std::uint64_t seed) {
    c.seed = seed;
    c.source["seed"] = seed;
}

inline RunConfig load_config(const std::string& path) {
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const DependencyError&) {
        throw UsageError("--config: cannot read '" + path + "'");
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw UsageError(path + ": not valid JSON (" + e.what() + ")");
    }
    return parse_config(j);
}

// Output location and thread count do not change results and are left out.
inline std::string config_hash(const RunConfig& c) {
    json j = c.source;
    j.erase("out");
    j.erase("threads");
    return io::hash_hex(j.dump());
}

} // namespace koop::cli
