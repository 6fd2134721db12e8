#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "koop/dynamics/integrator.hpp"
#include "koop/parallel.hpp"

namespace koop {

enum class Split : std::uint8_t { d1 = 1, d2 = 2 };

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

// Six cosine inputs u_k = cos(20 i k dt), i = 0..5, assigned round-robin over
// trajectories (trajectory t uses i = t mod 6).
struct CosineBank {
    double base_frequency = 20.0;
    int signals = 6;

    [[nodiscard]] int signal_for(std::size_t trajectory) const {
        return static_cast<int>(trajectory % static_cast<std::size_t>(signals));
    }
    [[nodiscard]] double value(int signal, long k, double dt) const {
        return std::cos(base_frequency * signal * static_cast<double>(k) * dt);
    }
};

struct Provenance {
    std::string system;
    std::map<std::string, double> system_parameters;
    std::uint64_t seed = 0;
    double dt = 0.0;
    double h = 0.0;
    std::string schedule = "cosine_bank";
    std::size_t n_traj = 0;
    std::size_t traj_len = 0;
    std::vector<Interval> init_box;
    std::size_t truncated_trajectories = 0;
};

// Triples (chi_i, u_i, y_i), one per row. Rows are grouped by trajectory in
// order; trajectory_lengths holds the number of transitions per trajectory.
struct Dataset {
    Matrix states;     // M x n
    Matrix inputs;     // M x p
    Matrix successors; // M x n
    std::vector<Split> split;
    std::vector<std::size_t> trajectory_lengths;
    Provenance provenance;

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(states.rows()); }
    [[nodiscard]] Eigen::Index state_dim() const { return states.cols(); }
    [[nodiscard]] Eigen::Index input_dim() const { return inputs.cols(); }
    [[nodiscard]] std::size_t trajectory_count() const { return trajectory_lengths.size(); }

    void validate() const {
        if (inputs.rows() != states.rows() || successors.rows() != states.rows())
            throw DataError("dataset: row counts differ (X " + shape_str(states) + ", U " + shape_str(inputs) +
                            ", Y " + shape_str(successors) + ")");
        if (successors.cols() != states.cols()) throw DataError("dataset: X and Y have different widths");
        if (split.size() != size()) throw DataError("dataset: split marker count != sample count");
        const auto total = std::accumulate(trajectory_lengths.begin(), trajectory_lengths.end(), std::size_t{0});
        if (total != size()) throw DataError("dataset: trajectory layout does not cover all samples");
    }

    [[nodiscard]] std::size_t count(Split s) const {
        return static_cast<std::size_t>(std::count(split.begin(), split.end(), s));
    }

    // Rows whose marker is in `which`.
    [[nodiscard]] Dataset subset(std::initializer_list<Split> which) const {
        std::vector<Eigen::Index> idx;
        for (std::size_t i = 0; i < size(); ++i)
            if (std::find(which.begin(), which.end(), split[i]) != which.end())
                idx.push_back(static_cast<Eigen::Index>(i));
        Dataset out;
        out.states = states(idx, Eigen::all);
        out.inputs = inputs(idx, Eigen::all);
        out.successors = successors(idx, Eigen::all);
        for (auto i : idx) out.split.push_back(split[static_cast<std::size_t>(i)]);
        // Recompute the layout over the kept rows.
        std::size_t row = 0;
        for (auto len : trajectory_lengths) {
            std::size_t kept = 0;
            for (std::size_t r = row; r < row + len; ++r)
                if (std::find(which.begin(), which.end(), split[r]) != which.end()) ++kept;
            if (kept) out.trajectory_lengths.push_back(kept);
            row += len;
        }
        out.provenance = provenance;
        return out;
    }
};

struct GenerationSpec {
    std::size_t n_traj = 600;
    std::size_t traj_len = 50;
    std::vector<Interval> init_box;
    CosineBank schedule;
    double dt = 0.05;
    double h = 0.01;
    std::uint64_t seed = 0;
    double divergence_bound = 1e6;
    unsigned threads = 1;
};

// Re-simulates a sample of rows and checks y = F(chi, u) to `tol`.
// fraction in (0, 1]; at least one row is checked when the set is nonempty.
inline void verify_dataset(const DynSystem& sys, const Dataset& d, double fraction, double tol, std::uint64_t seed) {
    d.validate();
    if (d.size() == 0) return;
    const auto n_check = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(d.size()))));
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_int_distribution<std::size_t> pick(0, d.size() - 1);
    for (std::size_t c = 0; c < n_check; ++c) {
        const auto i = static_cast<Eigen::Index>(n_check >= d.size() ? c : pick(rng));
        const Vector y = sample_map(sys, d.states.row(i).transpose(), d.inputs.row(i).transpose(), d.provenance.dt,
                                    d.provenance.h);
        const double err = (y - d.successors.row(i).transpose()).cwiseAbs().maxCoeff();
        if (!(err <= tol))
            throw DataError("dataset row " + std::to_string(i) + " does not satisfy y = F(chi, u) (error " +
                            std::to_string(err) + ")");
    }
}

inline Dataset generate_dataset(const DynSystem& sys, const GenerationSpec& spec) {
    if (spec.n_traj < 1 || spec.traj_len < 1) throw UsageError("generate_dataset: n_traj and traj_len must be >= 1");
    if (spec.init_box.size() != static_cast<std::size_t>(sys.state_dim))
        throw UsageError("generate_dataset: init_box has " + std::to_string(spec.init_box.size()) +
                         " intervals for a " + std::to_string(sys.state_dim) + "-dimensional state");
    for (const auto& iv : spec.init_box)
        if (!(iv.lo <= iv.hi) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi))
            throw UsageError("generate_dataset: invalid init_box interval");
    if (sys.is_continuous()) (void)substeps(spec.dt, spec.h);

    const auto n = sys.state_dim;
    const auto p = sys.input_dim;

    struct Traj {
        std::vector<Vector> chi, u, y;
        bool truncated = false;
    };
    std::vector<Traj> trajs(spec.n_traj);

    parallel_for(spec.n_traj, spec.threads, [&](std::size_t t) {
        std::seed_seq seq{static_cast<std::uint32_t>(spec.seed & 0xffffffffu), static_cast<std::uint32_t>(spec.seed >> 32),
                          static_cast<std::uint32_t>(t & 0xffffffffu), static_cast<std::uint32_t>(t >> 32)};
        std::mt19937_64 rng(seq);
        Vector z(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            std::uniform_real_distribution<double> dist(spec.init_box[static_cast<std::size_t>(j)].lo,
                                                        spec.init_box[static_cast<std::size_t>(j)].hi);
            z(j) = dist(rng);
        }
        const int signal = spec.schedule.signal_for(t);
        Traj& tr = trajs[t];
        for (std::size_t k = 0; k + 1 < spec.traj_len; ++k) {
            Vector u = Vector::Constant(p, spec.schedule.value(signal, static_cast<long>(k), spec.dt));
            Vector next;
            try {
                next = sample_map(sys, z, u, spec.dt, spec.h);
            } catch (const DivergenceError&) {
                tr.truncated = true;
                break;
            }
            if (!next.allFinite() || next.cwiseAbs().maxCoeff() > spec.divergence_bound) {
                tr.truncated = true;
                break;
            }
            tr.chi.push_back(z);
            tr.u.push_back(u);
            tr.y.push_back(next);
            z = std::move(next);
        }
    });

    std::size_t total = 0;
    for (const auto& tr : trajs) total += tr.chi.size();

    Dataset d;
    d.states.resize(static_cast<Eigen::Index>(total), n);
    d.inputs.resize(static_cast<Eigen::Index>(total), p);
    d.successors.resize(static_cast<Eigen::Index>(total), n);
    d.split.assign(total, Split::d1);
    Eigen::Index row = 0;
    std::size_t truncated = 0;
    for (const auto& tr : trajs) {
        if (tr.truncated) ++truncated;
        if (tr.chi.empty()) continue;
        d.trajectory_lengths.push_back(tr.chi.size());
        for (std::size_t k = 0; k < tr.chi.size(); ++k, ++row) {
            d.states.row(row) = tr.chi[k].transpose();
            d.inputs.row(row) = tr.u[k].transpose();
            d.successors.row(row) = tr.y[k].transpose();
        }
    }

    auto& prov = d.provenance;
    prov.system = sys.name;
    prov.system_parameters = sys.parameters;
    prov.seed = spec.seed;
    prov.dt = spec.dt;
    prov.h = spec.h;
    prov.n_traj = spec.n_traj;
    prov.traj_len = spec.traj_len;
    prov.init_box = spec.init_box;
    prov.truncated_trajectories = truncated;

    verify_dataset(sys, d, 0.01, 1e-9, spec.seed);
    return d;
}

// Marks round(fraction * trajectories) whole trajectories as D1 after a seeded
// shuffle; the rest are D2.
inline Dataset split_dataset(Dataset d, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw UsageError("split_dataset: fraction must lie in (0, 1)");
    d.validate();
    const std::size_t nt = d.trajectory_count();
    std::vector<std::size_t> order(nt);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_d1 = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(nt)));
    std::vector<Split> per_traj(nt, Split::d2);
    for (std::size_t i = 0; i < n_d1 && i < nt; ++i) per_traj[order[i]] = Split::d1;

    std::size_t row = 0;
    for (std::size_t t = 0; t < nt; ++t)
        for (std::size_t k = 0; k < d.trajectory_lengths[t]; ++k) d.split[row++] = per_traj[t];
    return d;
}

// Per-trajectory split markers, in trajectory order.
inline std::vector<Split> trajectory_splits(const Dataset& d) {
    std::vector<Split> out;
    std::size_t row = 0;
    for (auto len : d.trajectory_lengths) {
        out.push_back(d.split[row]);
        row += len;
    }
    return out;
}

} // namespace koop
