#pragma once

#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "koop/dynamics/dataset.hpp"
#include "koop/io/format.hpp"

namespace koop {

inline std::string dataset_csv(const Dataset& d) {
    d.validate();
    const auto n = d.state_dim();
    const auto p = d.input_dim();
    std::ostringstream os;
    for (Eigen::Index j = 0; j < n; ++j) os << "chi_" << j + 1 << ",";
    for (Eigen::Index j = 0; j < p; ++j) os << "u_" << j + 1 << ",";
    for (Eigen::Index j = 0; j < n; ++j) os << "y_" << j + 1 << ",";
    os << "split\n";
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        for (Eigen::Index j = 0; j < n; ++j) os << io::fmt(d.states(r, j)) << ",";
        for (Eigen::Index j = 0; j < p; ++j) os << io::fmt(d.inputs(r, j)) << ",";
        for (Eigen::Index j = 0; j < n; ++j) os << io::fmt(d.successors(r, j)) << ",";
        os << (d.split[i] == Split::d1 ? "D1" : "D2") << "\n";
    }
    return os.str();
}

inline nlohmann::json dataset_metadata(const Dataset& d) {
    const auto& p = d.provenance;
    nlohmann::json box = nlohmann::json::array();
    for (const auto& iv : p.init_box) box.push_back({iv.lo, iv.hi});
    return {
        {"system", p.system},
        {"system_parameters", p.system_parameters},
        {"seed", p.seed},
        {"dt", p.dt},
        {"h", p.h},
        {"schedule", p.schedule},
        {"n_traj", p.n_traj},
        {"traj_len", p.traj_len},
        {"init_box", box},
        {"truncated_trajectories", p.truncated_trajectories},
        {"state_dim", d.state_dim()},
        {"input_dim", d.input_dim()},
        {"trajectory_lengths", d.trajectory_lengths},
    };
}

// Content hash over the CSV bytes; identical datasets give identical hashes.
inline std::string dataset_hash(const Dataset& d) { return io::hash_hex(dataset_csv(d)); }

inline Dataset parse_dataset(const std::string& csv, const nlohmann::json& meta) {
    Dataset d;
    Eigen::Index n = 0, p = 0;
    try {
        n = meta.at("state_dim").get<Eigen::Index>();
        p = meta.at("input_dim").get<Eigen::Index>();
        auto& prov = d.provenance;
        prov.system = meta.at("system").get<std::string>();
        prov.system_parameters = meta.at("system_parameters").get<std::map<std::string, double>>();
        prov.seed = meta.at("seed").get<std::uint64_t>();
        prov.dt = meta.at("dt").get<double>();
        prov.h = meta.at("h").get<double>();
        prov.schedule = meta.at("schedule").get<std::string>();
        prov.n_traj = meta.at("n_traj").get<std::size_t>();
        prov.traj_len = meta.at("traj_len").get<std::size_t>();
        for (const auto& iv : meta.at("init_box")) prov.init_box.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
        prov.truncated_trajectories = meta.at("truncated_trajectories").get<std::size_t>();
        d.trajectory_lengths = meta.at("trajectory_lengths").get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("dataset metadata: ") + e.what());
    }

    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw DataError("dataset CSV is empty");
    const auto header = io::split_csv_line(line);
    if (header.size() != static_cast<std::size_t>(2 * n + p + 1) || header.back() != "split")
        throw DataError("dataset CSV header does not match metadata dimensions");

    std::vector<std::vector<double>> rows;
    std::vector<Split> split;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto cells = io::split_csv_line(line);
        if (cells.size() != header.size()) throw DataError("dataset CSV line " + std::to_string(lineno) + ": wrong column count");
        std::vector<double> vals;
        for (std::size_t c = 0; c + 1 < cells.size(); ++c)
            vals.push_back(io::parse_double(cells[c], "dataset CSV line " + std::to_string(lineno)));
        rows.push_back(std::move(vals));
        if (cells.back() == "D1") split.push_back(Split::d1);
        else if (cells.back() == "D2") split.push_back(Split::d2);
        else throw DataError("dataset CSV line " + std::to_string(lineno) + ": split must be D1 or D2");
    }
    const auto m = static_cast<Eigen::Index>(rows.size());
    d.states.resize(m, n);
    d.inputs.resize(m, p);
    d.successors.resize(m, n);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < n; ++j) d.states(i, j) = r[static_cast<std::size_t>(j)];
        for (Eigen::Index j = 0; j < p; ++j) d.inputs(i, j) = r[static_cast<std::size_t>(n + j)];
        for (Eigen::Index j = 0; j < n; ++j) d.successors(i, j) = r[static_cast<std::size_t>(n + p + j)];
    }
    d.split = std::move(split);
    d.validate();
    return d;
}

} // namespace koop
