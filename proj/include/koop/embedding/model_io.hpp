#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "koop/embedding/model.hpp"
#include "koop/io/format.hpp"

namespace koop {

using json = nlohmann::json;

namespace detail {

inline json matrix_json(const Matrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", to_row_major(m)}};
}

inline Matrix matrix_from_json(const json& j, const std::string& what) {
    try {
        const auto rows = j.at("rows").get<std::size_t>();
        const auto cols = j.at("cols").get<std::size_t>();
        const auto data = j.at("data").get<std::vector<double>>();
        Matrix m = from_row_major(rows, cols, data);
        require_finite(m, what);
        return m;
    } catch (const json::exception& e) {
        throw DataError(what + ": " + e.what());
    } catch (const UsageError& e) {
        throw DataError(what + ": " + e.what());
    }
}

} // namespace detail

inline json to_json(const Mlp& net) {
    json layers = json::array();
    for (std::size_t l = 0; l < net.weights.size(); ++l)
        layers.push_back({{"weights", to_nested(net.weights[l])}, {"bias", to_row_major(net.biases[l])}});
    return {{"sizes", net.sizes}, {"activation", to_string(net.activation)}, {"layers", layers}};
}

inline Mlp mlp_from_json(const json& j) {
    try {
        Mlp net;
        net.sizes = j.at("sizes").get<std::vector<Eigen::Index>>();
        net.activation = activation_from_string(j.at("activation").get<std::string>());
        for (const auto& layer : j.at("layers")) {
            net.weights.push_back(from_nested(layer.at("weights").get<std::vector<std::vector<double>>>()));
            const auto b = layer.at("bias").get<std::vector<double>>();
            net.biases.push_back(from_row_major(1, b.size(), b));
        }
        net.validate();
        return net;
    } catch (const json::exception& e) {
        throw DataError(std::string("network: ") + e.what());
    }
}

inline json to_json(const FeatureMap& g) {
    json j{{"state_dim", g.state_dim}, {"dim", g.dim()}};
    if (g.kind == FeatureMap::Kind::monomial) {
        j["kind"] = "monomial";
        j["degree"] = g.degree;
    } else if (g.kind == FeatureMap::Kind::sine) {
        j["kind"] = "sine";
    } else {
        j["kind"] = "augmented_mlp";
        j["network"] = g.net ? to_json(*g.net) : json(nullptr);
    }
    return j;
}

inline FeatureMap feature_map_from_json(const json& j) {
    try {
        const auto kind = j.at("kind").get<std::string>();
        const auto n = j.at("state_dim").get<Eigen::Index>();
        FeatureMap g;
        if (kind == "monomial") {
            g = FeatureMap::monomial(n, j.at("degree").get<int>());
        } else if (kind == "sine") {
            g = FeatureMap::sine(n);
        } else if (kind == "augmented_mlp") {
            g = FeatureMap::identity(n);
            if (!j.at("network").is_null()) g.net = mlp_from_json(j.at("network"));
        } else {
            throw DataError("feature map: unknown kind '" + kind + "'");
        }
        g.validate();
        if (j.contains("dim") && j.at("dim").get<Eigen::Index>() != g.dim())
            throw DataError("feature map: recorded dimension does not match the network");
        return g;
    } catch (const json::exception& e) {
        throw DataError(std::string("feature map: ") + e.what());
    }
}

inline json to_json(const TestFunctionSet& t) {
    json j{{"state_dim", t.state_dim}, {"input_dim", t.input_dim}};
    switch (t.kind) {
    case TestFunctionSet::Kind::tied: j["kind"] = "tied"; break;
    case TestFunctionSet::Kind::free_mlp:
        j["kind"] = "free_mlp";
        j["network"] = to_json(t.net);
        j["skip"] = detail::matrix_json(t.skip);
        break;
    case TestFunctionSet::Kind::structured:
        j["kind"] = "structured";
        j["network"] = to_json(t.net);
        break;
    }
    return j;
}

inline TestFunctionSet test_functions_from_json(const json& j) {
    try {
        TestFunctionSet t;
        t.state_dim = j.at("state_dim").get<Eigen::Index>();
        t.input_dim = j.at("input_dim").get<Eigen::Index>();
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "tied") {
            t.kind = TestFunctionSet::Kind::tied;
        } else if (kind == "free_mlp") {
            t.kind = TestFunctionSet::Kind::free_mlp;
            t.net = mlp_from_json(j.at("network"));
            t.skip = detail::matrix_from_json(j.at("skip"), "test-function skip");
        } else if (kind == "structured") {
            t.kind = TestFunctionSet::Kind::structured;
            t.net = mlp_from_json(j.at("network"));
        } else {
            throw DataError("test functions: unknown kind '" + kind + "'");
        }
        t.validate();
        return t;
    } catch (const json::exception& e) {
        throw DataError(std::string("test functions: ") + e.what());
    }
}

struct ModelProvenance {
    std::string dataset_hash;
    std::string config_hash;
    std::string trainer; // edmd | normal_nn | proposed | ...
};

inline json to_json(const EmbeddingModel& m, const ModelProvenance& prov) {
    return {
        {"format", "koop-embedding-model"},
        {"version", 1},
        {"state_dim", m.state_dim()},
        {"embed_dim", m.embed_dim()},
        {"input_dim", m.input_dim()},
        {"features", to_json(m.features)},
        {"A", detail::matrix_json(m.A)},
        {"B", detail::matrix_json(m.B)},
        {"provenance", {{"dataset_hash", prov.dataset_hash}, {"config_hash", prov.config_hash}, {"trainer", prov.trainer}}},
    };
}

inline EmbeddingModel model_from_json(const json& j, ModelProvenance* prov = nullptr) {
    try {
        if (j.at("format").get<std::string>() != "koop-embedding-model") throw DataError("not an embedding model document");
        EmbeddingModel m(feature_map_from_json(j.at("features")), detail::matrix_from_json(j.at("A"), "model A"),
                         detail::matrix_from_json(j.at("B"), "model B"));
        if (prov) {
            const auto& p = j.at("provenance");
            prov->dataset_hash = p.at("dataset_hash").get<std::string>();
            prov->config_hash = p.at("config_hash").get<std::string>();
            prov->trainer = p.at("trainer").get<std::string>();
        }
        return m;
    } catch (const json::exception& e) {
        throw DataError(std::string("model: ") + e.what());
    }
}

inline std::string model_hash(const EmbeddingModel& m) { return io::hash_hex(to_json(m, {}).dump()); }

} // namespace koop
