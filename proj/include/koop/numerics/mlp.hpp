#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "koop/numerics/matrix.hpp"
#include "koop/numerics/tape.hpp"

namespace koop {

using ad::Activation;

inline std::string to_string(Activation a) {
    switch (a) {
    case Activation::swish: return "swish";
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
    }
    return "identity";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "swish") return Activation::swish;
    if (s == "relu") return Activation::relu;
    if (s == "identity") return Activation::identity;
    throw UsageError("unknown activation '" + s + "' (expected swish, relu or identity)");
}

// Fully connected feed-forward network. Hidden layers use `activation`, the
// output layer is affine. Batches are row-major in samples: X is M x in,
// each layer computes act(X * W + b) with W: in x out and b: 1 x out.
struct Mlp {
    std::vector<Eigen::Index> sizes;
    std::vector<Matrix> weights;
    std::vector<Matrix> biases;
    Activation activation = Activation::swish;

    Mlp() = default;

    // Uniform(+-sqrt(6/(fan_in+fan_out))) weights, zero biases.
    Mlp(std::vector<Eigen::Index> layer_sizes, Activation act, std::mt19937_64& rng)
        : sizes(std::move(layer_sizes)), activation(act) {
        if (sizes.size() < 2) throw UsageError("Mlp needs at least input and output sizes");
        for (auto s : sizes)
            if (s < 1) throw UsageError("Mlp layer sizes must be >= 1");
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            const double bound = std::sqrt(6.0 / static_cast<double>(sizes[l] + sizes[l + 1]));
            std::uniform_real_distribution<double> dist(-bound, bound);
            Matrix w(sizes[l], sizes[l + 1]);
            for (Eigen::Index j = 0; j < w.cols(); ++j)
                for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
            weights.push_back(std::move(w));
            biases.push_back(Matrix::Zero(1, sizes[l + 1]));
        }
    }

    [[nodiscard]] Eigen::Index input_dim() const { return sizes.front(); }
    [[nodiscard]] Eigen::Index output_dim() const { return sizes.back(); }
    [[nodiscard]] std::size_t layer_count() const { return weights.size(); }

    void validate() const {
        if (sizes.size() < 2 || weights.size() + 1 != sizes.size() || biases.size() != weights.size())
            throw DataError("Mlp: inconsistent layer structure");
        for (std::size_t l = 0; l < weights.size(); ++l) {
            if (weights[l].rows() != sizes[l] || weights[l].cols() != sizes[l + 1])
                throw DataError("Mlp: layer " + std::to_string(l) + " weight shape " + shape_str(weights[l]));
            if (biases[l].rows() != 1 || biases[l].cols() != sizes[l + 1])
                throw DataError("Mlp: layer " + std::to_string(l) + " bias shape " + shape_str(biases[l]));
            require_finite(weights[l], "Mlp weight");
            require_finite(biases[l], "Mlp bias");
        }
    }

    [[nodiscard]] Matrix forward(const Matrix& x) const {
        if (x.cols() != input_dim())
            throw UsageError("Mlp::forward: input has " + std::to_string(x.cols()) + " columns, expected " +
                             std::to_string(input_dim()));
        Matrix h = x;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            Matrix z = h * weights[l];
            z.rowwise() += biases[l].row(0);
            h = (l + 1 < weights.size()) ? ad::apply_activation(activation, z) : z;
        }
        return h;
    }

    // Parameters in a fixed order: W0, b0, W1, b1, ...
    [[nodiscard]] std::vector<Matrix*> parameters() {
        std::vector<Matrix*> out;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            out.push_back(&weights[l]);
            out.push_back(&biases[l]);
        }
        return out;
    }

    [[nodiscard]] std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < weights.size(); ++l)
            n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
        return n;
    }
};

// Tape handles for one Mlp's parameters, same order as Mlp::parameters().
struct MlpVars {
    std::vector<ad::Var> weights;
    std::vector<ad::Var> biases;

    [[nodiscard]] std::vector<ad::Var> flat() const {
        std::vector<ad::Var> out;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            out.push_back(weights[l]);
            out.push_back(biases[l]);
        }
        return out;
    }
};

inline MlpVars bind(ad::Tape& tape, const Mlp& net, bool trainable) {
    MlpVars v;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        v.weights.push_back(trainable ? tape.input(net.weights[l]) : tape.constant(net.weights[l]));
        v.biases.push_back(trainable ? tape.input(net.biases[l]) : tape.constant(net.biases[l]));
    }
    return v;
}

inline ad::Var forward(const Mlp& net, const MlpVars& vars, ad::Var x) {
    ad::Var h = x;
    for (std::size_t l = 0; l < vars.weights.size(); ++l) {
        ad::Var z = ad::add_row(ad::matmul(h, vars.weights[l]), vars.biases[l]);
        h = (l + 1 < vars.weights.size()) ? ad::activate(z, net.activation) : z;
    }
    return h;
}

} // namespace koop
