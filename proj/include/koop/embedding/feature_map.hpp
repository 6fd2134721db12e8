#pragma once

#include <algorithm>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "koop/numerics/mlp.hpp"

namespace koop {

// Exponent tuples for the monomial dictionary, degree 1..max_degree.
// Within each degree: pure powers x_i^d in index order first, then mixed
// monomials in descending lexicographic order of their exponent tuples.
// For n = 2, degree 3 this is x1 x2 x1^2 x2^2 x1x2 x1^3 x2^3 x1^2x2 x1x2^2.
inline std::vector<std::vector<int>> monomial_exponents(Eigen::Index n, int max_degree) {
    if (n < 1 || max_degree < 1) throw UsageError("monomial dictionary needs n >= 1 and degree >= 1");
    std::vector<std::vector<int>> out;
    for (int d = 1; d <= max_degree; ++d) {
        std::vector<std::vector<int>> all;
        std::vector<int> e(static_cast<std::size_t>(n), 0);
        // Enumerate compositions of d into n parts, descending lexicographic.
        auto rec = [&](auto&& self, std::size_t pos, int remaining) -> void {
            if (pos + 1 == e.size()) {
                e[pos] = remaining;
                all.push_back(e);
                return;
            }
            for (int v = remaining; v >= 0; --v) {
                e[pos] = v;
                self(self, pos + 1, remaining - v);
            }
        };
        rec(rec, 0, d);
        auto nonzero = [](const std::vector<int>& x) { return std::count_if(x.begin(), x.end(), [](int v) { return v != 0; }); };
        for (Eigen::Index i = 0; i < n; ++i) {
            std::vector<int> pure(static_cast<std::size_t>(n), 0);
            pure[static_cast<std::size_t>(i)] = d;
            out.push_back(pure);
        }
        if (d == 1) continue;
        for (const auto& x : all)
            if (nonzero(x) >= 2) out.push_back(x);
    }
    return out;
}

// Maps a state chi in R^n to the embedded state xi in R^{N_x} whose first n
// entries are chi itself.
struct FeatureMap {
    enum class Kind { augmented_mlp, monomial, sine };

    Kind kind = Kind::augmented_mlp;
    Eigen::Index state_dim = 0;
    std::optional<Mlp> net;                 // augmented_mlp: extra features, absent means N_x = n
    int degree = 0;                         // monomial
    std::vector<std::vector<int>> exponents; // monomial

    static FeatureMap identity(Eigen::Index n) {
        FeatureMap f;
        f.kind = Kind::augmented_mlp;
        f.state_dim = n;
        return f;
    }

    static FeatureMap augmented(Eigen::Index n, Eigen::Index extra, std::vector<Eigen::Index> hidden, Activation act,
                                std::mt19937_64& rng) {
        FeatureMap f = identity(n);
        if (extra < 0) throw UsageError("feature map: negative feature count");
        if (extra == 0) return f;
        std::vector<Eigen::Index> sizes{n};
        sizes.insert(sizes.end(), hidden.begin(), hidden.end());
        sizes.push_back(extra);
        f.net = Mlp(std::move(sizes), act, rng);
        return f;
    }

    static FeatureMap monomial(Eigen::Index n, int degree) {
        FeatureMap f;
        f.kind = Kind::monomial;
        f.state_dim = n;
        f.degree = degree;
        f.exponents = monomial_exponents(n, degree);
        return f;
    }

    // [chi; sin(chi)], component-wise.
    static FeatureMap sine(Eigen::Index n) {
        FeatureMap f;
        f.kind = Kind::sine;
        f.state_dim = n;
        return f;
    }

    [[nodiscard]] Eigen::Index dim() const {
        if (kind == Kind::sine) return 2 * state_dim;
        if (kind == Kind::monomial) return static_cast<Eigen::Index>(exponents.size());
        return state_dim + (net ? net->output_dim() : 0);
    }

    [[nodiscard]] bool has_parameters() const { return kind == Kind::augmented_mlp && net.has_value(); }

    void validate() const {
        if (state_dim < 1) throw DataError("feature map: state dimension must be >= 1");
        if (kind == Kind::augmented_mlp && net) {
            net->validate();
            if (net->input_dim() != state_dim) throw DataError("feature map: network input width != state dimension");
        }
        if (kind == Kind::monomial && exponents != monomial_exponents(state_dim, degree))
            throw DataError("feature map: monomial exponents do not match the dictionary ordering");
    }

    // Row i of the result embeds row i of x.
    [[nodiscard]] Matrix embed_batch(const Matrix& x) const {
        if (x.cols() != state_dim)
            throw UsageError("embed: input has " + std::to_string(x.cols()) + " columns, expected " +
                             std::to_string(state_dim));
        if (kind == Kind::monomial) {
            Matrix out(x.rows(), dim());
            for (std::size_t f = 0; f < exponents.size(); ++f) {
                auto col = out.col(static_cast<Eigen::Index>(f));
                col.setOnes();
                for (Eigen::Index j = 0; j < state_dim; ++j)
                    for (int e = 0; e < exponents[f][static_cast<std::size_t>(j)]; ++e)
                        col.array() *= x.col(j).array();
            }
            return out;
        }
        if (kind == Kind::sine) {
            Matrix out(x.rows(), dim());
            out << x, x.array().sin().matrix();
            return out;
        }
        if (!net) return x;
        Matrix out(x.rows(), dim());
        out << x, net->forward(x);
        return out;
    }

    [[nodiscard]] Vector embed(const Vector& chi) const { return embed_batch(chi.transpose()).row(0).transpose(); }

    // Tape version. `vars` binds the network parameters; it may be null when
    // the map has none.
    [[nodiscard]] ad::Var embed(ad::Var x, const MlpVars* vars) const {
        if (kind != Kind::augmented_mlp || !net) {
            if (kind == Kind::augmented_mlp) return x;
            return x.tape()->constant(embed_batch(x.value()));
        }
        if (!vars) throw UsageError("embed: network parameters were not bound on the tape");
        return ad::hcat(x, forward(*net, *vars, x));
    }
};

} // namespace koop
