#pragma once

#include <random>
#include <string>

#include "koop/embedding/feature_map.hpp"

namespace koop {

// The test functions phi(chi, u) that fix the oblique projection.
//
//   tied:       phi = [g(chi); u], N_hat = N_x + p (orthogonal projection, EDMD)
//   free_mlp:   phi = S^T [chi; u] + MLP([chi; u]), S learnable (n+p) x N_hat
//   structured: phi = [chi; u; MLP(chi)], only the MLP is learnable
struct TestFunctionSet {
    enum class Kind { tied, free_mlp, structured };

    Kind kind = Kind::tied;
    Eigen::Index state_dim = 0;
    Eigen::Index input_dim = 0;
    Mlp net;
    Matrix skip; // free_mlp only, (n+p) x N_hat

    static TestFunctionSet tied(Eigen::Index n, Eigen::Index p) {
        TestFunctionSet t;
        t.kind = Kind::tied;
        t.state_dim = n;
        t.input_dim = p;
        return t;
    }

    // Freshly initialized free test functions with zero skip.
    static TestFunctionSet free_mlp(Eigen::Index n, Eigen::Index p, Eigen::Index count,
                                    std::vector<Eigen::Index> hidden, Activation act, std::mt19937_64& rng) {
        if (count < 1) throw UsageError("test functions: count must be >= 1");
        TestFunctionSet t;
        t.kind = Kind::free_mlp;
        t.state_dim = n;
        t.input_dim = p;
        std::vector<Eigen::Index> sizes{n + p};
        sizes.insert(sizes.end(), hidden.begin(), hidden.end());
        sizes.push_back(count);
        t.net = Mlp(std::move(sizes), act, rng);
        t.skip = Matrix::Zero(n + p, count);
        return t;
    }

    // Free test functions whose values equal [g(chi); u] exactly, so the
    // oblique fit starts at the orthogonal one. The network copies g's
    // weights (zero columns for u) and the skip selects chi and u.
    // `hidden` is only used when g has no network of its own.
    static TestFunctionSet tied_copy(const FeatureMap& g, Eigen::Index p, std::vector<Eigen::Index> hidden,
                                     Activation act, std::mt19937_64& rng) {
        if (g.kind != FeatureMap::Kind::augmented_mlp)
            throw UsageError("tied_copy: only augmented feature maps can seed free test functions");
        const Eigen::Index n = g.state_dim;
        const Eigen::Index nx = g.dim();
        const Eigen::Index nhat = nx + p;
        TestFunctionSet t;
        t.kind = Kind::free_mlp;
        t.state_dim = n;
        t.input_dim = p;
        if (g.net) {
            const Mlp& src = *g.net;
            t.net = src;
            t.net.sizes.front() = n + p;
            t.net.sizes.back() = nhat;
            Matrix w0 = Matrix::Zero(n + p, src.weights.front().cols());
            w0.topRows(n) = src.weights.front();
            t.net.weights.front() = w0;
            const Matrix& wl = src.weights.back();
            Matrix out_w = Matrix::Zero(wl.rows(), nhat);
            out_w.middleCols(n, nx - n) = wl;
            Matrix out_b = Matrix::Zero(1, nhat);
            out_b.middleCols(n, nx - n) = src.biases.back();
            if (src.weights.size() == 1) {
                // Single affine layer: first layer is also the output layer.
                Matrix w = Matrix::Zero(n + p, nhat);
                w.block(0, n, n, nx - n) = wl;
                t.net.weights.front() = w;
            } else {
                t.net.weights.back() = out_w;
            }
            t.net.biases.back() = out_b;
        } else {
            std::vector<Eigen::Index> sizes{n + p};
            sizes.insert(sizes.end(), hidden.begin(), hidden.end());
            sizes.push_back(nhat);
            t.net = Mlp(std::move(sizes), act, rng);
            t.net.weights.back().setZero();
            t.net.biases.back().setZero();
        }
        t.skip = Matrix::Zero(n + p, nhat);
        for (Eigen::Index i = 0; i < n; ++i) t.skip(i, i) = 1.0;
        for (Eigen::Index j = 0; j < p; ++j) t.skip(n + j, nx + j) = 1.0;
        return t;
    }

    static TestFunctionSet structured(Eigen::Index n, Eigen::Index p, Eigen::Index extra,
                                      std::vector<Eigen::Index> hidden, Activation act, std::mt19937_64& rng) {
        if (extra < 1) throw UsageError("structured test functions need at least one learned component");
        TestFunctionSet t;
        t.kind = Kind::structured;
        t.state_dim = n;
        t.input_dim = p;
        std::vector<Eigen::Index> sizes{n};
        sizes.insert(sizes.end(), hidden.begin(), hidden.end());
        sizes.push_back(extra);
        t.net = Mlp(std::move(sizes), act, rng);
        return t;
    }

    [[nodiscard]] Eigen::Index dim(const FeatureMap& g) const {
        switch (kind) {
        case Kind::tied: return g.dim() + input_dim;
        case Kind::free_mlp: return net.output_dim();
        case Kind::structured: return state_dim + input_dim + net.output_dim();
        }
        return 0;
    }

    [[nodiscard]] bool has_parameters() const { return kind != Kind::tied; }

    [[nodiscard]] std::vector<Matrix*> parameters() {
        if (kind == Kind::tied) return {};
        auto ps = net.parameters();
        if (kind == Kind::free_mlp) ps.push_back(&skip);
        return ps;
    }

    void validate() const {
        if (kind == Kind::tied) return;
        net.validate();
        if (kind == Kind::free_mlp) {
            if (net.input_dim() != state_dim + input_dim) throw DataError("test functions: network input width");
            if (skip.rows() != state_dim + input_dim || skip.cols() != net.output_dim())
                throw DataError("test functions: skip shape " + shape_str(skip));
            require_finite(skip, "test-function skip");
        } else if (net.input_dim() != state_dim) {
            throw DataError("structured test functions: network input width != state dimension");
        }
    }

    [[nodiscard]] Matrix eval_batch(const FeatureMap& g, const Matrix& x, const Matrix& u) const {
        if (x.rows() != u.rows()) throw UsageError("test functions: X and U row counts differ");
        if (u.cols() != input_dim || x.cols() != state_dim) throw UsageError("test functions: X/U widths");
        switch (kind) {
        case Kind::tied: {
            Matrix out(x.rows(), dim(g));
            out << g.embed_batch(x), u;
            return out;
        }
        case Kind::free_mlp: {
            Matrix xu(x.rows(), state_dim + input_dim);
            xu << x, u;
            Matrix out = xu * skip;
            out += net.forward(xu);
            return out;
        }
        case Kind::structured: {
            Matrix out(x.rows(), dim(g));
            out << x, u, net.forward(x);
            return out;
        }
        }
        return {};
    }

    [[nodiscard]] Vector eval(const FeatureMap& g, const Vector& chi, const Vector& u) const {
        return eval_batch(g, chi.transpose(), u.transpose()).row(0).transpose();
    }
};

// Tape handles for a TestFunctionSet's parameters, in TestFunctionSet::parameters() order.
struct TestFunctionVars {
    MlpVars net;
    ad::Var skip;

    [[nodiscard]] std::vector<ad::Var> flat() const {
        auto out = net.flat();
        if (skip.valid()) out.push_back(skip);
        return out;
    }
};

inline TestFunctionVars bind(ad::Tape& tape, const TestFunctionSet& t, bool trainable) {
    TestFunctionVars v;
    if (t.kind == TestFunctionSet::Kind::tied) return v;
    v.net = bind(tape, t.net, trainable);
    if (t.kind == TestFunctionSet::Kind::free_mlp) v.skip = trainable ? tape.input(t.skip) : tape.constant(t.skip);
    return v;
}

// Tape evaluation. `psi` is the already-embedded [g(X), U] block, reused by the tied kind.
inline ad::Var eval_tests(const TestFunctionSet& t, const TestFunctionVars& vars, ad::Var x, ad::Var u, ad::Var psi) {
    switch (t.kind) {
    case TestFunctionSet::Kind::tied: return psi;
    case TestFunctionSet::Kind::free_mlp: {
        ad::Var xu = ad::hcat(x, u);
        return ad::add(ad::matmul(xu, vars.skip), forward(t.net, vars.net, xu));
    }
    case TestFunctionSet::Kind::structured: return ad::hcat(ad::hcat(x, u), forward(t.net, vars.net, x));
    }
    return psi;
}

} // namespace koop
