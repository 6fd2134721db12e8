#pragma once

// Minimal matrix-valued reverse-mode automatic differentiation.
//
// Every node on the tape holds a dense matrix. Scalars are 1x1 matrices.
// Nodes are appended in evaluation order, so the index order is a
// topological order and the reverse pass simply walks indices backwards.

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "koop/numerics/matrix.hpp"

namespace koop::ad {

class Tape;

class Var {
public:
    Var() = default;

    [[nodiscard]] std::size_t id() const noexcept { return id_; }
    [[nodiscard]] Tape* tape() const noexcept { return tape_; }
    [[nodiscard]] bool valid() const noexcept { return tape_ != nullptr; }
    [[nodiscard]] const Matrix& value() const;
    [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
    [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
    [[nodiscard]] double scalar() const;

private:
    friend class Tape;
    Var(Tape* t, std::size_t id) : tape_(t), id_(id) {}
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

using Inputs = std::vector<const Matrix*>;
using ForwardFn = std::function<Matrix(const Inputs&)>;
// (output adjoint, output value, parent values, parent adjoints). A parent
// adjoint pointer is null when that parent does not need a gradient.
using BackwardFn = std::function<void(const Matrix&, const Matrix&, const Inputs&, std::vector<Matrix*>&)>;

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Differentiable leaf (a parameter or any input we want gradients for).
    Var input(Matrix v) { return push_leaf(std::move(v), true); }
    // Non-differentiable leaf.
    Var constant(Matrix v) { return push_leaf(std::move(v), false); }

    Var record(std::vector<std::size_t> parents, ForwardFn fwd, BackwardFn bwd) {
        Node n;
        n.parents = std::move(parents);
        for (auto p : n.parents) n.needs_grad = n.needs_grad || nodes_.at(p).needs_grad;
        n.forward = std::move(fwd);
        n.backward = std::move(bwd);
        n.value = n.forward(parent_values(n));
        nodes_.push_back(std::move(n));
        return Var(this, nodes_.size() - 1);
    }

    [[nodiscard]] const Matrix& value(Var v) const { return nodes_.at(v.id()).value; }
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    [[nodiscard]] bool needs_grad(Var v) const { return nodes_.at(v.id()).needs_grad; }

    // Recompute every non-leaf node from its recorded rule, in order.
    void replay() {
        for (auto& n : nodes_)
            if (n.forward) n.value = n.forward(parent_values(n));
    }

    // d(output)/d(p) for each p in wrt. Output must be a 1x1 node.
    std::vector<Matrix> grad(Var output, std::span<const Var> wrt) {
        if (output.tape() != this) throw UsageError("grad: output is not recorded on this tape");
        const Matrix& out = nodes_.at(output.id()).value;
        if (out.rows() != 1 || out.cols() != 1)
            throw UsageError("grad: output must be scalar, got " + shape_str(out));

        for (auto& n : nodes_) n.adjoint.resize(0, 0);
        auto& root = nodes_[output.id()];
        root.adjoint = Matrix::Ones(1, 1);

        for (std::size_t i = output.id() + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (!n.needs_grad || n.adjoint.size() == 0 || !n.backward) continue;
            std::vector<Matrix*> padj(n.parents.size(), nullptr);
            for (std::size_t k = 0; k < n.parents.size(); ++k) {
                Node& p = nodes_[n.parents[k]];
                if (!p.needs_grad) continue;
                if (p.adjoint.size() == 0) p.adjoint = Matrix::Zero(p.value.rows(), p.value.cols());
                padj[k] = &p.adjoint;
            }
            n.backward(n.adjoint, n.value, parent_values(n), padj);
        }

        std::vector<Matrix> out_grads;
        out_grads.reserve(wrt.size());
        for (const Var& v : wrt) {
            if (v.tape() != this) throw UsageError("grad: parameter is not recorded on this tape");
            const Node& n = nodes_.at(v.id());
            if (n.adjoint.size() == 0)
                out_grads.push_back(Matrix::Zero(n.value.rows(), n.value.cols()));
            else
                out_grads.push_back(n.adjoint);
        }
        return out_grads;
    }

private:
    struct Node {
        Matrix value;
        Matrix adjoint;
        std::vector<std::size_t> parents;
        ForwardFn forward;
        BackwardFn backward;
        bool needs_grad = false;
    };

    Var push_leaf(Matrix v, bool needs_grad) {
        Node n;
        n.value = std::move(v);
        n.needs_grad = needs_grad;
        nodes_.push_back(std::move(n));
        return Var(this, nodes_.size() - 1);
    }

    Inputs parent_values(const Node& n) const {
        Inputs in;
        in.reserve(n.parents.size());
        for (auto p : n.parents) in.push_back(&nodes_[p].value);
        return in;
    }

    std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const {
    if (!tape_) throw UsageError("use of an unbound tape variable");
    return tape_->value(*this);
}

inline double Var::scalar() const {
    const Matrix& v = value();
    if (v.rows() != 1 || v.cols() != 1) throw UsageError("Var::scalar on " + shape_str(v) + " node");
    return v(0, 0);
}

namespace detail {

inline Tape& same_tape(Var a, Var b) {
    if (!a.valid() || a.tape() != b.tape()) throw UsageError("tape operands recorded on different tapes");
    return *a.tape();
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw UsageError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace detail

// ---- elementwise activations (plain, used by both tape and direct evaluation)

enum class Activation { swish, relu, identity };

inline double swish(double x) { return x * detail::sigmoid(x); }

inline double swish_derivative(double x) {
    const double s = detail::sigmoid(x);
    return s + x * s * (1.0 - s);
}

inline Matrix apply_activation(Activation act, const Matrix& m) {
    switch (act) {
    case Activation::swish: return m.unaryExpr([](double x) { return swish(x); });
    case Activation::relu: return m.cwiseMax(0.0);
    case Activation::identity: return m;
    }
    return m;
}

inline Matrix activation_derivative(Activation act, const Matrix& m) {
    switch (act) {
    case Activation::swish: return m.unaryExpr([](double x) { return swish_derivative(x); });
    case Activation::relu: return m.unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; });
    case Activation::identity: return Matrix::Ones(m.rows(), m.cols());
    }
    return Matrix::Ones(m.rows(), m.cols());
}

// ---- primitives

inline Var add(Var a, Var b) {
    Tape& t = detail::same_tape(a, b);
    detail::require_same_shape(a.value(), b.value(), "add");
    return t.record(
        {a.id(), b.id()}, [](const Inputs& in) -> Matrix { return *in[0] + *in[1]; },
        [](const Matrix& g, const Matrix&, const Inputs&, std::vector<Matrix*>& adj) {
            if (adj[0]) *adj[0] += g;
            if (adj[1]) *adj[1] += g;
        });
}

inline Var sub(Var a, Var b) {
    Tape& t = detail::same_tape(a, b);
    detail::require_same_shape(a.value(), b.value(), "sub");
    return t.record(
        {a.id(), b.id()}, [](const Inputs& in) -> Matrix { return *in[0] - *in[1]; },
        [](const Matrix& g, const Matrix&, const Inputs&, std::vector<Matrix*>& adj) {
            if (adj[0]) *adj[0] += g;
            if (adj[1]) *adj[1] -= g;
        });
}

inline Var matmul(Var a, Var b) {
    Tape& t = detail::same_tape(a, b);
    if (a.cols() != b.rows())
        throw UsageError("matmul: " + shape_str(a.value()) + " * " + shape_str(b.value()));
    return t.record(
        {a.id(), b.id()}, [](const Inputs& in) -> Matrix { return (*in[0]) * (*in[1]); },
        [](const Matrix& g, const Matrix&, const Inputs& in, std::vector<Matrix*>& adj) {
            if (adj[0]) adj[0]->noalias() += g * in[1]->transpose();
            if (adj[1]) adj[1]->noalias() += in[0]->transpose() * g;
        });
}

inline Var transpose(Var a) {
    return a.tape()->record(
        {a.id()}, [](const Inputs& in) -> Matrix { return in[0]->transpose(); },
        [](const Matrix& g, const Matrix&, const Inputs&, std::vector<Matrix*>& adj) {
            if (adj[0]) *adj[0] += g.transpose();
        });
}

inline Var scale(Var a, double s) {
    return a.tape()->record(
        {a.id()}, [s](const Inputs& in) -> Matrix { return s * (*in[0]); },
        [s](const Matrix& g, const Matrix&, const Inputs&, std::vector<Matrix*>& adj) {
            if (adj[0]) *adj[0] += s * g;
        });
}

inline Var hadamard(Var a, Var b) {
    Tape& t = detail::same_tape(a, b);
    detail::require_same_shape(a.value(), b.value(), "hadamard");
    return t.record(
        {a.id(), b.id()}, [](const Inputs& in) -> Matrix { return in[0]->cwiseProduct(*in[1]); },
        [](const Matrix& g, const Matrix&, const Inputs& in, std::vector<Matrix*>& adj) {
            if (adj[0]) *adj[0] += g.cwiseProduct(*in[1]);
            if (adj[1]) *adj[1] += g.cwiseProduct(*in[0]);
        });
}

// a (M x c) + row (1 x c) broadcast over rows.
inline Var add_row(Var a, Var row) {
    Tape& t = detail::same_tape(a, row);
    if (row.rows() != 1 || row.cols() != a.cols())
        throw UsageError("add_row: " + shape_str(a.value()) + " + " + shape_str(row.value()));
    return t.record(
        {a.id(), row.id()},
        [](const Inputs& in) -> Matrix { return in[0]->rowwise() + in[1]->row(0); },
        [](const Matrix& g, const Matrix&, const Inputs&, std::vector<Matrix*>& adj) {
            if (adj[0]) *adj[0] += g;
            if (adj[1]) *adj[1] += g.colwise().sum();
        });
}

inline Var activate(Var a, Activation act) {
    if (act == Activation::identity) return a;
    return a.tape()->record(
        {a.id()}, [act](const Inputs& in) -> Matrix { return apply_activation(act, *in[0]); },
        [act](const Matrix& g, const Matrix&, const Inputs& in, std::vector<Matrix*>& adj) {
            if (adj[0]) *adj[0] += g.cwiseProduct(activation_derivative(act, *in[0]));
        });
}

inline Var cols(Var a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.cols())
        throw UsageError("cols: range out of bounds for " + shape_str(a.value()));
    return a.tape()->record(
        {a.id()}, [start, count](const Inputs& in) -> Matrix { return in[0]->middleCols(start, count); },
        [start, count](const Matrix& g, const Matrix&, const Inputs&, std::vector<Matrix*>& adj) {
            if (adj[0]) adj[0]->middleCols(start, count) += g;
        });
}

inline Var rows(Var a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.rows())
        throw UsageError("rows: range out of bounds for " + shape_str(a.value()));
    return a.tape()->record(
        {a.id()}, [start, count](const Inputs& in) -> Matrix { return in[0]->middleRows(start, count); },
        [start, count](const Matrix& g, const Matrix&, const Inputs&, std::vector<Matrix*>& adj) {
            if (adj[0]) adj[0]->middleRows(start, count) += g;
        });
}

// Horizontal concatenation [a b].
inline Var hcat(Var a, Var b) {
    Tape& t = detail::same_tape(a, b);
    if (a.rows() != b.rows()) throw UsageError("hcat: row mismatch " + shape_str(a.value()) + " | " + shape_str(b.value()));
    const Eigen::Index ca = a.cols();
    return t.record(
        {a.id(), b.id()},
        [](const Inputs& in) -> Matrix {
            Matrix out(in[0]->rows(), in[0]->cols() + in[1]->cols());
            out << *in[0], *in[1];
            return out;
        },
        [ca](const Matrix& g, const Matrix&, const Inputs&, std::vector<Matrix*>& adj) {
            if (adj[0]) *adj[0] += g.leftCols(ca);
            if (adj[1]) *adj[1] += g.rightCols(g.cols() - ca);
        });
}

// a + lambda * I for square a.
inline Var add_diag(Var a, double lambda) {
    if (a.rows() != a.cols()) throw UsageError("add_diag: non-square " + shape_str(a.value()));
    return a.tape()->record(
        {a.id()},
        [lambda](const Inputs& in) -> Matrix {
            Matrix out = *in[0];
            out.diagonal().array() += lambda;
            return out;
        },
        [](const Matrix& g, const Matrix&, const Inputs&, std::vector<Matrix*>& adj) {
            if (adj[0]) *adj[0] += g;
        });
}

// S^{-1} R for symmetric positive (semi)definite S, via LDLT.
inline Var solve_spd(Var s, Var r) {
    Tape& t = detail::same_tape(s, r);
    if (s.rows() != s.cols() || s.rows() != r.rows())
        throw UsageError("solve_spd: " + shape_str(s.value()) + " \\ " + shape_str(r.value()));
    auto factor = std::make_shared<Eigen::LDLT<Matrix>>();
    return t.record(
        {s.id(), r.id()},
        [factor](const Inputs& in) -> Matrix {
            factor->compute(*in[0]);
            if (factor->info() != Eigen::Success)
                throw NumericalError("solve_spd: LDLT factorization failed for " + shape_str(*in[0]));
            Matrix x = factor->solve(*in[1]);
            if (!x.allFinite())
                throw NumericalError("solve_spd: non-finite solution for " + shape_str(*in[0]) + " system");
            return x;
        },
        [factor](const Matrix& g, const Matrix& x, const Inputs&, std::vector<Matrix*>& adj) {
            Matrix rbar = factor->solve(g);
            if (adj[1]) *adj[1] += rbar;
            if (adj[0]) adj[0]->noalias() -= rbar * x.transpose();
        });
}

// Sum of squared entries, as a 1x1 node.
inline Var sum_squares(Var a) {
    return a.tape()->record(
        {a.id()},
        [](const Inputs& in) -> Matrix { return Matrix::Constant(1, 1, in[0]->squaredNorm()); },
        [](const Matrix& g, const Matrix&, const Inputs& in, std::vector<Matrix*>& adj) {
            if (adj[0]) *adj[0] += (2.0 * g(0, 0)) * (*in[0]);
        });
}

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return matmul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

} // namespace koop::ad
