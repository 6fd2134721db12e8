#pragma once

#include <algorithm>
#include <functional>
#include <optional>

#include "koop/numerics/matrix.hpp"

namespace koop {

// Finite-horizon problem over u_0..u_{N_h-1}:
//   sum_{k=1}^{N_h} (xi_k - r(k_now+k) e)' Q (xi_k - r(k_now+k) e)
//   + sum_{k=0}^{N_h-1} u_k' R_u u_k + (u_k - u_{k-1})' R (u_k - u_{k-1})
// with xi_{k+1} = A xi_k + B u_k. Only u_0 is applied.
struct MpcSpec {
    std::size_t horizon = 20;
    Matrix state_weight;     // Q, N_x x N_x
    Vector reference_dir;    // e, N_x
    std::function<double(long)> reference = [](long) { return 0.0; };
    Matrix rate_weight;      // R, p x p
    Matrix input_weight;     // R_u, p x p
    std::optional<Vector> input_lo;
    std::optional<Vector> input_hi;

    // Track component `index` of xi with unit weight and input-rate weight r.
    static MpcSpec tracking(Eigen::Index nx, Eigen::Index p, Eigen::Index index, double r, std::size_t horizon,
                            std::function<double(long)> reference) {
        if (index < 0 || index >= nx) throw UsageError("MpcSpec: tracked component out of range");
        MpcSpec s;
        s.horizon = horizon;
        s.state_weight = Matrix::Zero(nx, nx);
        s.state_weight(index, index) = 1.0;
        s.reference_dir = Vector::Unit(nx, index);
        s.reference = std::move(reference);
        s.rate_weight = r * Matrix::Identity(p, p);
        s.input_weight = Matrix::Zero(p, p);
        return s;
    }

    void validate(Eigen::Index nx, Eigen::Index p) const {
        if (horizon < 1) throw UsageError("MpcSpec: horizon must be >= 1");
        require_shape(state_weight, nx, nx, "MpcSpec state weight");
        if (reference_dir.size() != nx) throw UsageError("MpcSpec: reference direction must have N_x entries");
        require_shape(rate_weight, p, p, "MpcSpec rate weight");
        require_shape(input_weight, p, p, "MpcSpec input weight");
        if (rate_weight.diagonal().minCoeff() < 0.0 || input_weight.diagonal().minCoeff() < 0.0)
            throw UsageError("MpcSpec: input weights must be >= 0");
        if (input_lo.has_value() != input_hi.has_value()) throw UsageError("MpcSpec: input box needs both bounds");
        if (input_lo && (input_lo->size() != p || input_hi->size() != p || (input_lo->array() > input_hi->array()).any()))
            throw UsageError("MpcSpec: invalid input box");
    }
};

struct MpcStep {
    Vector u0;
    bool regularized = false; // Hessian needed the 1e-10 I shift
    std::size_t iterations = 0;
};

// Condensed MPC with the Hessian factorized once per (spec, A, B).
class MpcController {
public:
    MpcController(MpcSpec spec, const Matrix& a, const Matrix& b) : spec_(std::move(spec)), a_(a), b_(b) {
        const auto nx = a.rows();
        const auto p = b.cols();
        if (a.cols() != nx || b.rows() != nx) throw UsageError("MpcController: inconsistent A/B");
        spec_.validate(nx, p);
        const auto nh = static_cast<Eigen::Index>(spec_.horizon);

        // Xi = Phi xi0 + Gamma U, rows blocks k = 1..N_h.
        phi_ = Matrix::Zero(nh * nx, nx);
        gamma_ = Matrix::Zero(nh * nx, nh * p);
        Matrix apow = Matrix::Identity(nx, nx);
        std::vector<Matrix> apb; // A^j B
        for (Eigen::Index k = 0; k < nh; ++k) {
            apb.push_back(apow * b);
            apow = a * apow;
            phi_.middleRows(k * nx, nx) = apow;
        }
        for (Eigen::Index k = 0; k < nh; ++k)
            for (Eigen::Index j = 0; j <= k; ++j)
                gamma_.block(k * nx, j * p, nx, p) = apb[static_cast<std::size_t>(k - j)];

        // Block-diagonal weights and the difference operator D (U -> u_k - u_{k-1}).
        qbar_gamma_ = Matrix::Zero(nh * nx, nh * p);
        for (Eigen::Index k = 0; k < nh; ++k)
            qbar_gamma_.middleRows(k * nx, nx) = spec_.state_weight * gamma_.middleRows(k * nx, nx);
        Matrix d = Matrix::Identity(nh * p, nh * p);
        for (Eigen::Index k = 1; k < nh; ++k) d.block(k * p, (k - 1) * p, p, p) = -Matrix::Identity(p, p);
        Matrix rbar = Matrix::Zero(nh * p, nh * p);
        Matrix rubar = Matrix::Zero(nh * p, nh * p);
        for (Eigen::Index k = 0; k < nh; ++k) {
            rbar.block(k * p, k * p, p, p) = spec_.rate_weight;
            rubar.block(k * p, k * p, p, p) = spec_.input_weight;
        }
        d_t_rbar_ = d.transpose() * rbar;
        hessian_ = gamma_.transpose() * qbar_gamma_ + rubar + d_t_rbar_ * d;
        hessian_ = 0.5 * (hessian_ + hessian_.transpose());

        ldlt_.compute(hessian_);
        if (ldlt_.info() != Eigen::Success || !ldlt_.isPositive() || ldlt_.vectorD().minCoeff() <= 0.0) {
            hessian_.diagonal().array() += 1e-10;
            ldlt_.compute(hessian_);
            regularized_ = true;
            if (ldlt_.info() != Eigen::Success) throw NumericalError("MPC Hessian factorization failed");
        }
    }

    [[nodiscard]] const MpcSpec& spec() const { return spec_; }

    // Linear term of 1/2 U'HU + f'U for the current state.
    [[nodiscard]] Vector linear_term(const Vector& xi, const Vector& u_prev, long k_now) const {
        const auto nx = a_.rows();
        const auto p = b_.cols();
        const auto nh = static_cast<Eigen::Index>(spec_.horizon);
        Vector free = phi_ * xi;
        for (Eigen::Index k = 0; k < nh; ++k)
            free.segment(k * nx, nx) -= spec_.reference(k_now + k + 1) * spec_.reference_dir;
        Vector dvec = Vector::Zero(nh * p);
        dvec.head(p) = u_prev;
        return qbar_gamma_.transpose() * free - d_t_rbar_ * dvec;
    }

    [[nodiscard]] double objective(const Vector& u, const Vector& f) const { return 0.5 * u.dot(hessian_ * u) + f.dot(u); }

    [[nodiscard]] Vector solve_sequence(const Vector& xi, const Vector& u_prev, long k_now, MpcStep* info = nullptr) const {
        if (xi.size() != a_.rows() || u_prev.size() != b_.cols()) throw UsageError("mpc_step: xi/u_prev size mismatch");
        const Vector f = linear_term(xi, u_prev, k_now);
        Vector u = ldlt_.solve(-f);
        std::size_t iters = 0;
        if (spec_.input_lo) u = solve_box(f, u, iters);
        if (info) {
            info->regularized = regularized_;
            info->iterations = iters;
        }
        return u;
    }

    [[nodiscard]] MpcStep step(const Vector& xi, const Vector& u_prev, long k_now) const {
        MpcStep s;
        s.u0 = solve_sequence(xi, u_prev, k_now, &s).head(b_.cols());
        return s;
    }

private:
    [[nodiscard]] Vector clamp(const Vector& u) const {
        const auto p = b_.cols();
        Vector out = u;
        for (Eigen::Index i = 0; i < u.size(); ++i)
            out(i) = std::clamp(u(i), (*spec_.input_lo)(i % p), (*spec_.input_hi)(i % p));
        return out;
    }

    // Projected Newton for the box-constrained QP.
    [[nodiscard]] Vector solve_box(const Vector& f, Vector u, std::size_t& iters) const {
        const auto p = b_.cols();
        u = clamp(u);
        for (iters = 0; iters < 200; ++iters) {
            const Vector g = hessian_ * u + f;
            if ((u - clamp(u - g)).cwiseAbs().maxCoeff() < 1e-8) break;
            std::vector<Eigen::Index> free_idx;
            for (Eigen::Index i = 0; i < u.size(); ++i) {
                const double lo = (*spec_.input_lo)(i % p), hi = (*spec_.input_hi)(i % p);
                const bool at_lo = u(i) <= lo + 1e-12 && g(i) > 0.0;
                const bool at_hi = u(i) >= hi - 1e-12 && g(i) < 0.0;
                if (!at_lo && !at_hi) free_idx.push_back(i);
            }
            Vector dir = Vector::Zero(u.size());
            if (!free_idx.empty()) {
                const Matrix hff = hessian_(free_idx, free_idx);
                const Vector gf = g(free_idx);
                const Vector df = hff.ldlt().solve(-gf);
                for (std::size_t k = 0; k < free_idx.size(); ++k) dir(free_idx[k]) = df(static_cast<Eigen::Index>(k));
            }
            if (dir.squaredNorm() == 0.0) dir = -g;
            const double f0 = objective(u, f);
            double alpha = 1.0;
            Vector cand = clamp(u + dir);
            while (objective(cand, f) > f0 + 1e-4 * g.dot(cand - u) && alpha > 1e-12) {
                alpha *= 0.5;
                cand = clamp(u + alpha * dir);
            }
            if ((cand - u).cwiseAbs().maxCoeff() == 0.0) {
                // Newton direction stalled; fall back to a projected gradient step.
                const double step = 1.0 / std::max(1e-12, hessian_.diagonal().maxCoeff());
                cand = clamp(u - step * g);
            }
            u = cand;
        }
        return u;
    }

    MpcSpec spec_;
    Matrix a_, b_;
    Matrix phi_, gamma_, qbar_gamma_, d_t_rbar_, hessian_;
    Eigen::LDLT<Matrix> ldlt_;
    bool regularized_ = false;
};

// One receding-horizon step from scratch.
inline MpcStep mpc_step(const MpcSpec& spec, const Matrix& a, const Matrix& b, const Vector& xi, const Vector& u_prev,
                        long k_now) {
    return MpcController(spec, a, b).step(xi, u_prev, k_now);
}

// Reference that switches from `before` to `after` once k > k_switch.
inline std::function<double(long)> step_reference(long k_switch, double before = -1.0, double after = 1.0) {
    return [=](long k) { return k <= k_switch ? before : after; };
}

} // namespace koop
