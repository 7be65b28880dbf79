#pragma once

#include "modalkit/system.hpp"

namespace modalkit {

/// Phase point z = (q, p) in a canonical chart.
struct State {
    Vec q;
    Vec p;

    State() = default;
    State(Vec q_, Vec p_) : q(std::move(q_)), p(std::move(p_)) {}

    static State at_rest(Vec q) {
        Vec p = Vec::Zero(q.size());
        return {std::move(q), std::move(p)};
    }
    Eigen::Index dof() const { return q.size(); }

    /// Packed 2n vector (q, p).
    Vec packed() const;
    static State unpack(const Vec& z);
};

double hamiltonian(const MechSystem& sys, const State& s);

/// Canonical vector field: q' = M^{-1} p, p' = 1/2 v^T dM/dq_i v - dV/dq_i
/// with v = M^{-1} p.
State vector_field(const MechSystem& sys, const State& s);

/// Packed-vector form of vector_field for integrators.
Vec vector_field_packed(const MechSystem& sys, const Vec& z);

struct EquilibriumResult {
    Vec q;
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Damped Newton on dV/dq = 0 (max 50 iterations, gradient tolerance 1e-12).
/// `converged` is set once the gradient norm drops below 1e-8.
EquilibriumResult refine_equilibrium(const MechSystem& sys, const Vec& q_guess);

/// A = [[0, M^{-1}], [-Hess V, 0]] at an equilibrium. Throws
/// Error("equilibrium") when |dV(q_bar)| >= 1e-8.
Mat linearize(const MechSystem& sys, const Vec& q_bar);

} // namespace modalkit
