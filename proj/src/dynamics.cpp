#include "modalkit/dynamics.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace modalkit {

Vec State::packed() const {
    Vec z(2 * q.size());
    z << q, p;
    return z;
}

State State::unpack(const Vec& z) {
    const Eigen::Index n = z.size() / 2;
    return {z.head(n), z.tail(n)};
}

namespace {

Eigen::LLT<Mat> factor_inertia(const MechSystem& sys, const Vec& q) {
    Eigen::LLT<Mat> llt(sys.inertia(q));
    if (llt.info() != Eigen::Success)
        throw NumericalError("inertia", "Cholesky factorization of the inertia tensor failed");
    return llt;
}

void check_dims(const MechSystem& sys, const State& s) {
    if (s.q.size() != sys.dof() || s.p.size() != sys.dof())
        throw Error("dimension", "state dimension does not match the system");
}

} // namespace

double hamiltonian(const MechSystem& sys, const State& s) {
    check_dims(sys, s);
    const auto llt = factor_inertia(sys, s.q);
    return 0.5 * s.p.dot(llt.solve(s.p)) + sys.potential(s.q);
}

State vector_field(const MechSystem& sys, const State& s) {
    check_dims(sys, s);
    const auto llt = factor_inertia(sys, s.q);
    Vec v = llt.solve(s.p);
    Vec pdot = -sys.grad_potential(s.q);
    if (!sys.constant_inertia()) {
        const auto dm = sys.inertia_partials(s.q);
        for (Eigen::Index i = 0; i < pdot.size(); ++i) pdot[i] += 0.5 * v.dot(dm[i] * v);
    }
    return {std::move(v), std::move(pdot)};
}

Vec vector_field_packed(const MechSystem& sys, const Vec& z) {
    return vector_field(sys, State::unpack(z)).packed();
}

EquilibriumResult refine_equilibrium(const MechSystem& sys, const Vec& q_guess) {
    EquilibriumResult res;
    res.q = q_guess;
    Vec g = sys.grad_potential(res.q);
    res.grad_norm = g.norm();
    for (; res.iterations < 50 && res.grad_norm > 1e-12; ++res.iterations) {
        Mat h = sys.hess_potential(res.q);
        Vec step = h.ldlt().solve(-g);
        if (!step.allFinite()) break;
        double t = 1.0;
        bool improved = false;
        for (int halving = 0; halving < 30; ++halving, t *= 0.5) {
            Vec trial = res.q + t * step;
            Vec gt = sys.grad_potential(trial);
            if (gt.allFinite() && gt.norm() < res.grad_norm) {
                res.q = trial;
                g = gt;
                res.grad_norm = gt.norm();
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }
    res.converged = res.grad_norm < 1e-8;
    return res;
}

Mat linearize(const MechSystem& sys, const Vec& q_bar) {
    const double gn = sys.grad_potential(q_bar).norm();
    if (!(gn < 1e-8))
        throw Error("equilibrium", "linearize: configuration is not an equilibrium (|dV| = " +
                                       std::to_string(gn) + ")");
    const Eigen::Index n = q_bar.size();
    const auto llt = factor_inertia(sys, q_bar);
    Mat a = Mat::Zero(2 * n, 2 * n);
    a.topRightCorner(n, n) = llt.solve(Mat::Identity(n, n));
    a.bottomLeftCorner(n, n) = -sys.hess_potential(q_bar);
    return a;
}

} // namespace modalkit
