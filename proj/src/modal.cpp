#include "modalkit/modal.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace modalkit {

double ModalReport::omega(std::size_t k) const { return std::sqrt(omega_sq[static_cast<Eigen::Index>(k)]); }

double ModalReport::linear_period(std::size_t k) const { return 2.0 * std::numbers::pi / omega(k); }

ModalReport modal_analysis(const MechSystem& sys, const Vec& q_guess) {
    const auto eq = refine_equilibrium(sys, q_guess);
    if (!eq.converged)
        throw Error("equilibrium", "no equilibrium found near the guess (|dV| = " + std::to_string(eq.grad_norm) + ")");

    ModalReport r;
    r.q_bar = eq.q;
    r.grad_norm = eq.grad_norm;
    const Mat m = eval_inertia(sys, r.q_bar);
    const Mat h = sys.hess_potential(r.q_bar);

    // Cholesky of M followed by a symmetric eigensolve of L^{-1} H L^{-T}.
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(h, m, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
    if (es.info() != Eigen::Success) throw NumericalError("eigen", "generalized eigensolve failed");

    const Eigen::Index n = h.rows();
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](auto a, auto b) { return es.eigenvalues()[a] > es.eigenvalues()[b]; });

    r.omega_sq.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        r.omega_sq[k] = es.eigenvalues()[order[k]];
        Vec d = es.eigenvectors().col(order[k]);
        d.normalize();
        Eigen::Index big = 0;
        d.cwiseAbs().maxCoeff(&big);
        if (d[big] < 0) d = -d;
        r.mode_shapes.push_back(d);
        Vec pos = Vec::Zero(2 * n);
        Vec mom = Vec::Zero(2 * n);
        pos.head(n) = d;
        mom.tail(n) = m * d;
        r.eigenspaces.push_back({pos, mom});
    }
    r.stable = r.omega_sq.minCoeff() > 0.0;
    return resonance_check(std::move(r), 1e-6);
}

ModalReport resonance_check(ModalReport report, double eps_int) {
    const std::size_t n = report.dof();
    report.eps_int = eps_int;
    report.resonance.clear();
    report.non_resonant.assign(n, true);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j == k) continue;
            const double r = report.omega_sq[j] / report.omega_sq[k];
            const double nearest = std::round(r);
            const double dist = std::abs(r - nearest);
            // A few ulps of slack so decimal inputs at the threshold count as on it.
            const double slack = 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(r));
            const bool resonant = nearest >= 1.0 && dist <= eps_int + slack;
            report.resonance.push_back({k, j, r, dist, resonant});
            if (resonant) report.non_resonant[k] = false;
        }
    }
    report.m_unique = static_cast<std::size_t>(std::count(report.non_resonant.begin(), report.non_resonant.end(), true));
    return report;
}

ModalReport resonance_from_values(const Vec& omega_sq, double eps_int) {
    ModalReport r;
    r.omega_sq = omega_sq;
    std::sort(r.omega_sq.begin(), r.omega_sq.end(), std::greater<>());
    r.stable = r.omega_sq.minCoeff() > 0.0;
    return resonance_check(std::move(r), eps_int);
}

ModeSeed eigenspace_seed(const ModalReport& report, std::size_t k, double amplitude) {
    if (k >= report.dof()) throw Error("argument", "mode index out of range");
    if (!(report.omega_sq[static_cast<Eigen::Index>(k)] > 0.0))
        throw Error("equilibrium", "mode " + std::to_string(k + 1) + " is not oscillatory");
    ModeSeed seed;
    seed.state = State::at_rest(report.q_bar + amplitude * report.mode_shapes[k]);
    seed.period = report.linear_period(k);
    if (!report.non_resonant.empty() && !report.non_resonant[k])
        seed.warning = "mode " + std::to_string(k + 1) +
                       " is resonant: the subcenter manifold exists but need not be unique";
    return seed;
}

} // namespace modalkit
