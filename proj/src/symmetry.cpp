#include "modalkit/symmetry.hpp"

#include "curve_util.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace modalkit {

SymmetrySpec SymmetrySpec::time_reversal() { return {SymmetryKind::TimeReversal, {}, Vec(), -1}; }

SymmetrySpec SymmetrySpec::point_reflection(Vec q_bar) {
    return {SymmetryKind::Spatial, {}, std::move(q_bar), +1};
}

SymmetrySpec SymmetrySpec::spatial(ConfigMap phi, Vec q_bar) {
    return {SymmetryKind::Spatial, std::move(phi), std::move(q_bar), +1};
}

Vec SymmetrySpec::apply(const Vec& q) const {
    if (kind == SymmetryKind::TimeReversal) return q;
    if (!phi) return 2.0 * center - q;
    return phi(q);
}

Mat SymmetrySpec::jacobian(const Vec& q) const {
    const Eigen::Index n = q.size();
    if (kind == SymmetryKind::TimeReversal) return Mat::Identity(n, n);
    if (!phi) return -Mat::Identity(n, n);
    Mat j(n, n);
    Vec x = q;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(q[k]));
        x[k] = q[k] + h;
        const Vec fp = phi(x);
        x[k] = q[k] - h;
        const Vec fm = phi(x);
        x[k] = q[k];
        j.col(k) = (fp - fm) / (2.0 * h);
    }
    return j;
}

State SymmetrySpec::lift(const State& s) const {
    if (kind == SymmetryKind::TimeReversal) return {s.q, -s.p};
    if (!phi) return {2.0 * center - s.q, -s.p};
    const Mat j = jacobian(s.q);
    return {phi(s.q), j.transpose().partialPivLu().solve(s.p)};
}

namespace {

std::vector<Vec> box_samples(const Vec& center, double half_width, int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-half_width, half_width);
    std::vector<Vec> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        Vec q = center;
        for (Eigen::Index k = 0; k < q.size(); ++k) q[k] += u(rng);
        out.push_back(std::move(q));
    }
    return out;
}

} // namespace

std::string validate_spatial_spec(const SymmetrySpec& spec, double half_width, int n_samples, std::uint64_t seed) {
    if (spec.kind != SymmetryKind::Spatial) return "not a spatial symmetry";
    std::ostringstream problems;
    if ((spec.apply(spec.center) - spec.center).norm() > 1e-10) problems << "phi does not fix q_bar; ";
    const Eigen::Index n = spec.center.size();
    if ((spec.jacobian(spec.center) + Mat::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-8)
        problems << "Dphi(q_bar) != -I; ";
    for (const Vec& q : box_samples(spec.center, half_width, n_samples, seed)) {
        if ((spec.apply(spec.apply(q)) - q).norm() > 1e-10 * std::max(1.0, q.norm())) {
            problems << "phi is not an involution; ";
            break;
        }
    }
    return problems.str();
}

SymmetryVerdict check_spatial_symmetry(const MechSystem& sys, const SymmetrySpec& spec, double half_width,
                                       int n_samples, std::uint64_t seed) {
    if (spec.kind != SymmetryKind::Spatial)
        throw Error("argument", "check_spatial_symmetry needs a spatial symmetry");
    SymmetryVerdict v;
    v.samples = n_samples;
    const double v_bar = sys.potential(spec.center);
    double v_scale = 0.0;
    double m_scale = 0.0;
    double dv_max = -1.0;
    double dm_max = -1.0;
    for (const Vec& q : box_samples(spec.center, half_width, n_samples, seed)) {
        const Vec pq = spec.apply(q);
        const double vq = sys.potential(q);
        const double vp = sys.potential(pq);
        v_scale = std::max(v_scale, std::abs(vq - v_bar));
        if (vq < v_bar) v.equilibrium_minimal_in_box = false;
        const double dv = std::abs(vq - vp);
        if (dv > dv_max) {
            dv_max = dv;
            v.potential_witness = q;
        }
        const Mat mq = sys.inertia(q);
        const Mat j = spec.jacobian(q);
        const double dm = (mq - j.transpose() * sys.inertia(pq) * j).norm();
        m_scale = std::max(m_scale, mq.norm());
        if (dm > dm_max) {
            dm_max = dm;
            v.inertia_witness = q;
        }
    }
    v.potential_violation = dv_max / std::max(v_scale, 1e-300);
    v.inertia_violation = dm_max / std::max(m_scale, 1e-300);
    constexpr double tol = 1e-9;
    v.symmetric = v.potential_violation < tol && v.inertia_violation < tol;
    if (v.symmetric) v.worst_part = "none";
    else v.worst_part = v.potential_violation >= v.inertia_violation ? "potential" : "inertia";
    return v;
}

ChartMap equivariant_chart(const ChartMap& x, ConfigMap phi) {
    ChartMap y;
    y.map = [x, phi](const Vec& q) -> Vec {
        const Vec pq = phi(q);
        if (x.domain && (!x.domain(q) || !x.domain(pq)))
            throw Error("domain", "equivariant chart: phi(x) leaves the chart domain");
        return 0.5 * (x.map(q) - x.map(pq));
    };
    if (x.domain) {
        y.domain = [x, phi](const Vec& q) { return x.domain(q) && x.domain(phi(q)); };
    }
    return y;
}

TrajectorySymmetry check_trajectory_symmetry(const Trajectory& traj, const SymmetrySpec& spec) {
    TrajectorySymmetry out;
    const std::size_t n = traj.size();
    if (n < 2) return out;

    const double close = (traj.back().packed() - traj.front().packed()).norm();
    if (close > 1e-6) {
        out.closed = false;
        out.warning = "trajectory is not closed (endpoint distance " + std::to_string(close) + ")";
    }

    const Trajectory& orig = traj;
    Trajectory image = traj;
    for (std::size_t i = 0; i < n; ++i) {
        image.states[i] = spec.lift(traj.states[i]);
        const Mat j = spec.jacobian(traj.states[i].q);
        State r = traj.rates[i];
        r.q = j * r.q;
        if (spec.kind == SymmetryKind::TimeReversal) r.p = -r.p;
        else r.p = j.transpose().partialPivLu().solve(r.p);
        image.rates[i] = std::move(r);
    }

    std::vector<Vec> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = orig.states[i].packed();
    double diam = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = i + 1; k < n; ++k) diam = std::max(diam, (pts[i] - pts[k]).norm());
    if (diam == 0.0) return out;

    auto directed = [n](const Trajectory& from, const Trajectory& onto) {
        double worst = 0.0;
        std::vector<Vec> targets(n);
        for (std::size_t i = 0; i < n; ++i) targets[i] = onto.states[i].packed();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec x = from.states[i].packed();
            auto cost = [&x](const State& s) { return (s.packed() - x).squaredNorm(); };
            const auto m = detail::minimize_along(onto, 0, n - 1, cost);
            worst = std::max(worst, std::sqrt(std::max(0.0, m.value)));
        }
        return worst;
    };
    out.residual = std::max(directed(image, orig), directed(orig, image)) / diam;
    return out;
}

} // namespace modalkit
