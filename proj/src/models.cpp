#include "modalkit/models.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

namespace modalkit::models {

Potential potential_from_name(std::string_view s) {
    if (s == "s1") return Potential::S1;
    if (s == "s2") return Potential::S2;
    if (s == "a") return Potential::A;
    throw ParseError("unknown potential '" + std::string(s) + "' (expected s1, s2 or a)");
}

std::string_view potential_name(Potential p) {
    switch (p) {
    case Potential::S1: return "s1";
    case Potential::S2: return "s2";
    case Potential::A: return "a";
    }
    return "?";
}

void ModelParams::validate() const {
    if (!(mass > 0 && inertia > 0 && length > 0 && stiffness > 0 && std::isfinite(gravity) && links > 0))
        throw Error("system", "model parameters must be positive (gravity finite)");
}

ModelParams quintuple_defaults() {
    ModelParams p;
    p.mass = 0.4;
    p.length = 1.0;
    p.stiffness = 20.0;
    p.gravity = 9.81;
    p.links = 5;
    return p;
}

namespace {

// The 2-DoF potentials share their gravity term and differ in spring offsets.
struct PlanarPotential {
    double k, dmg;
    double spring1;       // weight of 1/2 k q1^2
    double q2_offset;     // spring rest angle of q2
    double gravity_on;    // 1 for s1/a, 0 for s2

    double value(const Vec& q) const {
        const double s = q[1] - q2_offset;
        return 0.5 * k * spring1 * q[0] * q[0] + 0.5 * k * s * s -
               gravity_on * dmg * (2.0 * std::cos(q[0]) + std::cos(q[0] + q[1]));
    }
    Vec grad(const Vec& q) const {
        const double sn = std::sin(q[0] + q[1]);
        Vec g(2);
        g[0] = k * spring1 * q[0] + gravity_on * dmg * (2.0 * std::sin(q[0]) + sn);
        g[1] = k * (q[1] - q2_offset) + gravity_on * dmg * sn;
        return g;
    }
    Mat hess(const Vec& q) const {
        const double cs = std::cos(q[0] + q[1]);
        Mat h(2, 2);
        h(0, 0) = k * spring1 + gravity_on * dmg * (2.0 * std::cos(q[0]) + cs);
        h(0, 1) = h(1, 0) = gravity_on * dmg * cs;
        h(1, 1) = k + gravity_on * dmg * cs;
        return h;
    }
};

PlanarPotential planar_potential(const ModelParams& p, Potential v) {
    const double dmg = p.length * p.mass * p.gravity;
    switch (v) {
    case Potential::S1: return {p.stiffness, dmg, 0.0, 0.0, 1.0};
    case Potential::S2: return {p.stiffness, dmg, 1.0, std::numbers::pi / 2, 0.0};
    case Potential::A: return {p.stiffness, dmg, 0.0, std::numbers::pi / 2, 1.0};
    }
    return {};
}

void attach_potential(MechSystem::Definition& def, const PlanarPotential& pot) {
    def.potential = [pot](const Vec& q) { return pot.value(q); };
    def.grad_potential = [pot](const Vec& q) { return pot.grad(q); };
    def.hess_potential = [pot](const Vec& q) { return pot.hess(q); };
}

std::map<std::string, double> param_map(const ModelParams& p) {
    return {{"m", p.mass}, {"I", p.inertia}, {"d", p.length}, {"k", p.stiffness}, {"g", p.gravity}};
}

} // namespace

MechSystem build_coupled_masses(const ModelParams& p, Potential v) {
    p.validate();
    MechSystem::Definition def;
    def.name = "coupled_masses_" + std::string(potential_name(v));
    def.dof = 2;
    def.params = param_map(p);
    const double m = p.mass;
    def.inertia = [m](const Vec&) { return Mat(m * Mat::Identity(2, 2)); };
    def.constant_inertia = true;
    attach_potential(def, planar_potential(p, v));
    return MechSystem(std::move(def));
}

MechSystem build_double_pendulum(const ModelParams& p, Potential v) {
    p.validate();
    MechSystem::Definition def;
    def.name = "double_pendulum_" + std::string(potential_name(v));
    def.dof = 2;
    def.params = param_map(p);
    const double I = p.inertia;
    const double dm = p.length * p.length * p.mass;
    def.inertia = [I, dm](const Vec& q) {
        const double c = std::cos(q[1]);
        Mat m(2, 2);
        m(0, 0) = I + dm * (3.0 + 2.0 * c);
        m(0, 1) = m(1, 0) = dm * (1.0 + c);
        m(1, 1) = I + dm;
        return m;
    };
    def.inertia_partials = [dm](const Vec& q) {
        const double s = std::sin(q[1]);
        Mat d2(2, 2);
        d2(0, 0) = -2.0 * dm * s;
        d2(0, 1) = d2(1, 0) = -dm * s;
        d2(1, 1) = 0.0;
        return std::vector<Mat>{Mat::Zero(2, 2), d2};
    };
    attach_potential(def, planar_potential(p, v));
    return MechSystem(std::move(def));
}

MechSystem build_quintuple_pendulum(const ModelParams& p) {
    p.validate();
    const int n = p.links;
    const double ml2 = p.mass * p.length * p.length;
    const double mgl = p.mass * p.gravity * p.length;
    const double K = p.stiffness;

    // theta = L q with L lower-triangular ones; count(i) masses sit at or
    // beyond link i.
    auto absolute = [n](const Vec& q) {
        Vec th(n);
        double acc = 0.0;
        for (int i = 0; i < n; ++i) th[i] = (acc += q[i]);
        return th;
    };
    auto count = [n](int i) { return static_cast<double>(n - i); };
    // Lᵀ A L for A in absolute-angle coordinates: (LᵀAL)_{kl} = sum_{i>=k, j>=l} A_ij.
    auto to_relative = [n](const Mat& a) {
        Mat s = a;
        for (int i = n - 2; i >= 0; --i) s.row(i) += s.row(i + 1);
        for (int j = n - 2; j >= 0; --j) s.col(j) += s.col(j + 1);
        return s;
    };

    MechSystem::Definition def;
    def.name = "quintuple_pendulum";
    def.dof = n;
    def.params = {{"m", p.mass}, {"l", p.length}, {"K", K}, {"g", p.gravity}};
    def.inertia = [=](const Vec& q) {
        const Vec th = absolute(q);
        Mat a(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) a(i, j) = ml2 * count(std::max(i, j)) * std::cos(th[i] - th[j]);
        return to_relative(a);
    };
    def.inertia_partials = [=](const Vec& q) {
        const Vec th = absolute(q);
        std::vector<Mat> out;
        out.reserve(n);
        for (int k = 0; k < n; ++k) {
            Mat a = Mat::Zero(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    const double dij = (k <= i ? 1.0 : 0.0) - (k <= j ? 1.0 : 0.0);
                    if (dij != 0.0)
                        a(i, j) = -ml2 * count(std::max(i, j)) * std::sin(th[i] - th[j]) * dij;
                }
            out.push_back(to_relative(a));
        }
        return out;
    };
    def.potential = [=](const Vec& q) {
        const Vec th = absolute(q);
        double v = 0.5 * K * q.squaredNorm();
        for (int i = 0; i < n; ++i) v += mgl * count(i) * (1.0 - std::cos(th[i]));
        return v;
    };
    def.grad_potential = [=](const Vec& q) {
        const Vec th = absolute(q);
        Vec g = K * q;
        double tail = 0.0;
        for (int i = n - 1; i >= 0; --i) {
            tail += mgl * count(i) * std::sin(th[i]);
            g[i] += tail;
        }
        return g;
    };
    def.hess_potential = [=](const Vec& q) {
        const Vec th = absolute(q);
        Mat h = K * Mat::Identity(n, n);
        Vec tail(n);
        double acc = 0.0;
        for (int i = n - 1; i >= 0; --i) tail[i] = (acc += mgl * count(i) * std::cos(th[i]));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) h(i, j) += tail[std::max(i, j)];
        return h;
    };

    MechSystem sys(std::move(def));
    Eigen::SelfAdjointEigenSolver<Mat> es(sys.hess_potential(Vec::Zero(n)), Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0.0))
        throw Error("system", "quintuple pendulum: Hess V(0) is not positive definite");
    return sys;
}

MechSystem build_builtin(std::string_view id, const ModelParams& p, Potential v) {
    if (id == "double_pendulum") return build_double_pendulum(p, v);
    if (id == "coupled_masses") return build_coupled_masses(p, v);
    if (id == "quintuple_pendulum") return build_quintuple_pendulum(p);
    throw ParseError("unknown builtin '" + std::string(id) + "'");
}

MechSystem build_linear(const Vec& omega_sq) {
    const int n = static_cast<int>(omega_sq.size());
    MechSystem::Definition def;
    def.name = "linear";
    def.dof = n;
    def.inertia = [n](const Vec&) { return Mat(Mat::Identity(n, n)); };
    def.constant_inertia = true;
    def.potential = [omega_sq](const Vec& q) { return 0.5 * q.dot(omega_sq.cwiseProduct(q)); };
    def.grad_potential = [omega_sq](const Vec& q) { return Vec(omega_sq.cwiseProduct(q)); };
    def.hess_potential = [omega_sq](const Vec&) { return Mat(omega_sq.asDiagonal()); };
    return MechSystem(std::move(def));
}

} // namespace modalkit::models
