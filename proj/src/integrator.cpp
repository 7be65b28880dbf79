#include "modalkit/integrator.hpp"

#include <Eigen/LU>

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

namespace modalkit {

double Trajectory::relative_energy_drift() const {
    double worst = 0.0;
    if (energies.empty()) return worst;
    const double scale = std::max(1.0, std::abs(energies.front()));
    for (double e : energies) worst = std::max(worst, std::abs(e - energies.front()) / scale);
    return worst;
}

State Trajectory::interpolate(std::size_t i, double s) const {
    if (i + 1 >= size()) return states.back();
    const double h = times[i + 1] - times[i];
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    const State& a = states[i];
    const State& b = states[i + 1];
    const State& fa = rates[i];
    const State& fb = rates[i + 1];
    return {h00 * a.q + h10 * h * fa.q + h01 * b.q + h11 * h * fb.q,
            h00 * a.p + h10 * h * fa.p + h01 * b.p + h11 * h * fb.p};
}

namespace {

struct Tableau {
    int stages;
    Mat a;
    Vec c;
    Vec d;  // z_{n+1} = z_n + sum_i d_i Z_i, d = b^T A^{-1}
};

Tableau make_tableau(Method m) {
    Tableau t;
    Vec b;
    if (m == Method::ImplicitMidpoint) {
        t.stages = 1;
        t.a = Mat::Constant(1, 1, 0.5);
        t.c = Vec::Constant(1, 0.5);
        b = Vec::Constant(1, 1.0);
    } else {
        const double r = std::sqrt(15.0);
        t.stages = 3;
        t.a.resize(3, 3);
        t.a << 5.0 / 36, 2.0 / 9 - r / 15, 5.0 / 36 - r / 30,
               5.0 / 36 + r / 24, 2.0 / 9, 5.0 / 36 - r / 24,
               5.0 / 36 + r / 30, 2.0 / 9 + r / 15, 5.0 / 36;
        t.c.resize(3);
        t.c << 0.5 - r / 10, 0.5, 0.5 + r / 10;
        b.resize(3);
        b << 5.0 / 18, 4.0 / 9, 5.0 / 18;
    }
    t.d = t.a.transpose().partialPivLu().solve(b);
    return t;
}

const Tableau& tableau(Method m) {
    static const Tableau gl3 = make_tableau(Method::GaussLegendre3);
    static const Tableau mid = make_tableau(Method::ImplicitMidpoint);
    return m == Method::ImplicitMidpoint ? mid : gl3;
}

Mat field_jacobian(const MechSystem& sys, const Vec& z, const Vec& f0) {
    const Eigen::Index m = z.size();
    Mat j(m, m);
    Vec x = z;
    for (Eigen::Index k = 0; k < m; ++k) {
        const double h = 1e-7 * std::max(1.0, std::abs(z[k]));
        x[k] = z[k] + h;
        j.col(k) = (vector_field_packed(sys, x) - f0) / h;
        x[k] = z[k];
    }
    return j;
}

/// Fixed-step collocation stepper with simplified Newton stage solves.
class CollocationStepper {
public:
    CollocationStepper(const MechSystem& sys, const FlowOptions& opts)
        : sys_(sys), tab_(tableau(opts.method)), refresh_(std::max(1, opts.jacobian_refresh)) {}

    Vec step(const Vec& z, double h) {
        const int s = tab_.stages;
        const Eigen::Index m = z.size();
        const Vec f0 = vector_field_packed(sys_, z);
        if (steps_ % refresh_ == 0 || h != h_) {
            const Mat j = field_jacobian(sys_, z, f0);
            Mat big = Mat::Identity(s * m, s * m);
            for (int i = 0; i < s; ++i)
                for (int k = 0; k < s; ++k) big.block(i * m, k * m, m, m) -= h * tab_.a(i, k) * j;
            lu_.compute(big);
            h_ = h;
        }
        ++steps_;

        Vec zs(s * m);
        for (int i = 0; i < s; ++i) zs.segment(i * m, m) = tab_.c[i] * h * f0;

        const double scale = std::max(1.0, z.cwiseAbs().maxCoeff());
        Vec f(s * m);
        Vec g(s * m);
        double prev = std::numeric_limits<double>::infinity();
        for (int it = 0; it < 30; ++it) {
            for (int i = 0; i < s; ++i) f.segment(i * m, m) = vector_field_packed(sys_, z + zs.segment(i * m, m));
            for (int i = 0; i < s; ++i) {
                Vec acc = zs.segment(i * m, m);
                for (int k = 0; k < s; ++k) acc -= h * tab_.a(i, k) * f.segment(k * m, m);
                g.segment(i * m, m) = acc;
            }
            const Vec delta = lu_.solve(-g);
            if (!delta.allFinite()) break;
            zs += delta;
            const double dn = delta.cwiseAbs().maxCoeff();
            if (dn <= 1e-14 * scale || (dn <= 1e-11 * scale && dn >= prev)) {
                Vec out = z;
                for (int i = 0; i < s; ++i) out += tab_.d[i] * zs.segment(i * m, m);
                return out;
            }
            prev = dn;
        }
        throw NumericalError("step", "collocation stage solve did not converge (h = " + std::to_string(h) + ")");
    }

private:
    const MechSystem& sys_;
    const Tableau& tab_;
    int refresh_;
    long steps_ = 0;
    double h_ = 0.0;
    Eigen::PartialPivLU<Mat> lu_;
};

void check_flow_args(const MechSystem& sys, const State& s0, double t_end, const FlowOptions& opts) {
    if (s0.q.size() != sys.dof() || s0.p.size() != sys.dof())
        throw Error("dimension", "initial state dimension does not match the system");
    if (!s0.q.allFinite() || !s0.p.allFinite()) throw NumericalError("nonfinite", "non-finite initial state");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw Error("argument", "flow: t_end must be >= 0");
    if (!(opts.dt > 0.0) && opts.steps <= 0) throw Error("argument", "flow: dt must be positive");
}

long step_count(double t_end, const FlowOptions& opts) {
    if (opts.steps > 0) return opts.steps;
    return std::max(1L, static_cast<long>(std::ceil(t_end / opts.dt - 1e-9)));
}

[[noreturn]] void drift_abort(double t, double drift, double budget) {
    std::ostringstream os;
    os.precision(6);
    os << "energy drift " << drift << " exceeds budget " << budget << " at t = " << t;
    throw NumericalError("drift", os.str());
}

} // namespace

double default_time_step(double omega_sq_max) {
    return 2.0 * std::numbers::pi / std::sqrt(omega_sq_max) / 100.0;
}

Trajectory flow(const MechSystem& sys, const State& s0, double t_end, const FlowOptions& opts) {
    check_flow_args(sys, s0, t_end, opts);
    Trajectory traj;
    traj.system = sys.name();
    traj.drift_budget = opts.drift_budget;

    const double e0 = hamiltonian(sys, s0);
    const double escale = std::max(1.0, std::abs(e0));
    auto record = [&](double t, const Vec& z, double e) {
        State s = State::unpack(z);
        traj.times.push_back(t);
        traj.rates.push_back(vector_field(sys, s));
        traj.states.push_back(std::move(s));
        traj.energies.push_back(e);
    };

    Vec z = s0.packed();
    record(0.0, z, e0);
    if (t_end == 0.0) return traj;

    const long steps = step_count(t_end, opts);
    const double h = t_end / static_cast<double>(steps);
    const int stride = std::max(1, opts.sample_stride);
    CollocationStepper stepper(sys, opts);
    for (long k = 1; k <= steps; ++k) {
        z = stepper.step(z, h);
        const double t = k == steps ? t_end : static_cast<double>(k) * h;
        const double e = hamiltonian(sys, State::unpack(z));
        const double drift = std::abs(e - e0) / escale;
        if (!(drift <= opts.drift_budget)) drift_abort(t, drift, opts.drift_budget);
        if (k % stride == 0 || k == steps) record(t, z, e);
    }
    return traj;
}

State propagate(const MechSystem& sys, const State& s0, double t_end, const FlowOptions& opts) {
    check_flow_args(sys, s0, t_end, opts);
    if (t_end == 0.0) return s0;
    const long steps = step_count(t_end, opts);
    const double h = t_end / static_cast<double>(steps);
    CollocationStepper stepper(sys, opts);
    Vec z = s0.packed();
    for (long k = 1; k <= steps; ++k) z = stepper.step(z, h);
    State out = State::unpack(z);
    const double e0 = hamiltonian(sys, s0);
    const double drift = std::abs(hamiltonian(sys, out) - e0) / std::max(1.0, std::abs(e0));
    if (!(drift <= opts.drift_budget)) drift_abort(t_end, drift, opts.drift_budget);
    return out;
}

Trajectory flow_back(const MechSystem& sys, const State& s0, double t_end, const FlowOptions& opts) {
    Trajectory fwd = flow(sys, State(s0.q, -s0.p), t_end, opts);
    Trajectory back;
    back.system = fwd.system;
    back.drift_budget = fwd.drift_budget;
    const std::size_t n = fwd.size();
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = n - 1 - k;
        back.times.push_back(-fwd.times[i]);
        back.states.emplace_back(fwd.states[i].q, -fwd.states[i].p);
        back.rates.emplace_back(-fwd.rates[i].q, fwd.rates[i].p);
        back.energies.push_back(fwd.energies[i]);
    }
    return back;
}

Trajectory flow_adaptive(const MechSystem& sys, const State& s0, double t_end, const AdaptiveOptions& opts) {
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    if (!(t_end >= 0.0)) throw Error("argument", "flow_adaptive: t_end must be >= 0");
    Trajectory traj;
    traj.system = sys.name();
    traj.drift_budget = std::numeric_limits<double>::infinity();
    auto f = [&](const Vec& z) { return vector_field_packed(sys, z); };
    auto record = [&](double t, const Vec& z) {
        State s = State::unpack(z);
        traj.times.push_back(t);
        traj.rates.push_back(vector_field(sys, s));
        traj.energies.push_back(hamiltonian(sys, s));
        traj.states.push_back(std::move(s));
    };

    Vec z = s0.packed();
    record(0.0, z);
    double t = 0.0;
    double h = std::min(opts.initial_step, t_end);
    Vec k1 = f(z);
    while (t < t_end) {
        if (t + h > t_end) h = t_end - t;
        if (h < opts.min_step) throw NumericalError("step", "adaptive step size underflow");
        const Vec k2 = f(z + h * a21 * k1);
        const Vec k3 = f(z + h * (a31 * k1 + a32 * k2));
        const Vec k4 = f(z + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const Vec k5 = f(z + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const Vec k6 = f(z + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const Vec zn = z + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const Vec k7 = f(zn);
        const Vec err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double en = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double sc = opts.atol + opts.rtol * std::max(std::abs(z[i]), std::abs(zn[i]));
            en = std::max(en, std::abs(err[i]) / sc);
        }
        if (en <= 1.0) {
            t += h;
            if (t_end - t < 1e-14 * t_end) t = t_end;
            z = zn;
            k1 = k7;
            record(t, z);
        }
        const double factor = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
        h *= factor;
    }
    return traj;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    const Eigen::Index n = traj.states.empty() ? 0 : traj.states.front().dof();
    out << "t";
    for (Eigen::Index i = 1; i <= n; ++i) out << ",q" << i;
    for (Eigen::Index i = 1; i <= n; ++i) out << ",p" << i;
    out << ",E\n";
    out << std::setprecision(17);
    for (std::size_t k = 0; k < traj.size(); ++k) {
        out << traj.times[k];
        for (Eigen::Index i = 0; i < n; ++i) out << ',' << traj.states[k].q[i];
        for (Eigen::Index i = 0; i < n; ++i) out << ',' << traj.states[k].p[i];
        out << ',' << traj.energies[k] << '\n';
    }
}

} // namespace modalkit
