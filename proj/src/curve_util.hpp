#pragma once

// Internal helpers for minimizing functionals along sampled trajectories.

#include "modalkit/integrator.hpp"

#include <cmath>
#include <functional>

namespace modalkit::detail {

/// Golden-section minimization of f on [0, 1]; returns the argmin.
inline double golden_min(const std::function<double(double)>& f, int iters = 60) {
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = 0.0, b = 1.0;
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < iters; ++i) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    const double x = 0.5 * (a + b);
    const double fx = f(x);
    if (f(0.0) < fx && f(0.0) <= f(1.0)) return 0.0;
    if (f(1.0) < fx) return 1.0;
    return x;
}

struct CurveMin {
    double value = 0.0;
    double time = 0.0;
    State state;
};

/// Minimum of `cost(state)` along the Hermite-interpolated trajectory over
/// sample indices [first, last]. The sampled minimum is refined on its two
/// neighbouring segments.
inline CurveMin minimize_along(const Trajectory& traj, std::size_t first, std::size_t last,
                               const std::function<double(const State&)>& cost) {
    std::size_t best = first;
    double best_v = cost(traj.states[first]);
    for (std::size_t i = first + 1; i <= last; ++i) {
        const double v = cost(traj.states[i]);
        if (v < best_v) {
            best_v = v;
            best = i;
        }
    }
    CurveMin out{best_v, traj.times[best], traj.states[best]};
    for (std::size_t seg : {best == first ? best : best - 1, best}) {
        if (seg < first || seg >= last) continue;
        auto f = [&](double s) { return cost(traj.interpolate(seg, s)); };
        const double s = golden_min(f);
        const double v = f(s);
        if (v < out.value) {
            out.value = v;
            out.time = traj.times[seg] + s * (traj.times[seg + 1] - traj.times[seg]);
            out.state = traj.interpolate(seg, s);
        }
    }
    return out;
}

} // namespace modalkit::detail
