#pragma once

#include "modalkit/dynamics.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace modalkit {

enum class Method {
    GaussLegendre3,   ///< 3-stage Gauss collocation, order 6, symplectic
    ImplicitMidpoint  ///< 1-stage Gauss collocation, order 2, symplectic
};

struct FlowOptions {
    /// Maximal step; the actual step is t_end / ceil(t_end / dt) so that the
    /// final sample lands on t_end exactly.
    double dt = 0.0;
    /// When > 0, use exactly this many equal steps instead of deriving the
    /// count from dt.
    long steps = 0;
    /// Record every `sample_stride`-th step (the final state is always kept).
    int sample_stride = 1;
    /// Abort when |E(t) - E(0)| / max(1, |E(0)|) exceeds this.
    double drift_budget = 1e-6;
    Method method = Method::GaussLegendre3;
    /// Recompute the stage-solve Jacobian every this many steps.
    int jacobian_refresh = 1;
};

/// Time-sampled solution of the canonical equations. `rates` holds the vector
/// field at each sample so that the path can be Hermite-interpolated.
struct Trajectory {
    std::string system;
    double drift_budget = 0.0;
    std::vector<double> times;
    std::vector<State> states;
    std::vector<State> rates;
    std::vector<double> energies;

    std::size_t size() const { return times.size(); }
    const State& front() const { return states.front(); }
    const State& back() const { return states.back(); }
    double duration() const { return times.back() - times.front(); }

    /// max_i |E_i - E_0| / max(1, |E_0|)
    double relative_energy_drift() const;

    /// Cubic Hermite interpolation of the state between samples i and i+1 at
    /// fraction s in [0, 1].
    State interpolate(std::size_t i, double s) const;
};

/// Psi^t(s0) sampled on [0, t_end] with the symplectic collocation method.
/// t_end == 0 yields the single sample s0. Throws NumericalError("drift") when
/// the energy budget is exceeded and NumericalError("step") when the stage
/// solve fails.
Trajectory flow(const MechSystem& sys, const State& s0, double t_end, const FlowOptions& opts);

/// Psi^{-t}(s0) sampled on [-t_end, 0] (increasing times), computed by
/// flowing the time-reversed state (q, -p) forward and mapping back.
Trajectory flow_back(const MechSystem& sys, const State& s0, double t_end, const FlowOptions& opts);

/// Endpoint of the flow only; no samples or per-step energy log. The drift
/// budget is checked at the final state.
State propagate(const MechSystem& sys, const State& s0, double t_end, const FlowOptions& opts);

/// Default step: (2 pi / omega_max) / 100.
double default_time_step(double omega_sq_max);

struct AdaptiveOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double initial_step = 1e-3;
    double min_step = 1e-12;
};

/// Dormand-Prince 5(4) with step control; for cross-checking the default
/// integrator. Samples at accepted steps. Throws NumericalError("step") on
/// step-size underflow.
Trajectory flow_adaptive(const MechSystem& sys, const State& s0, double t_end, const AdaptiveOptions& opts);

/// CSV with header `t,q1..qn,p1..pn,E`, 17 significant digits.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

} // namespace modalkit
