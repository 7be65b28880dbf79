#pragma once

#include "modalkit/integrator.hpp"
#include "modalkit/modal.hpp"
#include "modalkit/symmetry.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace modalkit {

/// Flags of Definitions "weak eigenmode", "eigenmode" and "Rosenberg mode",
/// plus the diagnostics they are computed from. Energies are measured
/// relative to V(q_bar).
struct OrbitClassification {
    bool degenerate = false;          ///< brake points merged: the equilibrium itself
    bool is_weak_eigenmode = false;
    bool is_eigenmode = false;
    bool eigenmode_is_heuristic = false;  ///< dim Q >= 3: sampled check only
    bool is_rosenberg = false;
    double min_potential_along = 0.0;     ///< min_t V(q(t)) - V(q_bar)
    double min_config_dist_to_eq = 0.0;   ///< min_t |q(t) - q_bar|
    double passage_time = 0.0;            ///< argmin over [0, T/2] of |q(t) - q_bar|
    double brake_distance = 0.0;          ///< |q(0) - q(T/2)|
    double path_diameter = 0.0;           ///< configuration diameter over [0, T/2]
    double self_intersection_gap = 0.0;   ///< min distance of non-adjacent arc pieces
    double delta_int = 0.0;
    double delta_eq = 0.0;
    int momentum_zero_events = 0;         ///< per period
    std::optional<bool> symmetry_predicts_rosenberg;
};

/// Converged periodic brake orbit. `samples` covers one full period [0, T]
/// with the half period landing on a sample.
struct BrakeOrbit {
    Vec q0;
    double half_period = 0.0;
    double energy = 0.0;          ///< H(q0, 0) - V(q_bar)
    Trajectory samples;
    std::size_t half_index = 0;   ///< samples.times[half_index] == half_period
    Vec brake2;
    OrbitClassification classification;
    double residual = 0.0;        ///< |p(T/2)|
    double momentum_scale = 0.0;  ///< max_t |p(t)|
    int newton_iterations = 0;

    double period() const { return 2.0 * half_period; }
};

struct EnergyLevel {
    double energy;  ///< target H(q0, 0) - V(q_bar)
};

/// t . (x - x_prev) = ds on x = (q0, half_period).
struct PseudoArclength {
    Vec x_prev;
    Vec tangent;
    double ds;
};

using ShootConstraint = std::variant<EnergyLevel, PseudoArclength>;

struct ShootOptions {
    FlowOptions flow;              ///< dt must be set
    int max_iterations = 30;
    int max_halvings = 8;
    double fd_step = 1e-6;         ///< relative forward-difference step
    double momentum_tol = 1e-10;   ///< |p(T/2)| relative to the momentum scale
    double constraint_tol = 1e-12; ///< relative to max(1, E)
};

/// Damped Newton on (q0, T/2) with residual [p(T/2; q0, p0 = 0); constraint].
/// Throws NumericalError("newton") on divergence or stagnation and
/// NumericalError("period") when T collapses below 10 dt.
BrakeOrbit shoot_brake_orbit(const MechSystem& sys, const ModalReport& report, const Vec& q0_guess,
                             double period_guess, const ShootConstraint& constraint, const ShootOptions& opts);

/// Fills the classification of a converged orbit.
OrbitClassification classify_orbit(const MechSystem& sys, const BrakeOrbit& orbit, const ModalReport& report,
                                   const std::optional<SymmetryVerdict>& sym = std::nullopt);

/// Time of closest approach to q_bar on the first half period, or nullopt
/// when the orbit is not a Rosenberg mode.
std::optional<double> equilibrium_passage_time(const BrakeOrbit& orbit);

struct ContinuationOptions {
    ShootOptions shoot;
    double seed_amplitude = 1e-2;  ///< eps of the eigenspace seed
    double initial_step = 0.0;     ///< 0: E_max / 20
    double max_step = 0.0;         ///< 0: E_max / 20
    double growth = 1.3;
    int easy_iterations = 3;
    double min_step_fraction = 1e-6;
    std::size_t max_orbits = 2000;
    /// Stall once T exceeds this multiple of the linear period of the mode
    /// (approach to a separatrix).
    double max_period_factor = 50.0;
    std::optional<SymmetryVerdict> symmetry;
};

struct ContinuationStep {
    double energy;
    double step;
    int newton_iterations;
    bool accepted;
    std::string note;
};

/// One branch of brake points of an Eigenmanifold, ordered by energy.
struct Generator {
    std::size_t mode_index = 0;
    int side = +1;
    std::vector<BrakeOrbit> orbits;
    std::vector<ContinuationStep> log;
    std::vector<std::string> downgrades;
    bool stalled = false;
    std::string message;

    /// Orbit indices where min_potential_along has an isolated near-zero
    /// (below `tol`) in the sequence; candidates for isolated Rosenberg modes.
    std::vector<std::size_t> isolated_rosenberg_candidates(double tol = 1e-3) const;
};

/// Continue mode k from the seeds q_bar +/- eps d_k up to E_max (energy above
/// V(q_bar)). Returns {side +1, side -1}. A stalled branch keeps the orbits
/// found so far and sets `stalled`.
std::pair<Generator, Generator> continue_generator(const MechSystem& sys, const ModalReport& report,
                                                   std::size_t k, double e_max, const ContinuationOptions& opts);

Generator continue_branch(const MechSystem& sys, const ModalReport& report, std::size_t k, int side, double e_max,
                          const ContinuationOptions& opts);

/// Runs continue_generator for each requested mode on up to `threads`
/// workers (0: hardware concurrency).
std::vector<std::pair<Generator, Generator>> continue_modes(const MechSystem& sys, const ModalReport& report,
                                                            const std::vector<std::size_t>& modes, double e_max,
                                                            const ContinuationOptions& opts, unsigned threads = 0);

/// Shooting options with dt = default_time_step(max omega^2).
ShootOptions default_shoot_options(const ModalReport& report);

/// `mode,side,E,T,q0_1..q0_n,brake2_1..brake2_n,min_V,is_rosenberg,residual`
void write_generator_csv_header(std::ostream& out, int n);
void write_generator_csv(std::ostream& out, const Generator& g, int n);

} // namespace modalkit
