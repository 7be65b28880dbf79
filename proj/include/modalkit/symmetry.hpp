#pragma once

#include "modalkit/integrator.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

namespace modalkit {

using ConfigMap = std::function<Vec(const Vec&)>;

enum class SymmetryKind { TimeReversal, Spatial };

/// Discrete symmetry of the canonical equations.
///  - time reversal: (q, p) -> (q, -p) with t -> -t (tau = -1);
///  - spatial: phase-space lift (q, p) -> (phi(q), Dphi(q)^{-T} p) of an
///    involutive configuration map fixing q_bar (tau = +1).
struct SymmetrySpec {
    SymmetryKind kind = SymmetryKind::TimeReversal;
    ConfigMap phi;       ///< empty means point reflection q -> 2 q_bar - q
    Vec center;          ///< q_bar
    int tau = -1;

    static SymmetrySpec time_reversal();
    static SymmetrySpec point_reflection(Vec q_bar);
    static SymmetrySpec spatial(ConfigMap phi, Vec q_bar);

    Vec apply(const Vec& q) const;
    Mat jacobian(const Vec& q) const;
    State lift(const State& s) const;
};

/// Checks phi o phi = id (1e-10), phi(q_bar) = q_bar and Dphi(q_bar) = -I
/// (1e-8) on samples in the box. Returns an empty string when all hold.
std::string validate_spatial_spec(const SymmetrySpec& spec, double half_width = 1.5707963267948966,
                                  int n_samples = 100, std::uint64_t seed = 7);

struct SymmetryVerdict {
    bool symmetric = false;
    double potential_violation = 0.0;  ///< max |V(q) - V(phi q)| / max |V(q) - V(q_bar)|
    double inertia_violation = 0.0;    ///< max |M(q) - J^T M(phi q) J|_F / max |M(q)|_F
    Vec potential_witness;
    Vec inertia_witness;
    std::string worst_part;            ///< "potential", "inertia" or "none"
    /// Sampled stand-in for "q_bar is the only fixed point of phi with
    /// minimal potential": q_bar has the lowest V among the samples.
    bool equilibrium_minimal_in_box = true;
    int samples = 0;
    static constexpr const char* caveat =
        "verdict from sampled configurations in a box around q_bar; global properties are not proven";
};

/// Spatial symmetry test of M and V over n_samples uniform samples in the
/// hypercube of half-width `half_width` around spec.center. Symmetric iff
/// both relative violations are below 1e-9.
SymmetryVerdict check_spatial_symmetry(const MechSystem& sys, const SymmetrySpec& spec,
                                       double half_width = 1.5707963267948966, int n_samples = 1000,
                                       std::uint64_t seed = 42);

/// Chart map with an optional domain predicate.
struct ChartMap {
    ConfigMap map;
    std::function<bool(const Vec&)> domain;  ///< empty means everywhere
};

/// Y = 1/2 (X - X o phi). Y o phi = -Y where both are defined; Y throws
/// Error("domain") when phi(x) leaves the domain of X.
ChartMap equivariant_chart(const ChartMap& x, ConfigMap phi);

struct TrajectorySymmetry {
    double residual = 0.0;  ///< symmetric Hausdorff distance / orbit diameter
    bool closed = true;
    std::optional<std::string> warning;
};

/// Compares the sampled orbit set with its image under the symmetry, using
/// Hermite interpolation between samples.
TrajectorySymmetry check_trajectory_symmetry(const Trajectory& traj, const SymmetrySpec& spec);

} // namespace modalkit
