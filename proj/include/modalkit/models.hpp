#pragma once

#include "modalkit/system.hpp"

#include <string_view>

namespace modalkit::models {

enum class Potential { S1, S2, A };

Potential potential_from_name(std::string_view s);
std::string_view potential_name(Potential p);

/// Parameters of the example families. Defaults are those of the 2-DoF
/// experiments; the quintuple pendulum uses `link_length`, `stiffness` and
/// `mass` only.
struct ModelParams {
    double mass = 0.4;           ///< m [kg]
    double inertia = 1.0 / 12.0; ///< I [kg m^2]
    double length = 1.0;         ///< d or l [m]
    double stiffness = 10.0;     ///< k or K [N m / rad]
    double gravity = 9.81;       ///< g [m / s^2], positive pulls towards q = 0 hanging down
    int links = 5;               ///< quintuple pendulum only

    void validate() const;
};

ModelParams quintuple_defaults();

/// Two unit masses on R^2 with M = diag(m, m).
MechSystem build_coupled_masses(const ModelParams& p, Potential v);

/// Double pendulum with parallel elasticity,
///   M11 = I + d^2 m (3 + 2 cos q2), M12 = d^2 m (1 + cos q2), M22 = I + d^2 m.
MechSystem build_double_pendulum(const ModelParams& p, Potential v);

/// Planar serial chain of `links` rigid massless links of length l with point
/// masses m at the link tips, relative joint angles q (q = 0 hangs straight
/// down), joint springs K diag and gravity. V is offset so that V(0) = 0.
/// Throws if Hess V(0) is not positive definite.
MechSystem build_quintuple_pendulum(const ModelParams& p);

/// Lookup by builtin id ("double_pendulum", "coupled_masses",
/// "quintuple_pendulum"); `potential` is ignored for the quintuple.
MechSystem build_builtin(std::string_view id, const ModelParams& p, Potential v);

/// M = I, V = 1/2 sum w_i q_i^2.
MechSystem build_linear(const Vec& omega_sq);

} // namespace modalkit::models
