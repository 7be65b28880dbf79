#pragma once

#include "modalkit/dynamics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace modalkit {

struct ResonanceEntry {
    std::size_t mode;     ///< k
    std::size_t other;    ///< j
    double ratio;         ///< omega_j^2 / omega_k^2
    double distance;      ///< |ratio - round(ratio)|
    bool resonant;
};

/// 2-plane E0 = span{(d, 0), (0, M(q_bar) d)} in phase space.
struct Eigenspace {
    Vec position_direction;  ///< (d, 0)
    Vec momentum_direction;  ///< (0, M d)
};

/// Equilibrium modal data. Modes are sorted by descending omega^2.
struct ModalReport {
    Vec q_bar;
    double grad_norm = 0.0;
    Vec omega_sq;
    std::vector<Vec> mode_shapes;  ///< unit Euclidean norm, largest entry positive
    std::vector<Eigenspace> eigenspaces;
    bool stable = false;           ///< all omega^2 > 0
    double eps_int = 1e-6;
    std::vector<ResonanceEntry> resonance;
    std::vector<bool> non_resonant; ///< per mode
    std::size_t m_unique = 0;

    std::size_t dof() const { return static_cast<std::size_t>(omega_sq.size()); }
    double omega(std::size_t k) const;
    double linear_period(std::size_t k) const;
};

/// Refines the equilibrium from q_guess, solves Hess V d = omega^2 M d through
/// a Cholesky reduction and fills the resonance table at eps_int = 1e-6.
/// Throws Error("equilibrium") when refinement does not reach |dV| < 1e-8.
/// An unstable equilibrium is reported with stable = false.
ModalReport modal_analysis(const MechSystem& sys, const Vec& q_guess);

/// Mode k is resonant with j iff omega_j^2/omega_k^2 lies within eps_int of an
/// integer >= 1. m_unique counts modes resonant with no other mode.
ModalReport resonance_check(ModalReport report, double eps_int);

/// Resonance table for a bare list of squared frequencies.
ModalReport resonance_from_values(const Vec& omega_sq, double eps_int);

struct ModeSeed {
    State state;            ///< (q_bar + eps d_k, 0)
    double period = 0.0;    ///< 2 pi / omega_k
    std::optional<std::string> warning;
};

ModeSeed eigenspace_seed(const ModalReport& report, std::size_t k, double amplitude);

} // namespace modalkit
