#include "modalkit/continuation.hpp"

#include "curve_util.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>
#include <type_traits>

namespace modalkit {

namespace {

std::string fmt(double x) {
    std::ostringstream os;
    os << std::setprecision(6) << x;
    return os.str();
}

/// Closest distance between segments [a, b] and [c, d] in R^n.
double segment_distance(const Vec& a, const Vec& b, const Vec& c, const Vec& d) {
    const Vec u = b - a;
    const Vec v = d - c;
    const Vec w = a - c;
    const double uu = u.squaredNorm();
    const double vv = v.squaredNorm();
    const double uv = u.dot(v);
    const double uw = u.dot(w);
    const double vw = v.dot(w);
    const double den = uu * vv - uv * uv;
    double s = 0.0;
    double t = 0.0;
    if (uu <= 0.0 && vv <= 0.0) return w.norm();
    if (uu <= 0.0) {
        t = std::clamp(vw / vv, 0.0, 1.0);
    } else if (vv <= 0.0) {
        s = std::clamp(-uw / uu, 0.0, 1.0);
    } else {
        s = den > 1e-14 * uu * vv ? std::clamp((uv * vw - vv * uw) / den, 0.0, 1.0) : 0.0;
        t = (uv * s + vw) / vv;
        if (t < 0.0) {
            t = 0.0;
            s = std::clamp(-uw / uu, 0.0, 1.0);
        } else if (t > 1.0) {
            t = 1.0;
            s = std::clamp((uv - uw) / uu, 0.0, 1.0);
        }
    }
    return (w + s * u - t * v).norm();
}

struct Shooter {
    const MechSystem& sys;
    FlowOptions flow;
    double v_bar;
    double m_norm;

    Vec endpoint(const Vec& q0, double half, State* end = nullptr) const {
        State s = propagate(sys, State::at_rest(q0), half, flow);
        if (end) *end = s;
        return s.p;
    }

    double momentum_scale(const Vec& q0) const {
        const double e = std::max(sys.potential(q0) - v_bar, 1e-300);
        return std::sqrt(2.0 * e * m_norm);
    }
};

struct Residual {
    Vec p;
    double c = 0.0;
    State end;
    bool ok = false;
};

} // namespace

ShootOptions default_shoot_options(const ModalReport& report) {
    ShootOptions o;
    o.flow.dt = default_time_step(report.omega_sq.maxCoeff());
    return o;
}

BrakeOrbit shoot_brake_orbit(const MechSystem& sys, const ModalReport& report, const Vec& q0_guess,
                             double period_guess, const ShootConstraint& constraint, const ShootOptions& opts) {
    const Eigen::Index n = sys.dof();
    if (q0_guess.size() != n) throw Error("dimension", "q0 guess dimension does not match the system");
    if (!(period_guess > 0.0)) throw Error("argument", "period guess must be positive");
    if (!(opts.flow.dt > 0.0)) throw Error("argument", "shooting needs a positive dt");
    if (const auto* lvl = std::get_if<EnergyLevel>(&constraint); lvl && !(lvl->energy > 0.0))
        throw Error("argument", "target energy must lie above V(q_bar)");

    Shooter sh{sys, opts.flow, sys.potential(report.q_bar),
               Eigen::SelfAdjointEigenSolver<Mat>(eval_inertia(sys, report.q_bar)).eigenvalues().maxCoeff()};
    const double dt = opts.flow.dt;

    auto constraint_value = [&](const Vec& x) {
        if (const auto* lvl = std::get_if<EnergyLevel>(&constraint))
            return sys.potential(x.head(n)) - sh.v_bar - lvl->energy;
        const auto& pal = std::get<PseudoArclength>(constraint);
        return pal.tangent.dot(x - pal.x_prev) - pal.ds;
    };
    const double c_scale = std::visit(
        [](const auto& c) {
            if constexpr (std::is_same_v<std::decay_t<decltype(c)>, EnergyLevel>) return std::max(c.energy, 1e-12);
            else return std::max(std::abs(c.ds), 1e-12);
        },
        constraint);
    const double c_tol = std::visit(
        [&](const auto& c) {
            if constexpr (std::is_same_v<std::decay_t<decltype(c)>, EnergyLevel>)
                return opts.constraint_tol * std::max(1.0, c.energy);
            else return opts.constraint_tol * std::max(1.0, std::abs(c.ds));
        },
        constraint);

    auto evaluate = [&](const Vec& x) {
        Residual r;
        if (!x.allFinite() || x[n] < 5.0 * dt) return r;
        try {
            r.p = sh.endpoint(x.head(n), x[n], &r.end);
            r.c = constraint_value(x);
            r.ok = r.p.allFinite() && std::isfinite(r.c);
        } catch (const Error&) {
            r.ok = false;
        }
        return r;
    };

    Vec x(n + 1);
    x.head(n) = q0_guess;
    x[n] = 0.5 * period_guess;
    int total_iterations = 0;

    for (int pass = 0; pass < 3; ++pass) {
        sh.flow.steps = std::max(1L, static_cast<long>(std::ceil(x[n] / dt - 1e-9)));
        Residual r = evaluate(x);
        if (!r.ok) throw NumericalError("newton", "shooting residual cannot be evaluated at the initial guess");
        double ps = sh.momentum_scale(x.head(n));
        auto merit = [&](const Residual& rr, double scale) {
            return std::hypot(rr.p.norm() / scale, rr.c / c_scale);
        };
        int it = 0;
        while (!(r.p.norm() <= opts.momentum_tol * ps && std::abs(r.c) <= c_tol)) {
            if (it >= opts.max_iterations)
                throw NumericalError("newton", "shooting did not converge in " + std::to_string(opts.max_iterations) +
                                                   " iterations (|p(T/2)| = " + fmt(r.p.norm()) + ")");
            Mat j(n + 1, n + 1);
            for (Eigen::Index k = 0; k < n; ++k) {
                Vec xk = x;
                const double h = opts.fd_step * std::max(1.0, std::abs(x[k]));
                xk[k] += h;
                const Vec pk = sh.endpoint(xk.head(n), xk[n]);
                j.block(0, k, n, 1) = (pk - r.p) / h;
            }
            j.block(0, n, n, 1) = vector_field(sys, r.end).p;
            if (const auto* lvl = std::get_if<EnergyLevel>(&constraint)) {
                (void)lvl;
                j.block(n, 0, 1, n) = sys.grad_potential(x.head(n)).transpose();
                j(n, n) = 0.0;
            } else {
                j.row(n) = std::get<PseudoArclength>(constraint).tangent.transpose();
            }
            Vec rhs(n + 1);
            rhs.head(n) = -r.p;
            rhs[n] = -r.c;
            const Vec delta = j.fullPivLu().solve(rhs);
            if (!delta.allFinite()) throw NumericalError("newton", "singular shooting Jacobian");

            const double m0 = merit(r, ps);
            double lambda = 1.0;
            bool accepted = false;
            for (int halving = 0; halving <= opts.max_halvings; ++halving, lambda *= 0.5) {
                const Vec xt = x + lambda * delta;
                if (xt[n] < 5.0 * dt)
                    continue;
                Residual rt = evaluate(xt);
                if (!rt.ok) continue;
                if (merit(rt, ps) < m0) {
                    x = xt;
                    r = std::move(rt);
                    accepted = true;
                    break;
                }
            }
            ++it;
            if (!accepted) {
                if (x[n] + delta[n] < 5.0 * dt)
                    throw NumericalError("period", "period collapsed below 10 dt");
                throw NumericalError("newton", "residual stagnation (|p(T/2)| = " + fmt(r.p.norm()) + ")");
            }
            ps = sh.momentum_scale(x.head(n));
        }
        total_iterations += it;
        const long ideal = std::max(1L, static_cast<long>(std::ceil(x[n] / dt - 1e-9)));
        if (std::abs(static_cast<double>(ideal - sh.flow.steps)) <= 0.1 * static_cast<double>(ideal)) break;
    }
    if (x[n] < 5.0 * dt) throw NumericalError("period", "period collapsed below 10 dt");

    BrakeOrbit orbit;
    orbit.q0 = x.head(n);
    orbit.half_period = x[n];
    orbit.energy = sys.potential(orbit.q0) - sh.v_bar;
    FlowOptions full = sh.flow;
    full.steps = 2 * sh.flow.steps;
    orbit.samples = flow(sys, State::at_rest(orbit.q0), 2.0 * orbit.half_period, full);
    orbit.half_index = static_cast<std::size_t>(sh.flow.steps);
    orbit.samples.times[orbit.half_index] = orbit.half_period;
    orbit.brake2 = orbit.samples.states[orbit.half_index].q;
    orbit.residual = orbit.samples.states[orbit.half_index].p.norm();
    for (const State& s : orbit.samples.states) orbit.momentum_scale = std::max(orbit.momentum_scale, s.p.norm());
    orbit.newton_iterations = total_iterations;
    orbit.classification = classify_orbit(sys, orbit, report);
    return orbit;
}

OrbitClassification classify_orbit(const MechSystem& sys, const BrakeOrbit& orbit, const ModalReport& report,
                                   const std::optional<SymmetryVerdict>& sym) {
    OrbitClassification c;
    const Trajectory& tr = orbit.samples;
    const std::size_t half = orbit.half_index;
    const std::size_t last = tr.size() - 1;
    const Vec& q_bar = report.q_bar;

    c.brake_distance = (tr.states[half].q - tr.states[0].q).norm();
    c.degenerate = c.brake_distance <= 1e-6;

    // Diameter of the half-period path; the full-period path retraces it.
    for (std::size_t i = 0; i <= half; ++i)
        for (std::size_t k = i + 1; k <= half; ++k)
            c.path_diameter = std::max(c.path_diameter, (tr.states[i].q - tr.states[k].q).norm());
    c.delta_int = 1e-4 * c.path_diameter;
    c.delta_eq = 1e-4 * c.path_diameter;

    // Momentum-zero events over one period, with [T - h, T] wrapping to 0.
    const double p_scale = orbit.momentum_scale > 0 ? orbit.momentum_scale : 1.0;
    auto pnorm = [&](std::size_t i) { return tr.states[i % last].p.norm(); };
    for (std::size_t i = 0; i < last; ++i) {
        const std::size_t prev = i == 0 ? last - 1 : i - 1;
        const double here = pnorm(i);
        if (here > pnorm(prev) || here > pnorm(i + 1)) continue;
        double best = here;
        for (std::size_t seg : {prev, i}) {
            auto f = [&](double s) { return tr.interpolate(seg, s).p.norm(); };
            best = std::min(best, f(detail::golden_min(f)));
        }
        if (best <= 1e-6 * p_scale) ++c.momentum_zero_events;
    }

    // Self-intersection of the half-period path, ignoring pairs that are
    // closer than 2 delta_int along the arc.
    std::vector<double> arc(half + 1, 0.0);
    for (std::size_t i = 1; i <= half; ++i) arc[i] = arc[i - 1] + (tr.states[i].q - tr.states[i - 1].q).norm();
    c.self_intersection_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < half; ++i) {
        for (std::size_t k = i + 2; k < half; ++k) {
            if (arc[k] - arc[i + 1] < 2.0 * c.delta_int) continue;
            const double d = segment_distance(tr.states[i].q, tr.states[i + 1].q, tr.states[k].q, tr.states[k + 1].q);
            c.self_intersection_gap = std::min(c.self_intersection_gap, d);
        }
    }

    const double v_bar = sys.potential(q_bar);
    c.min_potential_along =
        detail::minimize_along(tr, 0, last, [&](const State& s) { return sys.potential(s.q) - v_bar; }).value;
    auto dist2 = [&](const State& s) { return (s.q - q_bar).squaredNorm(); };
    const auto full = detail::minimize_along(tr, 0, last, dist2);
    c.min_config_dist_to_eq = std::sqrt(std::max(0.0, full.value));
    c.passage_time = detail::minimize_along(tr, 0, half, dist2).time;

    c.is_weak_eigenmode = !c.degenerate && c.momentum_zero_events == 2;
    c.is_eigenmode = c.is_weak_eigenmode && c.self_intersection_gap > c.delta_int;
    c.eigenmode_is_heuristic = q_bar.size() >= 3;
    c.is_rosenberg = c.is_weak_eigenmode && c.min_config_dist_to_eq < c.delta_eq;
    if (sym) c.symmetry_predicts_rosenberg = sym->symmetric;
    return c;
}

std::optional<double> equilibrium_passage_time(const BrakeOrbit& orbit) {
    if (!orbit.classification.is_rosenberg) return std::nullopt;
    return orbit.classification.passage_time;
}

std::vector<std::size_t> Generator::isolated_rosenberg_candidates(double tol) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < orbits.size(); ++i) {
        const double v = orbits[i].classification.min_potential_along;
        if (v > tol) continue;
        const bool left = i == 0 || orbits[i - 1].classification.min_potential_along >= v;
        const bool right = i + 1 == orbits.size() || orbits[i + 1].classification.min_potential_along >= v;
        if (left && right) out.push_back(i);
    }
    return out;
}

namespace {

Vec pack_orbit(const BrakeOrbit& o) {
    Vec x(o.q0.size() + 1);
    x.head(o.q0.size()) = o.q0;
    x[o.q0.size()] = o.half_period;
    return x;
}

void note_downgrades(Generator& g) {
    const std::size_t i = g.orbits.size() - 1;
    if (i == 0) return;
    const auto& a = g.orbits[i - 1].classification;
    const auto& b = g.orbits[i].classification;
    const std::string at = " at E = " + fmt(g.orbits[i].energy);
    if (a.is_eigenmode && !b.is_eigenmode && b.is_weak_eigenmode) g.downgrades.push_back("eigenmode -> weak" + at);
    if (a.is_weak_eigenmode && !b.is_weak_eigenmode) g.downgrades.push_back("weak eigenmode lost" + at);
    if (a.is_rosenberg && !b.is_rosenberg) g.downgrades.push_back("Rosenberg -> eigenmode" + at);
}

} // namespace

Generator continue_branch(const MechSystem& sys, const ModalReport& report, std::size_t k, int side, double e_max,
                          const ContinuationOptions& opts) {
    Generator g;
    g.mode_index = k;
    g.side = side >= 0 ? +1 : -1;
    if (!(e_max > 0.0)) {
        g.message = "E_max does not lie above V(q_bar): empty generator";
        return g;
    }
    const double v_bar = sys.potential(report.q_bar);
    ModeSeed seed = eigenspace_seed(report, k, g.side * opts.seed_amplitude);
    double e_seed = sys.potential(seed.state.q) - v_bar;
    if (!(e_seed > 0.0)) throw Error("equilibrium", "seed energy is not above V(q_bar)");
    if (e_seed >= 0.5 * e_max) {
        seed = eigenspace_seed(report, k, g.side * opts.seed_amplitude * std::sqrt(0.25 * e_max / e_seed));
        e_seed = sys.potential(seed.state.q) - v_bar;
    }
    if (seed.warning) g.message = *seed.warning;

    try {
        g.orbits.push_back(shoot_brake_orbit(sys, report, seed.state.q, seed.period, EnergyLevel{e_seed}, opts.shoot));
    } catch (const Error& e) {
        g.stalled = true;
        g.message = std::string("seed orbit failed: ") + e.what();
        return g;
    }
    g.orbits.back().classification.symmetry_predicts_rosenberg =
        opts.symmetry ? std::optional<bool>(opts.symmetry->symmetric) : std::nullopt;
    g.log.push_back({g.orbits.back().energy, 0.0, g.orbits.back().newton_iterations, true, "seed"});

    const double max_step = opts.max_step > 0 ? opts.max_step : e_max / 20.0;
    double step = std::min(opts.initial_step > 0 ? opts.initial_step : e_max / 20.0, max_step);
    const double floor = opts.min_step_fraction * e_max;
    const Eigen::Index n = sys.dof();

    while (g.orbits.back().energy < e_max * (1.0 - 1e-12) && g.orbits.size() < opts.max_orbits) {
        const BrakeOrbit& last = g.orbits.back();
        const double target = std::min(last.energy + step, e_max);

        // Secant in sqrt(E), which is linear in amplitude near q_bar.
        Vec x_prev(n + 1);
        double a_prev = 0.0;
        if (g.orbits.size() >= 2) {
            x_prev = pack_orbit(g.orbits[g.orbits.size() - 2]);
            a_prev = std::sqrt(g.orbits[g.orbits.size() - 2].energy);
        } else {
            x_prev.head(n) = report.q_bar;
            x_prev[n] = last.half_period;
        }
        const Vec x_last = pack_orbit(last);
        const double a_last = std::sqrt(last.energy);
        const Vec x_pred = x_last + (x_last - x_prev) * ((std::sqrt(target) - a_last) / (a_last - a_prev));

        std::string note;
        bool ok = false;
        bool diverging = false;
        try {
            BrakeOrbit o = shoot_brake_orbit(sys, report, x_pred.head(n), 2.0 * x_pred[n], EnergyLevel{target},
                                             opts.shoot);
            const double bound = 3.0 * (x_pred.head(n) - last.q0).norm() + 1e-9 * (1.0 + last.q0.norm());
            if (o.period() > opts.max_period_factor * report.linear_period(k)) {
                diverging = true;
                note = "period " + fmt(o.period()) + " s exceeds " + fmt(opts.max_period_factor) + " linear periods";
            } else if ((o.q0 - last.q0).norm() > bound) {
                note = "branch jump: brake point moved beyond the step bound";
            } else if (std::abs(o.half_period - x_pred[n]) > 0.25 * last.half_period) {
                note = "branch jump: period changed by more than 25%";
            } else {
                if (opts.symmetry) o.classification.symmetry_predicts_rosenberg = opts.symmetry->symmetric;
                g.log.push_back({o.energy, step, o.newton_iterations, true, ""});
                const bool easy = o.newton_iterations <= opts.easy_iterations;
                g.orbits.push_back(std::move(o));
                note_downgrades(g);
                if (easy) step = std::min(step * opts.growth, max_step);
                ok = true;
            }
        } catch (const Error& e) {
            note = e.what();
        }
        if (ok) continue;

        g.log.push_back({target, step, 0, false, note});
        if (diverging) {
            g.stalled = true;
            g.message = "continuation stalled at E = " + fmt(last.energy) + ": " + note;
            break;
        }
        step *= 0.5;
        if (step >= floor) continue;

        // Pseudo-arclength fallback past a possible energy turning point.
        bool rescued = false;
        if (g.orbits.size() >= 2) {
            const Vec secant = x_last - pack_orbit(g.orbits[g.orbits.size() - 2]);
            const double ds = secant.norm();
            if (ds > 0) {
                const Vec t = secant / ds;
                try {
                    BrakeOrbit o = shoot_brake_orbit(sys, report, (x_last + ds * t).head(n),
                                                     2.0 * (x_last[n] + ds * t[n]), PseudoArclength{x_last, t, ds},
                                                     opts.shoot);
                    if (o.energy >= last.energy + floor) {
                        g.log.push_back({o.energy, o.energy - last.energy, o.newton_iterations, true,
                                         "pseudo-arclength"});
                        g.orbits.push_back(std::move(o));
                        note_downgrades(g);
                        step = std::max(floor, g.orbits.back().energy - g.orbits[g.orbits.size() - 2].energy);
                        rescued = true;
                    } else {
                        note = o.energy > last.energy ? "no energy progress along the branch"
                                                      : "energy turning point at E = " + fmt(last.energy);
                    }
                } catch (const Error& e) {
                    note = e.what();
                }
            }
        }
        if (rescued) continue;
        g.stalled = true;
        g.message = "continuation stalled at E = " + fmt(last.energy) + ": " + note;
        break;
    }
    return g;
}

std::pair<Generator, Generator> continue_generator(const MechSystem& sys, const ModalReport& report, std::size_t k,
                                                   double e_max, const ContinuationOptions& opts) {
    return {continue_branch(sys, report, k, +1, e_max, opts), continue_branch(sys, report, k, -1, e_max, opts)};
}

std::vector<std::pair<Generator, Generator>> continue_modes(const MechSystem& sys, const ModalReport& report,
                                                            const std::vector<std::size_t>& modes, double e_max,
                                                            const ContinuationOptions& opts, unsigned threads) {
    // Branches are independent tasks: 2 per mode.
    const std::size_t tasks = 2 * modes.size();
    std::vector<Generator> out(tasks);
    std::vector<std::exception_ptr> errors(tasks);
    unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("MODALKIT_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap > 0) workers = std::min(workers, static_cast<unsigned>(cap));
    }
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(tasks)));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < tasks; i = next++) {
            try {
                out[i] = continue_branch(sys, report, modes[i / 2], i % 2 == 0 ? +1 : -1, e_max, opts);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<std::pair<Generator, Generator>> result;
    for (std::size_t i = 0; i < modes.size(); ++i) result.emplace_back(std::move(out[2 * i]), std::move(out[2 * i + 1]));
    return result;
}

void write_generator_csv_header(std::ostream& out, int n) {
    out << "mode,side,E,T";
    for (int i = 1; i <= n; ++i) out << ",q0_" << i;
    for (int i = 1; i <= n; ++i) out << ",brake2_" << i;
    out << ",min_V,is_rosenberg,residual\n";
}

void write_generator_csv(std::ostream& out, const Generator& g, int n) {
    const auto old = out.precision(17);
    for (const BrakeOrbit& o : g.orbits) {
        out << g.mode_index + 1 << ',' << g.side << ',' << o.energy << ',' << o.period();
        for (int i = 0; i < n; ++i) out << ',' << o.q0[i];
        for (int i = 0; i < n; ++i) out << ',' << o.brake2[i];
        out << ',' << o.classification.min_potential_along << ',' << (o.classification.is_rosenberg ? 1 : 0) << ','
            << o.residual << '\n';
    }
    out.precision(old);
}

} // namespace modalkit
