// modalkit command-line front end.
//
//   modalkit analyze        --system FILE [--eps-int TOL] [--out FILE]
//   modalkit continue       --system FILE --energy-max E [--mode K]... [--dt S] [--out DIR]
//   modalkit simulate       --system FILE --q0 ... [--p0 ...] --t-end T [--dt S] [--out FILE]
//   modalkit check-symmetry --system FILE [--seed N] [--samples N] [--half-width W] [--out FILE]
//
// Exit codes: 0 ok, 1 other error, 2 parse error, 3 no equilibrium,
// 4 continuation stall, 5 energy drift abort.

#include "modalkit/continuation.hpp"
#include "modalkit/expr.hpp"
#include "modalkit/system_file.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using namespace modalkit;

enum Exit { Ok = 0, Failure = 1, Parse = 2, NoEquilibrium = 3, Stall = 4, Drift = 5 };

json to_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

void emit(const json& doc, const std::string& out) {
    if (out.empty() || out == "-") {
        std::cout << doc.dump(2) << '\n';
        return;
    }
    std::ofstream f(out);
    if (!f) throw Error("io", "cannot write '" + out + "'");
    f << doc.dump(2) << '\n';
}

ModalReport analyze_system(const SystemFile& sf, double eps_int) {
    return resonance_check(modal_analysis(sf.system, sf.equilibrium_guess), eps_int);
}

json report_json(const SystemFile& sf, const ModalReport& r) {
    json doc;
    doc["schema"] = 1;
    doc["command"] = "analyze";
    doc["system"] = sf.system.name();
    doc["dof"] = sf.system.dof();
    doc["q_bar"] = to_json(r.q_bar);
    doc["grad_norm"] = r.grad_norm;
    doc["stable"] = r.stable;
    doc["omega_sq"] = to_json(r.omega_sq);
    json omega = json::array(), period = json::array(), shapes = json::array(), modes = json::array();
    for (std::size_t k = 0; k < r.dof(); ++k) {
        const bool osc = r.omega_sq[static_cast<Eigen::Index>(k)] > 0;
        omega.push_back(osc ? json(r.omega(k)) : json(nullptr));
        period.push_back(osc ? json(r.linear_period(k)) : json(nullptr));
        shapes.push_back(to_json(r.mode_shapes[k]));
        modes.push_back({{"mode", k + 1}, {"non_resonant", static_cast<bool>(r.non_resonant[k])}});
    }
    doc["omega"] = omega;
    doc["linear_period"] = period;
    doc["mode_shapes"] = shapes;
    doc["eps_int"] = r.eps_int;
    doc["m_unique"] = r.m_unique;
    doc["modes"] = modes;
    json res = json::array();
    for (const auto& e : r.resonance)
        res.push_back({{"mode", e.mode + 1}, {"other", e.other + 1}, {"ratio", e.ratio},
                       {"distance", e.distance}, {"resonant", e.resonant}});
    doc["resonance"] = res;
    return doc;
}

int cmd_analyze(const std::string& system, double eps_int, const std::string& out) {
    const SystemFile sf = load_system_file(system);
    emit(report_json(sf, analyze_system(sf, eps_int)), out);
    return Ok;
}

struct ContinueArgs {
    std::string system;
    std::vector<int> modes;
    double energy_max = 0.0;
    double dt = 0.0;
    double eps_int = 1e-6;
    double amplitude = 1e-2;
    std::string out = ".";
    bool trajectories = false;
    unsigned threads = 0;
};

int cmd_continue(const ContinueArgs& a) {
    const SystemFile sf = load_system_file(a.system);
    const ModalReport r = analyze_system(sf, a.eps_int);
    const int n = sf.system.dof();
    std::vector<std::size_t> modes;
    if (a.modes.empty())
        for (int k = 0; k < n; ++k) modes.push_back(static_cast<std::size_t>(k));
    for (int k : a.modes) {
        if (k < 1 || k > n) throw Error("argument", "--mode must lie in 1.." + std::to_string(n));
        modes.push_back(static_cast<std::size_t>(k - 1));
    }

    ContinuationOptions opts;
    opts.shoot = default_shoot_options(r);
    if (a.dt > 0) opts.shoot.flow.dt = a.dt;
    opts.seed_amplitude = a.amplitude;
    const auto results = continue_modes(sf.system, r, modes, a.energy_max, opts, a.threads);

    fs::create_directories(a.out);
    json doc;
    doc["schema"] = 1;
    doc["command"] = "continue";
    doc["system"] = sf.system.name();
    doc["energy_max"] = a.energy_max;
    doc["dt"] = opts.shoot.flow.dt;
    json branches = json::array();
    bool stalled = false;
    for (const auto& [plus, minus] : results) {
        for (const Generator* g : {&plus, &minus}) {
            const std::string stem = "generator_mode" + std::to_string(g->mode_index + 1) +
                                     (g->side > 0 ? "_plus" : "_minus");
            const fs::path csv = fs::path(a.out) / (stem + ".csv");
            std::ofstream f(csv);
            if (!f) throw Error("io", "cannot write '" + csv.string() + "'");
            write_generator_csv_header(f, n);
            write_generator_csv(f, *g, n);
            if (a.trajectories) {
                for (std::size_t i = 0; i < g->orbits.size(); ++i) {
                    std::ofstream t(fs::path(a.out) / (stem + "_orbit" + std::to_string(i) + ".csv"));
                    write_trajectory_csv(t, g->orbits[i].samples);
                }
            }
            stalled = stalled || g->stalled;
            json b;
            b["mode"] = g->mode_index + 1;
            b["side"] = g->side;
            b["csv"] = csv.string();
            b["orbits"] = g->orbits.size();
            b["stalled"] = g->stalled;
            b["message"] = g->message;
            b["downgrades"] = g->downgrades;
            b["energy_reached"] = g->orbits.empty() ? 0.0 : g->orbits.back().energy;
            std::size_t rosenberg = 0, eigen = 0;
            for (const auto& o : g->orbits) {
                rosenberg += o.classification.is_rosenberg;
                eigen += o.classification.is_eigenmode;
            }
            b["rosenberg_orbits"] = rosenberg;
            b["eigenmode_orbits"] = eigen;
            b["eigenmode_is_heuristic"] = n >= 3;
            json iso = json::array();
            for (std::size_t i : g->isolated_rosenberg_candidates()) iso.push_back(g->orbits[i].energy);
            b["isolated_rosenberg_energies"] = iso;
            branches.push_back(b);
        }
    }
    doc["branches"] = branches;
    std::cout << doc.dump(2) << '\n';
    return stalled ? Stall : Ok;
}

struct SimulateArgs {
    std::string system;
    std::vector<double> q0, p0;
    double t_end = 0.0;
    double dt = 0.0;
    double drift_budget = 1e-6;
    std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
    const SystemFile sf = load_system_file(a.system);
    const int n = sf.system.dof();
    if (static_cast<int>(a.q0.size()) != n) throw Error("argument", "--q0 needs " + std::to_string(n) + " values");
    if (!a.p0.empty() && static_cast<int>(a.p0.size()) != n)
        throw Error("argument", "--p0 needs " + std::to_string(n) + " values");
    State s0 = State::at_rest(Eigen::Map<const Vec>(a.q0.data(), n));
    if (!a.p0.empty()) s0.p = Eigen::Map<const Vec>(a.p0.data(), n);
    FlowOptions fo;
    fo.drift_budget = a.drift_budget;
    fo.dt = a.dt > 0 ? a.dt : default_time_step(modal_analysis(sf.system, sf.equilibrium_guess).omega_sq.maxCoeff());
    const Trajectory traj = flow(sf.system, s0, a.t_end, fo);
    if (a.out.empty() || a.out == "-") {
        write_trajectory_csv(std::cout, traj);
    } else {
        std::ofstream f(a.out);
        if (!f) throw Error("io", "cannot write '" + a.out + "'");
        write_trajectory_csv(f, traj);
    }
    return Ok;
}

struct SymmetryArgs {
    std::string system;
    std::uint64_t seed = 42;
    int samples = 1000;
    double half_width = 1.5707963267948966;
    std::string out;
};

int cmd_check_symmetry(const SymmetryArgs& a) {
    const SystemFile sf = load_system_file(a.system);
    const auto eq = refine_equilibrium(sf.system, sf.equilibrium_guess);
    if (!eq.converged) throw Error("equilibrium", "no equilibrium found near the guess");
    SymmetrySpec spec = SymmetrySpec::point_reflection(eq.q);
    json phi_desc = "point_reflection";
    if (sf.phi_expr) {
        const auto vars = coordinate_names(sf.system.dof());
        std::vector<expr::Program> comps;
        for (const auto& s : *sf.phi_expr) comps.emplace_back(expr::parse(s, vars, sf.params));
        spec = SymmetrySpec::spatial(
            [comps](const Vec& q) {
                Vec out(q.size());
                for (Eigen::Index i = 0; i < q.size(); ++i)
                    out[i] = comps[static_cast<std::size_t>(i)](std::span<const double>(q.data(), q.size()));
                return out;
            },
            eq.q);
        phi_desc = *sf.phi_expr;
    }
    const SymmetryVerdict v = check_spatial_symmetry(sf.system, spec, a.half_width, a.samples, a.seed);
    json doc;
    doc["schema"] = 1;
    doc["command"] = "check-symmetry";
    doc["system"] = sf.system.name();
    doc["q_bar"] = to_json(eq.q);
    doc["phi"] = phi_desc;
    doc["phi_problems"] = validate_spatial_spec(spec, a.half_width);
    doc["symmetric"] = v.symmetric;
    doc["potential_violation"] = v.potential_violation;
    doc["inertia_violation"] = v.inertia_violation;
    doc["worst_part"] = v.worst_part;
    doc["potential_witness"] = to_json(v.potential_witness);
    doc["inertia_witness"] = to_json(v.inertia_witness);
    doc["equilibrium_minimal_in_box"] = v.equilibrium_minimal_in_box;
    doc["samples"] = v.samples;
    doc["seed"] = a.seed;
    doc["half_width"] = a.half_width;
    doc["caveat"] = SymmetryVerdict::caveat;
    emit(doc, a.out);
    return Ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Modal analysis and continuation of periodic brake orbits in conservative mechanical systems"};
    app.require_subcommand(1);

    std::string system;
    double eps_int = 1e-6;
    std::string out;
    auto* analyze = app.add_subcommand("analyze", "equilibrium, linear modes and resonance table (JSON)");
    analyze->add_option("--system", system, "system definition file")->required();
    analyze->add_option("--eps-int", eps_int, "integer-resonance tolerance")->check(CLI::PositiveNumber);
    analyze->add_option("--out", out, "output file (default stdout)");

    ContinueArgs ca;
    auto* cont = app.add_subcommand("continue", "continue generators of brake orbits (CSV per branch)");
    cont->add_option("--system", ca.system, "system definition file")->required();
    cont->add_option("--mode", ca.modes, "mode number, 1-based; repeatable (default all)");
    cont->add_option("--energy-max", ca.energy_max, "maximal energy above V(q_bar) [J]")->required();
    cont->add_option("--dt", ca.dt, "integrator step (default T_min / 100)")->check(CLI::PositiveNumber);
    cont->add_option("--eps-int", ca.eps_int, "integer-resonance tolerance")->check(CLI::PositiveNumber);
    cont->add_option("--amplitude", ca.amplitude, "seed amplitude along the mode shape")->check(CLI::PositiveNumber);
    cont->add_option("--out", ca.out, "output directory");
    cont->add_option("--threads", ca.threads, "worker threads (default hardware, capped by MODALKIT_THREADS)");
    cont->add_flag("--trajectories", ca.trajectories, "also write one trajectory CSV per orbit");
    std::uint64_t unused_seed = 0;
    cont->add_option("--seed", unused_seed, "accepted for uniformity; continuation is deterministic");

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "integrate from an initial state (CSV)");
    sim->add_option("--system", sa.system, "system definition file")->required();
    sim->add_option("--q0", sa.q0, "initial configuration")->required()->delimiter(',');
    sim->add_option("--p0", sa.p0, "initial momentum (default 0)")->delimiter(',');
    sim->add_option("--t-end", sa.t_end, "final time [s]")->required()->check(CLI::NonNegativeNumber);
    sim->add_option("--dt", sa.dt, "integrator step (default T_min / 100)")->check(CLI::PositiveNumber);
    sim->add_option("--drift-budget", sa.drift_budget, "relative energy drift budget")->check(CLI::PositiveNumber);
    sim->add_option("--out", sa.out, "output file (default stdout)");

    SymmetryArgs ya;
    auto* sym = app.add_subcommand("check-symmetry", "sampled spatial symmetry test of M and V (JSON)");
    sym->add_option("--system", ya.system, "system definition file")->required();
    sym->add_option("--seed", ya.seed, "sampling seed");
    sym->add_option("--samples", ya.samples, "number of sampled configurations")->check(CLI::PositiveNumber);
    sym->add_option("--half-width", ya.half_width, "half-width of the sampling box")->check(CLI::PositiveNumber);
    sym->add_option("--out", ya.out, "output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return Parse;
    }

    try {
        if (*analyze) return cmd_analyze(system, eps_int, out);
        if (*cont) return cmd_continue(ca);
        if (*sim) return cmd_simulate(sa);
        if (*sym) return cmd_check_symmetry(ya);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return Parse;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        if (e.kind() == "equilibrium") return NoEquilibrium;
        if (e.kind() == "drift") return Drift;
        return Failure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Failure;
    }
    return Failure;
}
