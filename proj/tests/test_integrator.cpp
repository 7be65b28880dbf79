#include "modalkit/integrator.hpp"
#include "modalkit/models.hpp"

#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace modalkit;

namespace {

MechSystem oscillator(double omega) {
    return make_expression_system("osc", 1, "0.5*w2*q1^2", {{"1"}}, {{"w2", omega * omega}});
}

MechSystem planar_pendulum() {
    return make_expression_system("pendulum", 1, "-m*g*l*cos(q1)", {{"m*l^2"}}, {{"m", 1}, {"g", 9.81}, {"l", 1}});
}

Vec scalar(double x) {
    Vec v(1);
    v << x;
    return v;
}

/// First time after t = 0 at which p changes sign twice, refined linearly.
double first_return(const Trajectory& tr) {
    int changes = 0;
    double last = 0.0;
    for (std::size_t i = 1; i < tr.size(); ++i) {
        const double a = tr.states[i - 1].p[0], b = tr.states[i].p[0];
        if ((a < 0) != (b < 0) && a != 0.0) {
            const double t = tr.times[i - 1] + (tr.times[i] - tr.times[i - 1]) * a / (a - b);
            ++changes;
            last = t;
            if (changes == 2) return last;
        }
    }
    return last;
}

} // namespace

TEST_CASE("zero duration returns the initial state") {
    const auto sys = oscillator(2.0);
    FlowOptions o;
    o.dt = 0.01;
    const auto tr = flow(sys, {scalar(1), scalar(0.5)}, 0.0, o);
    REQUIRE(tr.size() == 1);
    CHECK(tr.front().q[0] == 1.0);
    CHECK(tr.front().p[0] == 0.5);
    const auto tiny = flow(sys, {scalar(1), scalar(0.0)}, 1e-12, o);
    CHECK(std::abs(tiny.back().q[0] - 1.0) < 1e-20 + 1e-15);
}

TEST_CASE("harmonic oscillator period and accuracy") {
    const auto sys = oscillator(2.0);
    FlowOptions o;
    o.dt = default_time_step(4.0);
    const auto tr = flow(sys, State::at_rest(scalar(1)), 4.0, o);
    // Exact solution q = cos 2t.
    for (std::size_t i = 0; i < tr.size(); ++i) CHECK(std::abs(tr.states[i].q[0] - std::cos(2 * tr.times[i])) < 1e-9);
    // Sign changes of p bracket the half-period crossings; refine by Hermite.
    double t_return = 0;
    int seen = 0;
    for (std::size_t i = 1; i < tr.size() && seen < 2; ++i) {
        const double a = tr.states[i - 1].p[0], b = tr.states[i].p[0];
        if (a != 0.0 && (a < 0) != (b < 0)) {
            double lo = 0, hi = 1;
            for (int k = 0; k < 60; ++k) {
                const double mid = 0.5 * (lo + hi);
                ((tr.interpolate(i - 1, mid).p[0] < 0) == (a < 0) ? lo : hi) = mid;
            }
            t_return = tr.times[i - 1] + lo * (tr.times[i] - tr.times[i - 1]);
            ++seen;
        }
    }
    CHECK(seen == 2);
    CHECK(std::abs(t_return - std::numbers::pi) < 1e-6);
    CHECK(std::abs(first_return(tr) - std::numbers::pi) < 1e-3);
    CHECK(tr.back().q[0] == doctest::Approx(std::cos(8.0)).epsilon(1e-9));
    CHECK(tr.times.back() == 4.0);
}

TEST_CASE("pendulum period matches a finer self-reference") {
    const auto sys = planar_pendulum();
    const double omega = std::sqrt(9.81);
    FlowOptions coarse;
    coarse.dt = default_time_step(9.81);
    FlowOptions fine = coarse;
    fine.dt = coarse.dt / 100;
    fine.sample_stride = 100;
    const double t = 4 * std::numbers::pi / omega;
    const auto a = flow(sys, State::at_rest(scalar(1.0)), t, coarse);
    const auto b = flow(sys, State::at_rest(scalar(1.0)), t, fine);
    CHECK(a.size() == b.size());
    CHECK((a.back().packed() - b.back().packed()).norm() < 1e-7);
    CHECK(a.relative_energy_drift() < 1e-9);

    // Half periods by bisection on p over the Hermite path.
    auto half_period = [](const Trajectory& tr) {
        for (std::size_t i = 1; i < tr.size(); ++i) {
            const double pa = tr.states[i - 1].p[0], pb = tr.states[i].p[0];
            if (i > 1 && (pa < 0) != (pb < 0)) {
                double lo = 0, hi = 1;
                for (int k = 0; k < 60; ++k) {
                    const double mid = 0.5 * (lo + hi);
                    ((tr.interpolate(i - 1, mid).p[0] < 0) == (pa < 0) ? lo : hi) = mid;
                }
                return tr.times[i - 1] + lo * (tr.times[i] - tr.times[i - 1]);
            }
        }
        return 0.0;
    };
    CHECK(std::abs(half_period(a) - half_period(b)) < 1e-6 * half_period(b));
}

TEST_CASE("flow_back reflects brake states and inverts flow") {
    const auto dp = models::build_double_pendulum({}, models::Potential::A);
    FlowOptions o;
    o.dt = default_time_step(40.0);
    Vec q(2);
    q << 0.1, 1.6;
    const auto fwd = flow(dp, State::at_rest(q), 1.0, o);
    const auto back = flow_back(dp, State::at_rest(q), 1.0, o);
    REQUIRE(fwd.size() == back.size());
    CHECK(back.times.front() == -1.0);
    CHECK(back.times.back() == 0.0);
    for (std::size_t i = 0; i < fwd.size(); ++i) {
        const std::size_t j = fwd.size() - 1 - i;
        CHECK((fwd.states[i].q - back.states[j].q).norm() < 1e-8);
    }

    State s0{q, Vec::Zero(2)};
    s0.p << 0.3, -0.2;
    const State b = flow_back(dp, s0, 1.0, o).front();
    const State r = propagate(dp, b, 1.0, o);
    CHECK((r.packed() - s0.packed()).norm() < 1e-8);
}

TEST_CASE("random round trip on the double pendulum") {
    const auto dp = models::build_double_pendulum({}, models::Potential::S1);
    FlowOptions o;
    o.dt = default_time_step(71.8138);
    State s0{Vec(2), Vec(2)};
    s0.q << 0.5, -0.4;
    s0.p << 0.2, 0.1;
    const State end = propagate(dp, s0, 1.0, o);
    const State back = flow_back(dp, end, 1.0, o).front();
    CHECK((back.packed() - s0.packed()).norm() < 1e-7);
}

TEST_CASE("implicit midpoint and adaptive cross-check") {
    const auto dp = models::build_double_pendulum({}, models::Potential::S1);
    Vec q(2);
    q << 0.4, 0.3;
    FlowOptions gl;
    gl.dt = default_time_step(71.8138);
    FlowOptions mid = gl;
    mid.method = Method::ImplicitMidpoint;
    mid.dt = gl.dt / 20;
    const State a = propagate(dp, State::at_rest(q), 2.0, gl);
    const State b = propagate(dp, State::at_rest(q), 2.0, mid);
    const auto c = flow_adaptive(dp, State::at_rest(q), 2.0, {});
    CHECK(c.times.back() == 2.0);
    CHECK((a.packed() - c.back().packed()).norm() < 1e-7);
    CHECK((a.packed() - b.packed()).norm() < 1e-3);
}

TEST_CASE("drift budget aborts") {
    const auto dp = models::build_double_pendulum({}, models::Potential::S1);
    Vec q(2);
    q << 2.0, 2.0;
    FlowOptions o;
    o.dt = 0.05;
    o.method = Method::ImplicitMidpoint;
    o.drift_budget = 1e-12;
    try {
        flow(dp, State::at_rest(q), 5.0, o);
        FAIL("expected drift abort");
    } catch (const NumericalError& e) {
        CHECK(e.kind() == "drift");
    }
    CHECK_THROWS_AS(flow(dp, State::at_rest(q), -1.0, o), Error);
    o.dt = 0;
    CHECK_THROWS_AS(flow(dp, State::at_rest(q), 1.0, o), Error);
}

TEST_CASE("fixed step counts and sample stride") {
    const auto sys = oscillator(1.0);
    FlowOptions o;
    o.dt = 1.0;
    o.steps = 40;
    const auto tr = flow(sys, State::at_rest(scalar(1)), 2.0, o);
    CHECK(tr.size() == 41);
    CHECK(tr.times[20] == doctest::Approx(1.0));
    o.steps = 0;
    o.dt = 0.01;
    o.sample_stride = 7;
    const auto sparse = flow(sys, State::at_rest(scalar(1)), 1.0, o);
    CHECK(sparse.times.back() == 1.0);
    CHECK(sparse.size() == 1 + 100 / 7 + 1);
}

TEST_CASE("trajectory csv") {
    const auto sys = oscillator(1.0);
    FlowOptions o;
    o.dt = 0.5;
    const auto tr = flow(sys, State::at_rest(scalar(1)), 1.0, o);
    std::ostringstream os;
    write_trajectory_csv(os, tr);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "t,q1,p1,E");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 3);
}
