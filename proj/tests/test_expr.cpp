#include "modalkit/expr.hpp"

#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

using namespace modalkit;
using namespace modalkit::expr;

namespace {

const std::vector<std::string> q12 = {"q1", "q2"};

double at(const Expr& e, double a, double b) {
    const double v[] = {a, b};
    return e.eval(v);
}

} // namespace

TEST_CASE("shifted quadratic vanishes at its center") {
    const Expr e = parse("0.5*k*(q2-pi/2)^2", q12, {{"k", 10.0}});
    CHECK(std::abs(at(e, 0.3, std::numbers::pi / 2)) < 1e-15);
    CHECK(at(e, 0.0, 0.0) == doctest::Approx(5.0 * std::numbers::pi * std::numbers::pi / 4));
}

TEST_CASE("double pendulum gravity term at the origin") {
    const Expr e = parse("-d*m*g*(2*cos(q1)+cos(q1+q2))", q12, {{"d", 1.0}, {"m", 0.4}, {"g", 9.81}});
    CHECK(at(e, 0, 0) == doctest::Approx(-11.772).epsilon(1e-12));
}

TEST_CASE("syntax errors carry the offset") {
    try {
        parse("q1+", q12);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 3);
        CHECK(std::string(e.what()).find("offset 3") != std::string::npos);
    }
    CHECK_THROWS_AS(parse("q3", q12), ParseError);
    CHECK_THROWS_AS(parse("sin(q1, q2)", q12), ParseError);
    CHECK_THROWS_AS(parse("foo(q1)", q12), ParseError);
    CHECK_THROWS_AS(parse("(q1", q12), ParseError);
    CHECK_THROWS_AS(parse("", q12), ParseError);
    CHECK_THROWS_AS(parse("q1 q2", q12), ParseError);
}

TEST_CASE("operator precedence and associativity") {
    CHECK(at(parse("2^3^2", q12), 0, 0) == doctest::Approx(512));
    CHECK(at(parse("-2^2", q12), 0, 0) == doctest::Approx(-4));
    CHECK(at(parse("2*3+4*5", q12), 0, 0) == doctest::Approx(26));
    CHECK(at(parse("8/4/2", q12), 0, 0) == doctest::Approx(1));
    CHECK(at(parse("1-2-3", q12), 0, 0) == doctest::Approx(-4));
    CHECK(at(parse("2^-1", q12), 0, 0) == doctest::Approx(0.5));
    CHECK(at(parse("1.5e2 + .5", q12), 0, 0) == doctest::Approx(150.5));
    CHECK(at(parse("sqrt(abs(q1)) + exp(0) + log(exp(q2))", q12), -4, 3) == doctest::Approx(6));
}

TEST_CASE("round trip parse -> unparse -> parse is stable") {
    std::mt19937 rng(11);
    const char* sources[] = {
        "0.5*k*(q2-pi/2)^2",
        "-d*m*g*(2*cos(q1)+cos(q1+q2))",
        "q1 - (q2 - q1) - -q2",
        "q1/(q2*q1)/2",
        "(q1^2)^3 + q1^(2^3) + (-q1)^2",
        "-(q1+q2)*sin(-q1)",
        "0.1 + 1e-300*q1 + 123456789.123456789",
        "exp(-q1^2/2)/sqrt(2*pi)",
    };
    for (const char* s : sources) {
        const Expr a = parse(s, q12, {{"k", 10}, {"d", 1}, {"m", 0.4}, {"g", 9.81}});
        const Expr b = parse(a.to_string(), q12, {{"k", 10}, {"d", 1}, {"m", 0.4}, {"g", 9.81}});
        CHECK_MESSAGE(a == b, s, " -> ", a.to_string());
        CHECK(b.to_string() == a.to_string());
        std::uniform_real_distribution<double> u(0.2, 2.0);
        for (int i = 0; i < 5; ++i) {
            const double x = u(rng), y = u(rng);
            CHECK(at(a, x, y) == at(b, x, y));
        }
    }
}

TEST_CASE("random trees round trip") {
    std::mt19937 rng(3);
    std::uniform_int_distribution<int> pick(0, 9);
    std::uniform_real_distribution<double> num(-3, 3);
    std::function<Expr(int)> gen = [&](int depth) -> Expr {
        const int c = depth == 0 ? pick(rng) % 3 : pick(rng);
        switch (c) {
        case 0: return Expr::number(std::round(num(rng) * 100) / 100 + 0.0);
        case 1: return Expr::variable(0, "q1");
        case 2: return Expr::variable(1, "q2");
        case 3: return Expr::unary(Op::Neg, gen(depth - 1));
        case 4: return Expr::binary(Op::Add, gen(depth - 1), gen(depth - 1));
        case 5: return Expr::binary(Op::Sub, gen(depth - 1), gen(depth - 1));
        case 6: return Expr::binary(Op::Mul, gen(depth - 1), gen(depth - 1));
        case 7: return Expr::binary(Op::Div, gen(depth - 1), gen(depth - 1));
        case 8: return Expr::binary(Op::Pow, gen(depth - 1), Expr::number(2));
        default: return Expr::call(Func::Cos, gen(depth - 1));
        }
    };
    for (int i = 0; i < 300; ++i) {
        const Expr a = gen(4);
        const Expr b = parse(a.to_string(), q12);
        const Expr c = parse(b.to_string(), q12);
        CHECK_MESSAGE(b == c, a.to_string());
    }
}

TEST_CASE("symbolic derivatives match central differences") {
    const Expr e = parse("sin(q1)*q2^3 + exp(q1*q2)/(1+q2^2) + sqrt(q1^2+1) + log(2+cos(q2))", q12);
    const auto d1 = e.derivative(0);
    const auto d2 = e.derivative(1);
    REQUIRE(d1);
    REQUIRE(d2);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int i = 0; i < 100; ++i) {
        const double x = u(rng), y = u(rng), h = 1e-6;
        const double f1 = (at(e, x + h, y) - at(e, x - h, y)) / (2 * h);
        const double f2 = (at(e, x, y + h) - at(e, x, y - h)) / (2 * h);
        CHECK(at(*d1, x, y) == doctest::Approx(f1).epsilon(1e-6));
        CHECK(at(*d2, x, y) == doctest::Approx(f2).epsilon(1e-6));
    }
    CHECK_FALSE(parse("abs(q1)", q12).derivative(0).has_value());
    CHECK(parse("abs(k)", q12, {{"k", -2}}).derivative(0)->is_number(0.0));
}

TEST_CASE("compiled programs agree with tree evaluation") {
    const Expr e = parse("-d*m*g*(2*cos(q1)+cos(q1+q2)) + 0.5*k*(q1^2+q2^2) - q1/q2",
                         q12, {{"d", 1}, {"m", 0.4}, {"g", 9.81}, {"k", 10}});
    const Program p(e);
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> u(0.1, 3);
    for (int i = 0; i < 50; ++i) {
        const double v[] = {u(rng), u(rng)};
        CHECK(p(v) == e.eval(v));
    }
}

TEST_CASE("constants and numbers") {
    const Expr e = parse("pi*k", q12, {{"k", 2}});
    CHECK(e.is_constant());
    CHECK_FALSE(parse("q1", q12).is_constant());
    CHECK(parse("q1", q12).op() == Op::Variable);
    CHECK(at(e, 0, 0) == doctest::Approx(2 * std::numbers::pi));
}
