#pragma once

// Small arithmetic expression language used by system definition files.
//
//   expression ::= term { ("+" | "-") term }
//   term       ::= unary { ("*" | "/") unary }
//   unary      ::= "-" unary | power
//   power      ::= primary [ "^" unary ]          (right associative)
//   primary    ::= number | identifier | function "(" expression ")"
//                | "(" expression ")"
//   function   ::= sin | cos | exp | sqrt | abs | log
//
// Identifiers resolve, in order, to declared variables, bound parameters and
// the builtin constant `pi`. Anything else is rejected while parsing.

#include "modalkit/common.hpp"

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace modalkit::expr {

enum class Op { Number, Constant, Variable, Neg, Add, Sub, Mul, Div, Pow, Call };
enum class Func { Sin, Cos, Exp, Sqrt, Abs, Log };

std::string_view func_name(Func f);

/// Immutable expression tree with shared subtrees. Copies are cheap.
class Expr {
public:
    static Expr number(double v);
    /// Named value bound at parse time (a parameter or `pi`).
    static Expr constant(std::string name, double v);
    static Expr variable(std::size_t index, std::string name);
    static Expr unary(Op op, Expr operand);
    static Expr binary(Op op, Expr lhs, Expr rhs);
    static Expr call(Func f, Expr arg);

    Op op() const;
    double value() const;           ///< Number / Constant
    std::size_t var_index() const;  ///< Variable
    const std::string& name() const;
    Func func() const;              ///< Call
    std::size_t arity() const;
    const Expr& child(std::size_t i) const;

    double eval(std::span<const double> vars) const;

    /// Symbolic partial derivative with light simplification. Returns nullopt
    /// when the tree contains a construct without a symbolic rule (`abs`).
    std::optional<Expr> derivative(std::size_t var) const;

    /// True when no Variable node occurs in the tree.
    bool is_constant() const;
    bool is_number(double v) const;

    std::string to_string() const;

    /// Structural equality (numbers compared bitwise-equal by value).
    friend bool operator==(const Expr& a, const Expr& b);

private:
    struct Node;
    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

/// Parse `source` over the variables `vars`; parameter names in `params` are
/// bound to their values. Throws ParseError carrying the byte offset.
Expr parse(std::string_view source, const std::vector<std::string>& vars,
           const std::map<std::string, double>& params = {});

// Simplifying constructors used by differentiation.
Expr add(const Expr& a, const Expr& b);
Expr sub(const Expr& a, const Expr& b);
Expr mul(const Expr& a, const Expr& b);
Expr div(const Expr& a, const Expr& b);
Expr neg(const Expr& a);
Expr pow(const Expr& a, const Expr& b);

/// Flattened postfix form of an Expr for repeated evaluation.
class Program {
public:
    Program() = default;
    explicit Program(const Expr& e);

    double operator()(std::span<const double> vars) const;

private:
    struct Instr {
        Op op;
        Func func;
        double value;
        std::size_t index;
    };
    std::vector<Instr> code_;
    std::size_t max_depth_ = 0;
};

} // namespace modalkit::expr
