#include "modalkit/expr.hpp"

#include <charconv>
#include <cmath>
#include <numbers>

namespace modalkit::expr {

struct Expr::Node {
    Op op;
    Func func = Func::Sin;
    double value = 0.0;
    std::size_t index = 0;
    std::string name;
    std::vector<Expr> children;
};

std::string_view func_name(Func f) {
    switch (f) {
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Exp: return "exp";
    case Func::Sqrt: return "sqrt";
    case Func::Abs: return "abs";
    case Func::Log: return "log";
    }
    return "?";
}

namespace {

std::optional<Func> func_from_name(std::string_view s) {
    for (Func f : {Func::Sin, Func::Cos, Func::Exp, Func::Sqrt, Func::Abs, Func::Log})
        if (func_name(f) == s) return f;
    return std::nullopt;
}

double apply(Func f, double x) {
    switch (f) {
    case Func::Sin: return std::sin(x);
    case Func::Cos: return std::cos(x);
    case Func::Exp: return std::exp(x);
    case Func::Sqrt: return std::sqrt(x);
    case Func::Abs: return std::abs(x);
    case Func::Log: return std::log(x);
    }
    return 0.0;
}

double apply(Op op, double a, double b) {
    switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div: return a / b;
    case Op::Pow: return std::pow(a, b);
    default: return 0.0;
    }
}

int precedence(const Expr& e) {
    switch (e.op()) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    case Op::Number: return e.value() < 0 ? 3 : 5;
    default: return 5;
    }
}

std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void unparse(const Expr& e, std::string& out) {
    auto wrapped = [&](const Expr& c, bool parens) {
        if (parens) out += '(';
        unparse(c, out);
        if (parens) out += ')';
    };
    switch (e.op()) {
    case Op::Number: out += format_number(e.value()); return;
    case Op::Constant:
    case Op::Variable: out += e.name(); return;
    case Op::Neg:
        out += '-';
        wrapped(e.child(0), precedence(e.child(0)) < 3);
        return;
    case Op::Call:
        out += func_name(e.func());
        wrapped(e.child(0), true);
        return;
    case Op::Pow:
        wrapped(e.child(0), precedence(e.child(0)) <= 4);
        out += '^';
        wrapped(e.child(1), precedence(e.child(1)) < 3);
        return;
    default: {
        const int p = precedence(e);
        wrapped(e.child(0), precedence(e.child(0)) < p);
        switch (e.op()) {
        case Op::Add: out += " + "; break;
        case Op::Sub: out += " - "; break;
        case Op::Mul: out += "*"; break;
        default: out += "/"; break;
        }
        wrapped(e.child(1), precedence(e.child(1)) <= p);
        return;
    }
    }
}

// ---------------------------------------------------------------------------
// Parser

class Parser {
public:
    Parser(std::string_view src, const std::vector<std::string>& vars,
           const std::map<std::string, double>& params)
        : src_(src), vars_(vars), params_(params) {}

    Expr run() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError("empty expression", 0);
        Expr e = expression();
        skip_ws();
        if (pos_ < src_.size()) throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
        return e;
    }

private:
    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    char peek() {
        skip_ws();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }
    [[noreturn]] void unexpected() {
        if (pos_ >= src_.size()) throw ParseError("unexpected end of input", pos_);
        throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
    }

    Expr expression() {
        Expr lhs = term();
        for (char c = peek(); c == '+' || c == '-'; c = peek()) {
            ++pos_;
            lhs = Expr::binary(c == '+' ? Op::Add : Op::Sub, lhs, term());
        }
        return lhs;
    }

    Expr term() {
        Expr lhs = unary();
        for (char c = peek(); c == '*' || c == '/'; c = peek()) {
            ++pos_;
            lhs = Expr::binary(c == '*' ? Op::Mul : Op::Div, lhs, unary());
        }
        return lhs;
    }

    Expr unary() {
        if (peek() == '-') {
            ++pos_;
            return Expr::unary(Op::Neg, unary());
        }
        return power();
    }

    Expr power() {
        Expr base = primary();
        if (peek() == '^') {
            ++pos_;
            return Expr::binary(Op::Pow, base, unary());
        }
        return base;
    }

    Expr primary() {
        const char c = peek();
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        if (c == '(') {
            ++pos_;
            Expr e = expression();
            if (peek() != ')') unexpected();
            ++pos_;
            return e;
        }
        unexpected();
    }

    Expr number() {
        const std::size_t start = pos_;
        auto digits = [&] {
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        };
        digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            digits();
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t save = pos_++;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                digits();
            else
                pos_ = save;
        }
        double v = 0.0;
        auto res = std::from_chars(src_.data() + start, src_.data() + pos_, v);
        if (res.ec != std::errc() || res.ptr != src_.data() + pos_)
            throw ParseError("malformed number", start);
        return Expr::number(v);
    }

    Expr identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string id(src_.substr(start, pos_ - start));

        if (peek() == '(') {
            auto f = func_from_name(id);
            if (!f) throw ParseError("unknown function '" + id + "'", start);
            ++pos_;
            std::vector<Expr> args;
            if (peek() != ')') {
                args.push_back(expression());
                while (peek() == ',') {
                    ++pos_;
                    args.push_back(expression());
                }
            }
            if (peek() != ')') unexpected();
            ++pos_;
            if (args.size() != 1)
                throw ParseError("function '" + id + "' expects 1 argument, got " +
                                     std::to_string(args.size()),
                                 start);
            return Expr::call(*f, args.front());
        }
        if (func_from_name(id)) throw ParseError("function '" + id + "' used without arguments", start);

        for (std::size_t i = 0; i < vars_.size(); ++i)
            if (vars_[i] == id) return Expr::variable(i, id);
        if (auto it = params_.find(id); it != params_.end()) return Expr::constant(id, it->second);
        if (id == "pi") return Expr::constant(id, std::numbers::pi);
        throw ParseError("unknown identifier '" + id + "'", start);
    }

    std::string_view src_;
    const std::vector<std::string>& vars_;
    const std::map<std::string, double>& params_;
    std::size_t pos_ = 0;
};

} // namespace

// ---------------------------------------------------------------------------
// Expr

Expr Expr::number(double v) {
    auto n = std::make_shared<Node>();
    n->op = Op::Number;
    n->value = v;
    return Expr(std::move(n));
}

Expr Expr::constant(std::string name, double v) {
    auto n = std::make_shared<Node>();
    n->op = Op::Constant;
    n->value = v;
    n->name = std::move(name);
    return Expr(std::move(n));
}

Expr Expr::variable(std::size_t index, std::string name) {
    auto n = std::make_shared<Node>();
    n->op = Op::Variable;
    n->index = index;
    n->name = std::move(name);
    return Expr(std::move(n));
}

Expr Expr::unary(Op op, Expr operand) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->children = {std::move(operand)};
    return Expr(std::move(n));
}

Expr Expr::binary(Op op, Expr lhs, Expr rhs) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->children = {std::move(lhs), std::move(rhs)};
    return Expr(std::move(n));
}

Expr Expr::call(Func f, Expr arg) {
    auto n = std::make_shared<Node>();
    n->op = Op::Call;
    n->func = f;
    n->children = {std::move(arg)};
    return Expr(std::move(n));
}

Op Expr::op() const { return node_->op; }
double Expr::value() const { return node_->value; }
std::size_t Expr::var_index() const { return node_->index; }
const std::string& Expr::name() const { return node_->name; }
Func Expr::func() const { return node_->func; }
std::size_t Expr::arity() const { return node_->children.size(); }
const Expr& Expr::child(std::size_t i) const { return node_->children.at(i); }

double Expr::eval(std::span<const double> vars) const {
    const Node& n = *node_;
    switch (n.op) {
    case Op::Number:
    case Op::Constant: return n.value;
    case Op::Variable: return vars[n.index];
    case Op::Neg: return -n.children[0].eval(vars);
    case Op::Call: return apply(n.func, n.children[0].eval(vars));
    default: return apply(n.op, n.children[0].eval(vars), n.children[1].eval(vars));
    }
}

bool Expr::is_constant() const {
    if (op() == Op::Variable) return false;
    for (const auto& c : node_->children)
        if (!c.is_constant()) return false;
    return true;
}

bool Expr::is_number(double v) const { return op() == Op::Number && value() == v; }

std::string Expr::to_string() const {
    std::string out;
    unparse(*this, out);
    return out;
}

bool operator==(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_) return true;
    const auto& x = *a.node_;
    const auto& y = *b.node_;
    if (x.op != y.op || x.children.size() != y.children.size()) return false;
    switch (x.op) {
    case Op::Number: return x.value == y.value;
    case Op::Constant: return x.name == y.name && x.value == y.value;
    case Op::Variable: return x.index == y.index;
    case Op::Call:
        if (x.func != y.func) return false;
        break;
    default: break;
    }
    for (std::size_t i = 0; i < x.children.size(); ++i)
        if (!(x.children[i] == y.children[i])) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Simplifying constructors

namespace {
bool is_num(const Expr& e) { return e.op() == Op::Number; }
} // namespace

Expr add(const Expr& a, const Expr& b) {
    if (a.is_number(0.0)) return b;
    if (b.is_number(0.0)) return a;
    if (is_num(a) && is_num(b)) return Expr::number(a.value() + b.value());
    if (b.op() == Op::Neg) return sub(a, b.child(0));
    return Expr::binary(Op::Add, a, b);
}

Expr sub(const Expr& a, const Expr& b) {
    if (b.is_number(0.0)) return a;
    if (a.is_number(0.0)) return neg(b);
    if (is_num(a) && is_num(b)) return Expr::number(a.value() - b.value());
    if (b.op() == Op::Neg) return add(a, b.child(0));
    return Expr::binary(Op::Sub, a, b);
}

Expr mul(const Expr& a, const Expr& b) {
    if (a.is_number(0.0) || b.is_number(0.0)) return Expr::number(0.0);
    if (a.is_number(1.0)) return b;
    if (b.is_number(1.0)) return a;
    if (a.is_number(-1.0)) return neg(b);
    if (b.is_number(-1.0)) return neg(a);
    if (is_num(a) && is_num(b)) return Expr::number(a.value() * b.value());
    if (a.op() == Op::Neg) return neg(mul(a.child(0), b));
    if (b.op() == Op::Neg) return neg(mul(a, b.child(0)));
    return Expr::binary(Op::Mul, a, b);
}

Expr div(const Expr& a, const Expr& b) {
    if (a.is_number(0.0)) return Expr::number(0.0);
    if (b.is_number(1.0)) return a;
    if (is_num(a) && is_num(b) && b.value() != 0.0) return Expr::number(a.value() / b.value());
    return Expr::binary(Op::Div, a, b);
}

Expr neg(const Expr& a) {
    if (is_num(a)) return Expr::number(-a.value());
    if (a.op() == Op::Neg) return a.child(0);
    return Expr::unary(Op::Neg, a);
}

Expr pow(const Expr& a, const Expr& b) {
    if (b.is_number(0.0)) return Expr::number(1.0);
    if (b.is_number(1.0)) return a;
    if (is_num(a) && is_num(b)) return Expr::number(std::pow(a.value(), b.value()));
    return Expr::binary(Op::Pow, a, b);
}

std::optional<Expr> Expr::derivative(std::size_t var) const {
    if (is_constant()) return Expr::number(0.0);
    switch (op()) {
    case Op::Variable: return Expr::number(var_index() == var ? 1.0 : 0.0);
    case Op::Neg: {
        auto d = child(0).derivative(var);
        if (!d) return std::nullopt;
        return neg(*d);
    }
    case Op::Call: {
        const Expr& u = child(0);
        auto du = u.derivative(var);
        if (!du) return std::nullopt;
        switch (func()) {
        case Func::Sin: return mul(Expr::call(Func::Cos, u), *du);
        case Func::Cos: return neg(mul(Expr::call(Func::Sin, u), *du));
        case Func::Exp: return mul(*this, *du);
        case Func::Sqrt: return div(*du, mul(Expr::number(2.0), *this));
        case Func::Log: return div(*du, u);
        case Func::Abs: return std::nullopt;
        }
        return std::nullopt;
    }
    default: break;
    }

    const Expr& a = child(0);
    const Expr& b = child(1);
    auto da = a.derivative(var);
    auto db = b.derivative(var);
    if (!da || !db) return std::nullopt;
    switch (op()) {
    case Op::Add: return add(*da, *db);
    case Op::Sub: return sub(*da, *db);
    case Op::Mul: return add(mul(*da, b), mul(a, *db));
    case Op::Div: return div(sub(mul(*da, b), mul(a, *db)), pow(b, Expr::number(2.0)));
    case Op::Pow:
        if (b.is_constant()) {
            // d(u^c) = c u^(c-1) du
            Expr c_minus_1 = is_num(b) ? Expr::number(b.value() - 1.0) : sub(b, Expr::number(1.0));
            return mul(mul(b, pow(a, c_minus_1)), *da);
        }
        // d(u^v) = u^v (dv log u + v du / u)
        return mul(*this, add(mul(*db, Expr::call(Func::Log, a)), div(mul(b, *da), a)));
    default: return std::nullopt;
    }
}

Expr parse(std::string_view source, const std::vector<std::string>& vars,
           const std::map<std::string, double>& params) {
    return Parser(source, vars, params).run();
}

// ---------------------------------------------------------------------------
// Program

namespace {
void emit(const Expr& e, std::vector<std::pair<Expr, int>>& order) {
    for (std::size_t i = 0; i < e.arity(); ++i) emit(e.child(i), order);
    order.emplace_back(e, 0);
}
} // namespace

Program::Program(const Expr& e) {
    std::vector<std::pair<Expr, int>> order;
    emit(e, order);
    std::size_t depth = 0;
    for (const auto& [node, _] : order) {
        Instr in{node.op(), Func::Sin, 0.0, 0};
        switch (node.op()) {
        case Op::Number:
        case Op::Constant:
            in.op = Op::Number;
            in.value = node.value();
            ++depth;
            break;
        case Op::Variable:
            in.index = node.var_index();
            ++depth;
            break;
        case Op::Call: in.func = node.func(); break;
        case Op::Neg: break;
        default: --depth; break;
        }
        max_depth_ = std::max(max_depth_, depth);
        code_.push_back(in);
    }
}

double Program::operator()(std::span<const double> vars) const {
    constexpr std::size_t kInline = 64;
    double inline_stack[kInline];
    std::vector<double> heap;
    double* stack = inline_stack;
    if (max_depth_ > kInline) {
        heap.resize(max_depth_);
        stack = heap.data();
    }
    std::size_t top = 0;
    for (const Instr& in : code_) {
        switch (in.op) {
        case Op::Number: stack[top++] = in.value; break;
        case Op::Variable: stack[top++] = vars[in.index]; break;
        case Op::Neg: stack[top - 1] = -stack[top - 1]; break;
        case Op::Call: stack[top - 1] = apply(in.func, stack[top - 1]); break;
        default:
            --top;
            stack[top - 1] = apply(in.op, stack[top - 1], stack[top]);
            break;
        }
    }
    return top == 0 ? 0.0 : stack[0];
}

} // namespace modalkit::expr
