#include "modalkit/system.hpp"

#include "modalkit/expr.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <memory>
#include <sstream>

namespace modalkit {

namespace {

double fd_step(double qi) { return std::max(1e-6, 1e-6 * std::abs(qi)); }

} // namespace

MechSystem::MechSystem(Definition def) : def_(std::move(def)) {
    if (def_.dof <= 0) throw Error("system", "system '" + def_.name + "' needs a positive dof");
    if (!def_.inertia || !def_.potential)
        throw Error("system", "system '" + def_.name + "' needs inertia and potential");
}

Vec MechSystem::grad_potential(const Vec& q) const {
    if (def_.grad_potential) return def_.grad_potential(q);
    return fd_gradient(*this, q);
}

Mat MechSystem::hess_potential(const Vec& q) const {
    if (def_.hess_potential) return def_.hess_potential(q);
    return fd_hessian(*this, q);
}

std::vector<Mat> MechSystem::inertia_partials(const Vec& q) const {
    if (def_.constant_inertia) return std::vector<Mat>(dof(), Mat::Zero(dof(), dof()));
    if (def_.inertia_partials) return def_.inertia_partials(q);
    return fd_inertia_partials(*this, q);
}

double eval_potential(const MechSystem& sys, const Vec& q) {
    if (q.size() != sys.dof()) throw Error("dimension", "configuration has wrong dimension");
    if (!all_finite(q)) throw NumericalError("nonfinite", "non-finite configuration");
    const double v = sys.potential(q);
    if (!std::isfinite(v)) throw NumericalError("nonfinite", "potential is not finite");
    return v;
}

Mat eval_inertia(const MechSystem& sys, const Vec& q) {
    if (q.size() != sys.dof()) throw Error("dimension", "configuration has wrong dimension");
    if (!all_finite(q)) throw NumericalError("nonfinite", "non-finite configuration");
    Mat m = sys.inertia(q);
    if (!m.allFinite()) throw NumericalError("nonfinite", "inertia is not finite");
    const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw NumericalError("inertia", "inertia tensor is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    if (!(lo > 0.0)) {
        std::ostringstream os;
        os.precision(17);
        os << "inertia tensor is not positive definite (eigenvalue " << lo << ")";
        throw NumericalError("inertia", os.str());
    }
    return m;
}

Vec fd_gradient(const MechSystem& sys, const Vec& q) {
    Vec g(q.size());
    Vec x = q;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        const double h = fd_step(q[i]);
        x[i] = q[i] + h;
        const double fp = sys.potential(x);
        x[i] = q[i] - h;
        const double fm = sys.potential(x);
        x[i] = q[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

std::vector<Mat> fd_inertia_partials(const MechSystem& sys, const Vec& q) {
    std::vector<Mat> out;
    out.reserve(q.size());
    Vec x = q;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        const double h = fd_step(q[i]);
        x[i] = q[i] + h;
        Mat mp = sys.inertia(x);
        x[i] = q[i] - h;
        Mat mm = sys.inertia(x);
        x[i] = q[i];
        out.push_back((mp - mm) / (2.0 * h));
    }
    return out;
}

Mat fd_hessian(const MechSystem& sys, const Vec& q) {
    const Eigen::Index n = q.size();
    Mat h(n, n);
    Vec x = q;
    if (sys.has_analytic_gradient()) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double s = 1e-5 * std::max(1.0, std::abs(q[j]));
            x[j] = q[j] + s;
            Vec gp = sys.grad_potential(x);
            x[j] = q[j] - s;
            Vec gm = sys.grad_potential(x);
            x[j] = q[j];
            h.col(j) = (gp - gm) / (2.0 * s);
        }
    } else {
        const double f0 = sys.potential(q);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double si = 1e-4 * std::max(1.0, std::abs(q[i]));
            for (Eigen::Index j = i; j < n; ++j) {
                const double sj = 1e-4 * std::max(1.0, std::abs(q[j]));
                if (i == j) {
                    x[i] = q[i] + si;
                    const double fp = sys.potential(x);
                    x[i] = q[i] - si;
                    const double fm = sys.potential(x);
                    x[i] = q[i];
                    h(i, i) = (fp - 2.0 * f0 + fm) / (si * si);
                    continue;
                }
                auto at = [&](double a, double b) {
                    x[i] = q[i] + a;
                    x[j] = q[j] + b;
                    const double v = sys.potential(x);
                    x[i] = q[i];
                    x[j] = q[j];
                    return v;
                };
                h(i, j) = (at(si, sj) - at(si, -sj) - at(-si, sj) + at(-si, -sj)) / (4.0 * si * sj);
                h(j, i) = h(i, j);
            }
        }
    }
    return 0.5 * (h + h.transpose());
}

std::vector<std::string> coordinate_names(int n) {
    std::vector<std::string> names;
    for (int i = 1; i <= n; ++i) names.push_back("q" + std::to_string(i));
    return names;
}

MechSystem make_expression_system(std::string name, int n, const std::string& v_expr,
                                  const std::vector<std::vector<std::string>>& m_expr,
                                  const std::map<std::string, double>& params) {
    using expr::Expr;
    using expr::Program;

    if (n <= 0) throw ParseError("\"n\" must be positive");
    if (static_cast<int>(m_expr.size()) != n)
        throw ParseError("\"M_expr\" must have n rows");
    const auto vars = coordinate_names(n);

    const Expr v = expr::parse(v_expr, vars, params);
    std::vector<std::vector<Expr>> m(n);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(m_expr[i].size()) != n)
            throw ParseError("\"M_expr\" row " + std::to_string(i + 1) + " must have n entries");
        for (int j = 0; j < n; ++j) m[i].push_back(expr::parse(m_expr[i][j], vars, params));
    }

    struct Compiled {
        int n;
        Program v;
        std::vector<Program> grad;
        std::vector<Program> hess;  // row-major
        std::vector<Program> m;     // row-major
        std::vector<Program> dm;    // [k][i][j]
    };
    auto c = std::make_shared<Compiled>();
    c->n = n;
    c->v = Program(v);

    bool grad_ok = true;
    bool hess_ok = true;
    std::vector<Expr> grads;
    for (int i = 0; i < n && grad_ok; ++i) {
        auto d = v.derivative(i);
        if (!d) grad_ok = false;
        else grads.push_back(*d);
    }
    if (grad_ok) {
        for (const auto& g : grads) c->grad.emplace_back(g);
        for (int i = 0; i < n && hess_ok; ++i)
            for (int j = 0; j < n && hess_ok; ++j) {
                auto d = grads[i].derivative(j);
                if (!d) hess_ok = false;
                else c->hess.emplace_back(*d);
            }
    }

    bool constant_m = true;
    bool dm_ok = true;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            c->m.emplace_back(m[i][j]);
            constant_m = constant_m && m[i][j].is_constant();
        }
    if (!constant_m) {
        c->dm.reserve(n * n * n);
        for (int k = 0; k < n && dm_ok; ++k)
            for (int i = 0; i < n && dm_ok; ++i)
                for (int j = 0; j < n && dm_ok; ++j) {
                    auto d = m[i][j].derivative(k);
                    if (!d) dm_ok = false;
                    else c->dm.emplace_back(*d);
                }
    }

    auto span_of = [](const Vec& q) { return std::span<const double>(q.data(), q.size()); };

    MechSystem::Definition def;
    def.name = std::move(name);
    def.dof = n;
    def.params = params;
    def.constant_inertia = constant_m;
    def.potential = [c, span_of](const Vec& q) { return c->v(span_of(q)); };
    def.inertia = [c, span_of](const Vec& q) {
        Mat out(c->n, c->n);
        for (int i = 0; i < c->n; ++i)
            for (int j = 0; j < c->n; ++j) out(i, j) = c->m[i * c->n + j](span_of(q));
        return out;
    };
    if (grad_ok) {
        def.grad_potential = [c, span_of](const Vec& q) {
            Vec g(c->n);
            for (int i = 0; i < c->n; ++i) g[i] = c->grad[i](span_of(q));
            return g;
        };
    }
    if (grad_ok && hess_ok) {
        def.hess_potential = [c, span_of](const Vec& q) {
            Mat h(c->n, c->n);
            for (int i = 0; i < c->n; ++i)
                for (int j = 0; j < c->n; ++j) h(i, j) = c->hess[i * c->n + j](span_of(q));
            return Mat(0.5 * (h + h.transpose()));
        };
    }
    if (!constant_m && dm_ok) {
        def.inertia_partials = [c, span_of](const Vec& q) {
            const int n = c->n;
            std::vector<Mat> out(n, Mat(n, n));
            for (int k = 0; k < n; ++k)
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) out[k](i, j) = c->dm[(k * n + i) * n + j](span_of(q));
            return out;
        };
    }
    return MechSystem(std::move(def));
}

} // namespace modalkit
