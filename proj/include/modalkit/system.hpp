#pragma once

#include "modalkit/common.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace modalkit {

/// Conservative mechanical system on a chart of R^n: inertia tensor M(q) and
/// potential V(q). Derivatives that are not supplied are evaluated by central
/// finite differences. Instances are immutable and safe to share between
/// threads.
class MechSystem {
public:
    using ScalarFn = std::function<double(const Vec&)>;
    using VectorFn = std::function<Vec(const Vec&)>;
    using MatrixFn = std::function<Mat(const Vec&)>;
    using PartialsFn = std::function<std::vector<Mat>(const Vec&)>;

    struct Definition {
        std::string name;
        int dof = 0;
        std::map<std::string, double> params;
        MatrixFn inertia;
        ScalarFn potential;
        VectorFn grad_potential;       ///< optional
        MatrixFn hess_potential;       ///< optional
        PartialsFn inertia_partials;   ///< optional, one n x n matrix per coordinate
        bool constant_inertia = false;
    };

    explicit MechSystem(Definition def);

    int dof() const { return def_.dof; }
    const std::string& name() const { return def_.name; }
    const std::map<std::string, double>& params() const { return def_.params; }

    double potential(const Vec& q) const { return def_.potential(q); }
    Mat inertia(const Vec& q) const { return def_.inertia(q); }
    Vec grad_potential(const Vec& q) const;
    Mat hess_potential(const Vec& q) const;
    std::vector<Mat> inertia_partials(const Vec& q) const;

    bool has_analytic_gradient() const { return static_cast<bool>(def_.grad_potential); }
    bool has_analytic_hessian() const { return static_cast<bool>(def_.hess_potential); }
    bool has_analytic_inertia_partials() const {
        return def_.constant_inertia || static_cast<bool>(def_.inertia_partials);
    }
    bool constant_inertia() const { return def_.constant_inertia; }

private:
    Definition def_;
};

/// V(q); throws NumericalError on non-finite input or result.
double eval_potential(const MechSystem& sys, const Vec& q);

/// M(q) after checking symmetry (1e-12 relative) and positive definiteness.
/// Throws NumericalError naming the offending eigenvalue.
Mat eval_inertia(const MechSystem& sys, const Vec& q);

/// Central differences with h_i = max(1e-6, 1e-6 |q_i|).
Vec fd_gradient(const MechSystem& sys, const Vec& q);
std::vector<Mat> fd_inertia_partials(const MechSystem& sys, const Vec& q);

/// Hessian of V by central differences: of the gradient when it is analytic
/// (step 1e-5), otherwise second differences of V (step 1e-4).
Mat fd_hessian(const MechSystem& sys, const Vec& q);

/// Coordinate names q1..qn used by expression-defined systems.
std::vector<std::string> coordinate_names(int n);

/// System whose V and M entries are expression strings over q1..qn. Gradient,
/// Hessian and inertia partials are derived symbolically where possible.
MechSystem make_expression_system(std::string name, int n, const std::string& v_expr,
                                  const std::vector<std::vector<std::string>>& m_expr,
                                  const std::map<std::string, double>& params);

} // namespace modalkit
