#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "filters.hpp"
#include "recipe.hpp"

namespace rsf {

/// One unknown of the linear model: a filter argument restricted to a
/// single branch.
struct ClosedFormVariable {
    std::size_t layer = 0;
    std::size_t arg = 0;
    Branch branch = Branch::NonNegative;
};

struct ClosedFormOptions {
    /// Give temperature one unknown per branch. When false, the branch is
    /// taken from the sign of the recipe's current argument.
    bool split_temperature = true;
    double ridge = 1e-8;
};

struct ClosedFormSolution {
    std::vector<ClosedFormVariable> variables;
    std::vector<double> theta;
    std::vector<double> gram;  ///< row-major, without the ridge term
    std::vector<double> rhs;
    /// max_i |<B_i, target - prediction>|, zero at the exact normal-equation solution.
    double residual_correlation = 0.0;

    /// Argument for (layer, arg) in recipe form. Split temperature returns
    /// whichever branch value is larger in magnitude.
    double argument(std::size_t layer, std::size_t arg) const
    {
        double best = 0.0;
        for (std::size_t i = 0; i < variables.size(); ++i)
            if (variables[i].layer == layer && variables[i].arg == arg && std::abs(theta[i]) >= std::abs(best))
                best = theta[i];
        return best;
    }
};

namespace detail {

/// Solves (A + ridge I) x = b for symmetric A by Cholesky factorization.
inline std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b, std::size_t n, double ridge)
{
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        a[i * n + i] += ridge;
        max_diag = std::max(max_diag, a[i * n + i]);
    }
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k)
            d -= a[j * n + k] * a[j * n + k];
        if (!(d > max_diag * 1e-15))
            throw Error("degenerate basis: Gram matrix is singular even with the ridge term (pivot " +
                        std::to_string(j) + ")");
        const double l = std::sqrt(d);
        a[j * n + j] = l;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k)
                s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / l;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k)
            s -= a[i * n + k] * b[k];
        b[i] = s / a[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k)
            s -= a[k * n + i] * b[k];
        b[i] = s / a[i * n + i];
    }
    return b;
}

} // namespace detail

/// Least-squares arguments for the recipe's layers (masks, kinds, sigma and
/// constants are used; arguments only pick temperature's branch when it is
/// not split). Every increment is linear in its argument on a branch, so the
/// unclamped model is target - input = sum_i theta_i B_i.
inline ClosedFormSolution closed_form_l2(const Image& input, const Image& target, const Recipe& recipe,
                                         const ClosedFormOptions& opts = {})
{
    require_same_size(input, target, "closed_form_l2");
    recipe.constants.validate();
    const FilterContext ctx = FilterContext::of(input);
    ClosedFormSolution sol;
    std::vector<Field3> basis;
    for (std::size_t li = 0; li < recipe.layers.size(); ++li) {
        const Layer& l = recipe.layers[li];
        auto mask = effective_mask(l, input.size(), recipe.smooth_window);
        for (std::size_t ai = 0; ai < l.args.size(); ++ai) {
            const FilterKind kind = l.args[ai].kind;
            std::vector<Branch> branches;
            if (kind == FilterKind::Temperature && opts.split_temperature)
                branches = {Branch::NonNegative, Branch::Negative};
            else
                branches = {branch_of(l.args[ai].theta)};
            for (Branch br : branches) {
                Field3 b(input.width(), input.height());
                for (std::size_t i = 0; i < input.pixel_count(); ++i) {
                    Rgb u = unit_increment(kind, br, pixel_rgb(input, i), ctx.lum.raw()[i], ctx.image_mean,
                                           recipe.constants);
                    const double m = mask ? mask->raw()[i] : 1.0;
                    for (int c = 0; c < 3; ++c)
                        b.raw()[i * 3 + c] = u[c] * m;
                }
                basis.push_back(std::move(b));
                sol.variables.push_back({li, ai, br});
            }
        }
    }
    const std::size_t n = basis.size();
    sol.gram.assign(n * n, 0.0);
    sol.rhs.assign(n, 0.0);
    const auto& x = input.raw();
    const auto& t = target.raw();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& bi = basis[i].raw();
        for (std::size_t j = 0; j <= i; ++j) {
            const auto& bj = basis[j].raw();
            double s = 0.0;
            for (std::size_t k = 0; k < bi.size(); ++k)
                s += bi[k] * bj[k];
            sol.gram[i * n + j] = sol.gram[j * n + i] = s;
        }
        double s = 0.0;
        for (std::size_t k = 0; k < bi.size(); ++k)
            s += bi[k] * (t[k] - x[k]);
        sol.rhs[i] = s;
    }
    sol.theta = n == 0 ? std::vector<double>{} : detail::solve_spd(sol.gram, sol.rhs, n, opts.ridge);

    std::vector<double> residual(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        double pred = x[k];
        for (std::size_t i = 0; i < n; ++i)
            pred += sol.theta[i] * basis[i].raw()[k];
        residual[k] = t[k] - pred;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < residual.size(); ++k)
            s += basis[i].raw()[k] * residual[k];
        sol.residual_correlation = std::max(sol.residual_correlation, std::abs(s));
    }
    return sol;
}

} // namespace rsf
