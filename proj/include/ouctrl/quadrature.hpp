#pragma once

#include "ouctrl/errors.hpp"

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

namespace ouctrl::quad {

// Gauss-Legendre rule on [-1, 1]. Nodes/weights are computed once by Newton
// iteration on the Legendre recurrence (accurate to ~1 ulp) and cached.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

const GaussRule& gauss_legendre(int npoints);

// Composite Gauss-Legendre grid on [a, b]: `panels` panels of a
// `per_panel`-point rule. Returns (node, weight) pairs in ascending order;
// weights are positive and sum to b - a.
std::vector<std::pair<double, double>> composite_gauss(double a, double b, int panels,
                                                       int per_panel = 4);

// Adaptive bisection with a 15-point panel rule; the error estimate compares
// a panel against its two halves. Works for any value type with axpy-style
// arithmetic; `norm` maps a value to the scalar used against abs_tol.
template <class Value, class F, class Norm>
Value adaptive_generic(const F& f, double a, double b, double abs_tol, const Norm& norm,
                       int max_depth = 40) {
    const GaussRule& rule = gauss_legendre(15);
    auto panel = [&](double lo, double hi) {
        const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
        Value acc = f(c + h * rule.nodes[0]) * (h * rule.weights[0]);
        for (int i = 1; i < 15; ++i) acc += f(c + h * rule.nodes[i]) * (h * rule.weights[i]);
        return acc;
    };
    struct Frame {
        double lo, hi, tol;
        Value whole;
        int depth;
    };
    Value first = panel(a, b);
    Value total = first * 0.0;
    std::vector<Frame> stack;
    stack.push_back({a, b, abs_tol, std::move(first), 0});
    while (!stack.empty()) {
        Frame fr = std::move(stack.back());
        stack.pop_back();
        const double mid = 0.5 * (fr.lo + fr.hi);
        Value left = panel(fr.lo, mid);
        Value right = panel(mid, fr.hi);
        Value sum = left + right;
        if (norm(sum - fr.whole) <= fr.tol || fr.hi - fr.lo <= 1e-300) {
            total += sum;
            continue;
        }
        if (fr.depth >= max_depth)
            throw QuadratureFailure("adaptive quadrature exceeded depth " +
                                    std::to_string(max_depth));
        stack.push_back({fr.lo, mid, 0.5 * fr.tol, std::move(left), fr.depth + 1});
        stack.push_back({mid, fr.hi, 0.5 * fr.tol, std::move(right), fr.depth + 1});
    }
    return total;
}

double adaptive(const std::function<double(double)>& f, double a, double b, double abs_tol,
                int max_depth = 40);

} // namespace ouctrl::quad
