#include "ouctrl/quadrature.hpp"

#include <map>
#include <mutex>
#include <numbers>

namespace ouctrl::quad {

namespace {

GaussRule build_rule(int n) {
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        // Chebyshev-like initial guess, then Newton on P_n(x) = 0.
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[n - 1 - i] = x;
        rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

} // namespace

const GaussRule& gauss_legendre(int npoints) {
    static std::mutex mtx;
    static std::map<int, GaussRule> cache;
    std::scoped_lock lock(mtx);
    auto it = cache.find(npoints);
    if (it == cache.end()) it = cache.emplace(npoints, build_rule(npoints)).first;
    return it->second;
}

std::vector<std::pair<double, double>> composite_gauss(double a, double b, int panels,
                                                       int per_panel) {
    const GaussRule& rule = gauss_legendre(per_panel);
    std::vector<std::pair<double, double>> grid;
    grid.reserve(static_cast<std::size_t>(panels) * per_panel);
    const double dt = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * dt;
        const double c = lo + 0.5 * dt, h = 0.5 * dt;
        for (int i = 0; i < per_panel; ++i)
            grid.emplace_back(c + h * rule.nodes[i], h * rule.weights[i]);
    }
    return grid;
}

double adaptive(const std::function<double(double)>& f, double a, double b, double abs_tol,
                int max_depth) {
    return adaptive_generic<double>(
        f, a, b, abs_tol, [](double v) { return std::abs(v); }, max_depth);
}

} // namespace ouctrl::quad
