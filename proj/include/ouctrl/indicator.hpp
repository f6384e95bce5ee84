#pragma once

#include "ouctrl/flows.hpp"

#include <memory>
#include <utility>
#include <vector>

namespace ouctrl {

// Measurable-by-construction spatial predicate: a finite boolean combination
// of half-spaces, balls, cones, and interval unions, each with exact
// membership. Value type backed by a shared immutable AST.
class Indicator {
public:
    static Indicator all();
    static Indicator none();
    // {x : normal . x >= offset}
    static Indicator halfspace(Vector normal, double offset);
    static Indicator ball(Vector center, double radius);
    // 2-D line cone {(x, y) : x != 0, alpha_lo < y/x < alpha_hi}; this is the
    // double cone of lines through the origin with slopes in (alpha_lo, alpha_hi)
    static Indicator line_cone(double alpha_lo, double alpha_hi);
    // 1-D finite union of open intervals
    static Indicator interval_union(std::vector<std::pair<double, double>> intervals);
    // 1-D lattice: (x - offset) mod period lands in [0, width)
    static Indicator periodic_intervals(double period, double width, double offset = 0.0);
    // 1-D sparse family [-1, 1] together with (k^2, k^2 + k) and its mirror
    // for every k >= 1; relative density decays like 1/sqrt(|x|)
    static Indicator sparse_quadratic_intervals();
    // membership of M x (exact up to the accuracy of M)
    static Indicator linear_pullback(Matrix m, Indicator base);
    static Indicator scaled(double factor, Indicator base); // membership of x / factor
    static Indicator translated(Vector shift, Indicator base); // membership of x + shift
    static Indicator union_of(std::vector<Indicator> parts);
    static Indicator intersection_of(std::vector<Indicator> parts);
    static Indicator complement(Indicator part);

    bool contains(const double* x, int n) const;
    bool contains(const Vector& x) const { return contains(x.data(), static_cast<int>(x.size())); }

    struct Node;

private:
    std::shared_ptr<const Node> node_;
    explicit Indicator(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
};

} // namespace ouctrl
