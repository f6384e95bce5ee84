#include "ouctrl/indicator.hpp"

#include <cmath>

namespace ouctrl {

struct Indicator::Node {
    enum class Kind {
        All,
        None,
        Halfspace,
        Ball,
        LineCone,
        IntervalUnion,
        PeriodicIntervals,
        SparseQuadratic,
        LinearPullback,
        Scaled,
        Translated,
        Union,
        Intersection,
        Complement,
    } kind;

    // geometric payloads
    Vector vec;
    double a = 0.0, b = 0.0, c = 0.0;
    Matrix mat;
    std::vector<std::pair<double, double>> intervals;
    std::vector<std::shared_ptr<const Node>> children;

    bool contains(const double* x, int n) const {
        switch (kind) {
            case Kind::All:
                return true;
            case Kind::None:
                return false;
            case Kind::Halfspace: {
                double dot = 0.0;
                for (int i = 0; i < n; ++i) dot += vec[i] * x[i];
                return dot >= a;
            }
            case Kind::Ball: {
                double d2 = 0.0;
                for (int i = 0; i < n; ++i) {
                    const double d = x[i] - vec[i];
                    d2 += d * d;
                }
                return d2 <= a * a;
            }
            case Kind::LineCone: {
                if (x[0] == 0.0) return false;
                const double slope = x[1] / x[0];
                return slope > a && slope < b;
            }
            case Kind::IntervalUnion: {
                for (const auto& [lo, hi] : intervals)
                    if (x[0] > lo && x[0] < hi) return true;
                return false;
            }
            case Kind::PeriodicIntervals: {
                double frac = std::fmod(x[0] - c, a);
                if (frac < 0.0) frac += a;
                return frac < b;
            }
            case Kind::SparseQuadratic: {
                const double v = std::abs(x[0]);
                if (v <= 1.0) return true;
                const double k = std::floor(std::sqrt(v));
                return k >= 1.0 && v > k * k && v < k * k + k;
            }
            case Kind::LinearPullback: {
                Vector y = mat * Eigen::Map<const Vector>(x, n);
                return children[0]->contains(y.data(), n);
            }
            case Kind::Scaled: {
                double y[3];
                for (int i = 0; i < n; ++i) y[i] = x[i] / a;
                return children[0]->contains(y, n);
            }
            case Kind::Translated: {
                double y[3];
                for (int i = 0; i < n; ++i) y[i] = x[i] + vec[i];
                return children[0]->contains(y, n);
            }
            case Kind::Union: {
                for (const auto& ch : children)
                    if (ch->contains(x, n)) return true;
                return false;
            }
            case Kind::Intersection: {
                for (const auto& ch : children)
                    if (!ch->contains(x, n)) return false;
                return true;
            }
            case Kind::Complement:
                return !children[0]->contains(x, n);
        }
        return false;
    }
};

namespace {

using Node = Indicator::Node;

std::shared_ptr<Node> make_node(Node::Kind kind) {
    auto node = std::make_shared<Node>();
    node->kind = kind;
    return node;
}

} // namespace

Indicator Indicator::all() { return Indicator(make_node(Node::Kind::All)); }
Indicator Indicator::none() { return Indicator(make_node(Node::Kind::None)); }

Indicator Indicator::halfspace(Vector normal, double offset) {
    auto node = make_node(Node::Kind::Halfspace);
    node->vec = std::move(normal);
    node->a = offset;
    return Indicator(std::move(node));
}

Indicator Indicator::ball(Vector center, double radius) {
    if (!(radius >= 0.0)) throw Error("indicator ball: radius must be nonnegative");
    auto node = make_node(Node::Kind::Ball);
    node->vec = std::move(center);
    node->a = radius;
    return Indicator(std::move(node));
}

Indicator Indicator::line_cone(double alpha_lo, double alpha_hi) {
    if (!(alpha_lo < alpha_hi)) throw Error("indicator line_cone: need alpha_lo < alpha_hi");
    auto node = make_node(Node::Kind::LineCone);
    node->a = alpha_lo;
    node->b = alpha_hi;
    return Indicator(std::move(node));
}

Indicator Indicator::interval_union(std::vector<std::pair<double, double>> intervals) {
    auto node = make_node(Node::Kind::IntervalUnion);
    node->intervals = std::move(intervals);
    return Indicator(std::move(node));
}

Indicator Indicator::periodic_intervals(double period, double width, double offset) {
    if (!(period > 0.0) || !(width > 0.0) || width > period)
        throw Error("indicator periodic_intervals: need 0 < width <= period");
    auto node = make_node(Node::Kind::PeriodicIntervals);
    node->a = period;
    node->b = width;
    node->c = offset;
    return Indicator(std::move(node));
}

Indicator Indicator::sparse_quadratic_intervals() {
    return Indicator(make_node(Node::Kind::SparseQuadratic));
}

Indicator Indicator::linear_pullback(Matrix m, Indicator base) {
    auto node = make_node(Node::Kind::LinearPullback);
    node->mat = std::move(m);
    node->children.push_back(base.node_);
    return Indicator(std::move(node));
}

Indicator Indicator::scaled(double factor, Indicator base) {
    if (!(factor > 0.0)) throw Error("indicator scaled: factor must be positive");
    auto node = make_node(Node::Kind::Scaled);
    node->a = factor;
    node->children.push_back(base.node_);
    return Indicator(std::move(node));
}

Indicator Indicator::translated(Vector shift, Indicator base) {
    auto node = make_node(Node::Kind::Translated);
    node->vec = std::move(shift);
    node->children.push_back(base.node_);
    return Indicator(std::move(node));
}

Indicator Indicator::union_of(std::vector<Indicator> parts) {
    auto node = make_node(Node::Kind::Union);
    for (auto& p : parts) node->children.push_back(p.node_);
    return Indicator(std::move(node));
}

Indicator Indicator::intersection_of(std::vector<Indicator> parts) {
    auto node = make_node(Node::Kind::Intersection);
    for (auto& p : parts) node->children.push_back(p.node_);
    return Indicator(std::move(node));
}

Indicator Indicator::complement(Indicator part) {
    auto node = make_node(Node::Kind::Complement);
    node->children.push_back(part.node_);
    return Indicator(std::move(node));
}

bool Indicator::contains(const double* x, int n) const { return node_->contains(x, n); }

} // namespace ouctrl
