#pragma once

#include "ouctrl/flows.hpp"
#include "ouctrl/indicator.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace ouctrl {

enum class FlowOrientation {
    Forward,   // omega(t) = e^{tB} omega
    Reduction, // omega(t) = e^{(T-t)B} omega
};

// Time-indexed measurable family omega(t) on [0, T] given by an indicator
// predicate and a flow/dilation action. Membership is exact up to the
// matrix-exponential accuracy of the flow.
class MovingSupport {
public:
    enum class Kind { Fixed, FlowPushforward, Dilating, ExplicitFamily };

    static MovingSupport fixed(Indicator base, int dim, double horizon);
    static MovingSupport flow(Indicator base, Matrix b, FlowOrientation orientation,
                              double horizon);
    // omega(t) = sqrt(1 + 2 mu t) * omega
    static MovingSupport dilating(Indicator base, double mu, int dim, double horizon);
    static MovingSupport explicit_family(std::function<Indicator(double)> family, int dim,
                                         double horizon);

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }
    double horizon() const { return horizon_; }

    bool contains(double t, const double* x) const;
    bool contains(double t, const Vector& x) const { return contains(t, x.data()); }
    Indicator at(double t) const; // snapshot indicator for mask building

private:
    Kind kind_ = Kind::Fixed;
    int dim_ = 1;
    double horizon_ = 0.0;
    Indicator base_ = Indicator::none();
    Matrix b_;
    FlowOrientation orientation_ = FlowOrientation::Forward;
    double mu_ = 0.0;
    std::function<Indicator(double)> family_;
};

// volume of the Euclidean r-ball
double ball_volume(int dim, double r);

struct ThicknessEstimate {
    Vector center;
    double radius = 0.0;
    double value = 0.0;   // (1/T) int Leb(omega(t) cap B(x,r)) dt / V_r, in [0,1]
    double std_err = 0.0; // stratified MC standard error
    long samples = 0;
    std::uint64_t seed = 0;
};

// Stratified Monte Carlo over (t, y) in [0,T] x B(x, r): uniform t within
// equal time strata, polar-uniform y in the ball, center-relative offsets so
// fixed-support estimates are exactly translation equivariant. Deterministic
// given the seed.
ThicknessEstimate thickness_at(const MovingSupport& sup, const Vector& center, double radius,
                               long samples, std::uint64_t seed, int time_strata = 64);

struct ThicknessProfile {
    std::vector<ThicknessEstimate> entries;
    int argmin = -1;
    double min_value = 0.0;
};

ThicknessProfile thickness_profile(const MovingSupport& sup, double radius,
                                   const std::vector<Vector>& centers, long samples,
                                   std::uint64_t seed, int threads = 1);

// Bisection (tolerance tol on T) for the smallest horizon at which the
// min-over-centers unnormalized integral crosses gamma_floor * T * V_r.
// Returns t_lo when the condition already holds at the lower bracket.
double threshold_bisect(const std::function<MovingSupport(double)>& family,
                        const std::function<std::vector<Vector>(double)>& schedule,
                        double radius, double gamma_floor, double t_lo, double t_hi,
                        long samples, std::uint64_t seed, double tol = 1e-2,
                        int threads = 1);

struct TimespaceThickening {
    double t_gamma = 0.0;
    std::function<bool(double, const Vector&)> omega_big;
    struct Row {
        Vector center;
        double integral_estimate = 0.0; // Leb(Omega cap [0,T_gamma] x B(x,r))
        double lower_bound = 0.0;       // (gamma/2) T V_r
        double std_err = 0.0;
        bool satisfied = false;
    };
    std::vector<Row> verification;
};

// T_gamma = (1 - gamma/2) T plus the cylinder-restricted indicator; verifies
// the thickening inequality on the supplied centers by restricted MC.
TimespaceThickening timespace_thicken(const MovingSupport& sup, double gamma,
                                      const std::vector<Vector>& check_centers, double radius,
                                      long samples, std::uint64_t seed);

// Built-in support families
// double cone {|y| < tan(theta0) |x|} under the shear flow e^{tB}, B = [[0,1],[0,0]]
MovingSupport translation_cone_support(double theta0, double horizon,
                                       FlowOrientation orientation);
// cone {0 < y/x < tan(theta0)} under the rotation flow, B = [[0,1],[-1,0]]
MovingSupport rotation_cone_support(double theta0, double horizon,
                                    FlowOrientation orientation);
// dilating sparse interval family sqrt(1 + 2 mu t) * ([-1,1] u (k^2, k^2+k) u ...)
MovingSupport dilating_interval_support(double mu, double horizon);

// deterministic sub-seed for an indexed sub-task
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

} // namespace ouctrl
