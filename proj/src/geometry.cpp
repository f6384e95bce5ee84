#include "ouctrl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>

namespace ouctrl {

MovingSupport MovingSupport::fixed(Indicator base, int dim, double horizon) {
    MovingSupport sup;
    sup.kind_ = Kind::Fixed;
    sup.dim_ = dim;
    sup.horizon_ = horizon;
    sup.base_ = std::move(base);
    return sup;
}

MovingSupport MovingSupport::flow(Indicator base, Matrix b, FlowOrientation orientation,
                                  double horizon) {
    MovingSupport sup;
    sup.kind_ = Kind::FlowPushforward;
    sup.dim_ = static_cast<int>(b.rows());
    sup.horizon_ = horizon;
    sup.base_ = std::move(base);
    sup.b_ = std::move(b);
    sup.orientation_ = orientation;
    return sup;
}

MovingSupport MovingSupport::dilating(Indicator base, double mu, int dim, double horizon) {
    if (!(mu > 0.0)) throw Error("dilating support: mu must be positive");
    MovingSupport sup;
    sup.kind_ = Kind::Dilating;
    sup.dim_ = dim;
    sup.horizon_ = horizon;
    sup.base_ = std::move(base);
    sup.mu_ = mu;
    return sup;
}

MovingSupport MovingSupport::explicit_family(std::function<Indicator(double)> family, int dim,
                                             double horizon) {
    MovingSupport sup;
    sup.kind_ = Kind::ExplicitFamily;
    sup.dim_ = dim;
    sup.horizon_ = horizon;
    sup.family_ = std::move(family);
    return sup;
}

bool MovingSupport::contains(double t, const double* x) const {
    switch (kind_) {
        case Kind::Fixed:
            return base_.contains(x, dim_);
        case Kind::FlowPushforward: {
            const double s = orientation_ == FlowOrientation::Forward ? t : horizon_ - t;
            const Matrix inv = matrix_exponential(b_, -s);
            double y[3];
            for (int i = 0; i < dim_; ++i) {
                double acc = 0.0;
                for (int j = 0; j < dim_; ++j) acc += inv(i, j) * x[j];
                y[i] = acc;
            }
            return base_.contains(y, dim_);
        }
        case Kind::Dilating: {
            const double scale = std::sqrt(1.0 + 2.0 * mu_ * t);
            double y[3];
            for (int i = 0; i < dim_; ++i) y[i] = x[i] / scale;
            return base_.contains(y, dim_);
        }
        case Kind::ExplicitFamily:
            return family_(t).contains(x, dim_);
    }
    return false;
}

Indicator MovingSupport::at(double t) const {
    switch (kind_) {
        case Kind::Fixed:
            return base_;
        case Kind::FlowPushforward: {
            const double s = orientation_ == FlowOrientation::Forward ? t : horizon_ - t;
            return Indicator::linear_pullback(matrix_exponential(b_, -s), base_);
        }
        case Kind::Dilating:
            return Indicator::scaled(std::sqrt(1.0 + 2.0 * mu_ * t), base_);
        case Kind::ExplicitFamily:
            return family_(t);
    }
    return Indicator::none();
}

double ball_volume(int dim, double r) {
    switch (dim) {
        case 1:
            return 2.0 * r;
        case 2:
            return std::numbers::pi * r * r;
        case 3:
            return 4.0 / 3.0 * std::numbers::pi * r * r * r;
    }
    throw Error("ball_volume: dimension out of range");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 step on seed + golden-ratio stride
    std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

namespace {

struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed) : state(seed ? seed : 0x853C49E6748FEA9Bull) {}
    std::uint64_t next_u64() {
        // xorshift64*; fixed-width arithmetic keeps streams platform-identical
        std::uint64_t x = state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state = x;
        return x * 0x2545F4914F6CDD1Dull;
    }
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }
    void normal_pair(double& a, double& b) {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        a = mag * std::cos(2.0 * std::numbers::pi * u2);
        b = mag * std::sin(2.0 * std::numbers::pi * u2);
    }
};

// uniform offset in the r-ball around the origin (polar method, exact)
void ball_offset(Rng& rng, int dim, double r, double* out) {
    switch (dim) {
        case 1:
            out[0] = r * (2.0 * rng.uniform() - 1.0);
            return;
        case 2: {
            double g0, g1;
            rng.normal_pair(g0, g1);
            const double norm = std::hypot(g0, g1);
            const double rad = r * std::sqrt(rng.uniform());
            if (norm == 0.0) {
                out[0] = out[1] = 0.0;
                return;
            }
            out[0] = rad * g0 / norm;
            out[1] = rad * g1 / norm;
            return;
        }
        case 3: {
            double g0, g1, g2, g3;
            rng.normal_pair(g0, g1);
            rng.normal_pair(g2, g3);
            const double norm = std::sqrt(g0 * g0 + g1 * g1 + g2 * g2);
            const double rad = r * std::cbrt(rng.uniform());
            if (norm == 0.0) {
                out[0] = out[1] = out[2] = 0.0;
                return;
            }
            out[0] = rad * g0 / norm;
            out[1] = rad * g1 / norm;
            out[2] = rad * g2 / norm;
            return;
        }
    }
    throw Error("ball sampling: dimension out of range");
}

} // namespace

ThicknessEstimate thickness_at(const MovingSupport& sup, const Vector& center, double radius,
                               long samples, std::uint64_t seed, int time_strata) {
    if (!(radius > 0.0)) throw Error("thickness_at: radius must be positive");
    if (samples < 1) throw Error("thickness_at: need at least one sample");
    const int dim = sup.dim();
    const double horizon = sup.horizon();
    const int strata = static_cast<int>(std::min<long>(time_strata, samples));
    Rng rng(mix_seed(seed, 0x7468696Bull));

    double value_acc = 0.0;
    double var_acc = 0.0;
    long total = 0;
    double y[3];
    double offset[3];
    for (int k = 0; k < strata; ++k) {
        const long m = samples / strata + (k < samples % strata ? 1 : 0);
        long hits = 0;
        for (long j = 0; j < m; ++j) {
            const double t = horizon > 0.0 ? horizon * (k + rng.uniform()) / strata : 0.0;
            ball_offset(rng, dim, radius, offset);
            for (int i = 0; i < dim; ++i) y[i] = center[i] + offset[i];
            if (sup.contains(t, y)) ++hits;
        }
        const double p = m > 0 ? static_cast<double>(hits) / m : 0.0;
        value_acc += p;
        if (m > 1) var_acc += p * (1.0 - p) / (m - 1);
        total += m;
    }
    ThicknessEstimate est;
    est.center = center;
    est.radius = radius;
    est.value = value_acc / strata;
    est.std_err = std::sqrt(var_acc) / strata;
    est.samples = total;
    est.seed = seed;
    return est;
}

ThicknessProfile thickness_profile(const MovingSupport& sup, double radius,
                                   const std::vector<Vector>& centers, long samples,
                                   std::uint64_t seed, int threads) {
    if (centers.empty()) throw Error("thickness_profile: empty center list");
    ThicknessProfile profile;
    profile.entries.resize(centers.size());
    const int workers = std::max(1, threads);
    std::vector<std::future<void>> futures;
    const std::size_t chunk = (centers.size() + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(centers.size(), lo + chunk);
        if (lo >= hi) break;
        futures.push_back(std::async(std::launch::async, [&, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i)
                profile.entries[i] =
                    thickness_at(sup, centers[i], radius, samples, mix_seed(seed, i));
        }));
    }
    for (auto& f : futures) f.get();
    profile.argmin = 0;
    profile.min_value = profile.entries[0].value;
    for (std::size_t i = 1; i < profile.entries.size(); ++i) {
        if (profile.entries[i].value < profile.min_value) {
            profile.min_value = profile.entries[i].value;
            profile.argmin = static_cast<int>(i);
        }
    }
    return profile;
}

double threshold_bisect(const std::function<MovingSupport(double)>& family,
                        const std::function<std::vector<Vector>(double)>& schedule,
                        double radius, double gamma_floor, double t_lo, double t_hi,
                        long samples, std::uint64_t seed, double tol, int threads) {
    if (!(t_lo < t_hi)) throw Error("threshold_bisect: need t_lo < t_hi");
    std::uint64_t eval_counter = 0;
    auto holds = [&](double T) {
        auto sup = family(T);
        auto centers = schedule(T);
        auto profile = thickness_profile(sup, radius, centers, samples,
                                         mix_seed(seed, ++eval_counter), threads);
        // min-over-centers unnormalized integral >= gamma_floor * T * V_r
        // reduces to min value >= gamma_floor under the 1/(T V_r) normalization
        return profile.min_value >= gamma_floor;
    };

    if (holds(t_lo)) return t_lo;
    if (!holds(t_hi))
        throw NonMonotoneScenario(
            "threshold_bisect: condition fails at both brackets; no transition in range");

    double lo = t_lo, hi = t_hi;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (holds(mid))
            hi = mid;
        else
            lo = mid;
    }
    const double t_star = 0.5 * (lo + hi);

    // brackets must still disagree after refinement
    if (holds(std::max(t_lo, t_star - 4.0 * tol)) || !holds(std::min(t_hi, t_star + 4.0 * tol)))
        throw NonMonotoneScenario("threshold_bisect: brackets disagree after refinement");
    return t_star;
}

TimespaceThickening timespace_thicken(const MovingSupport& sup, double gamma,
                                      const std::vector<Vector>& check_centers, double radius,
                                      long samples, std::uint64_t seed) {
    if (!(gamma > 0.0) || gamma > 1.0) throw Error("timespace_thicken: gamma must be in (0,1]");
    const double T = sup.horizon();
    TimespaceThickening out;
    out.t_gamma = (1.0 - gamma / 2.0) * T;
    const double t_gamma = out.t_gamma;
    out.omega_big = [sup, t_gamma](double t, const Vector& x) {
        return t >= 0.0 && t <= t_gamma && sup.contains(t, x);
    };

    const double v_r = ball_volume(sup.dim(), radius);
    // restricted-horizon MC gives Leb(Omega cap [0,T_gamma] x B(x,r))
    auto restricted = MovingSupport::explicit_family([sup](double t) { return sup.at(t); },
                                                     sup.dim(), t_gamma);
    for (std::size_t i = 0; i < check_centers.size(); ++i) {
        auto est =
            thickness_at(restricted, check_centers[i], radius, samples, mix_seed(seed, 1000 + i));
        TimespaceThickening::Row row;
        row.center = check_centers[i];
        row.integral_estimate = est.value * t_gamma * v_r;
        row.lower_bound = gamma / 2.0 * T * v_r;
        row.std_err = est.std_err * t_gamma * v_r;
        row.satisfied = row.integral_estimate >= row.lower_bound - 3.0 * row.std_err;
        out.verification.push_back(std::move(row));
    }
    return out;
}

MovingSupport translation_cone_support(double theta0, double horizon,
                                       FlowOrientation orientation) {
    if (!(theta0 > 0.0) || theta0 >= std::numbers::pi / 2)
        throw Error("translation cone: theta0 must lie in (0, pi/2)");
    Matrix b(2, 2);
    b << 0, 1, 0, 0;
    const double slope = std::tan(theta0);
    return MovingSupport::flow(Indicator::line_cone(-slope, slope), b, orientation, horizon);
}

MovingSupport rotation_cone_support(double theta0, double horizon,
                                    FlowOrientation orientation) {
    if (!(theta0 > 0.0) || theta0 >= std::numbers::pi / 4)
        throw Error("rotation cone: theta0 must lie in (0, pi/4)");
    Matrix b(2, 2);
    b << 0, 1, -1, 0;
    return MovingSupport::flow(Indicator::line_cone(0.0, std::tan(theta0)), b, orientation,
                               horizon);
}

MovingSupport dilating_interval_support(double mu, double horizon) {
    return MovingSupport::dilating(Indicator::sparse_quadratic_intervals(), mu, 1, horizon);
}

} // namespace ouctrl
