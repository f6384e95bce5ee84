#include "ouctrl/diagnostics.hpp"
#include "ouctrl/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ouctrl {

SpectralField gaussian_probe(const GridSpec& grid, const Vector& x0, double l) {
    if (x0.size() != grid.n) throw GridMismatch("gaussian_probe: center dimension");
    if (!(l > 0.0)) throw Error("gaussian_probe: width must be positive");
    std::vector<cplx> spec(grid.size());
    const double amp = std::pow(2.0 * std::numbers::pi, grid.n / 2.0);
    int idx[3];
    for (std::size_t i = 0; i < spec.size(); ++i) {
        grid.coords(i, idx);
        double phase = 0.0, xi_sq = 0.0;
        for (int axis = 0; axis < grid.n; ++axis) {
            const double xi = grid.frequency(idx[axis]);
            phase -= x0[axis] * xi;
            xi_sq += xi * xi;
        }
        spec[i] = std::polar(amp * std::exp(-l * l * xi_sq / 2.0), phase);
    }
    return SpectralField::from_spectral(grid, std::move(spec));
}

double gaussian_probe_norm_sq(int dim, double l) {
    return std::pow(std::numbers::pi / (l * l), dim / 2.0);
}

namespace {

// enumerate multiplicity vectors (l_1 .. l_m) with sum j * l_j = m
template <class Visit>
void visit_partitions(int m, int part, std::vector<int>& mults, const Visit& visit) {
    if (m == 0) {
        visit(mults);
        return;
    }
    if (part < 1) return;
    for (int count = m / part; count >= 0; --count) {
        mults[part - 1] = count;
        visit_partitions(m - count * part, part - 1, mults, visit);
        mults[part - 1] = 0;
    }
}

Rational rat_factorial(int n) {
    Rational f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

} // namespace

Rational faa_di_bruno_sum(int m, const Rational& a) {
    if (m < 1) throw Error("faa_di_bruno_sum: m must be >= 1");
    if (m > 40) throw PartitionOverflow("faa_di_bruno_sum: m > 40");
    Rational total = 0;
    std::vector<int> mults(m, 0);
    visit_partitions(m, m, mults, [&](const std::vector<int>& l) {
        int card = 0;
        Rational denom = 1;
        for (int j = 1; j <= m; ++j) {
            const int lj = l[j - 1];
            if (lj == 0) continue;
            card += lj;
            Rational jpow = 1;
            for (int p = 0; p < lj; ++p) jpow *= j;
            denom *= jpow * rat_factorial(lj);
        }
        Rational apow = 1;
        for (int p = 0; p < card; ++p) apow *= a;
        total += apow / denom;
    });
    return total;
}

Rational rising_factorial_form(int m, const Rational& a) {
    if (m < 1) throw Error("rising_factorial_form: m must be >= 1");
    Rational prod = 1;
    for (int j = 0; j < m; ++j) prod *= (a + j);
    return prod / rat_factorial(m);
}

double faa_di_bruno_multiplier_derivative(const SymbolFamily& fam, double t, const Vector& xi,
                                          int m) {
    if (m == 0) return fam.multiplier_derivative(t, xi, 0);
    if (m > 40) throw PartitionOverflow("faa_di_bruno expansion: m > 40");
    auto value = fam.eval(t, xi, m);
    // d^m/dt^m e^{-A} = m! e^{-A} sum over partitions of
    //   prod_j (1/l_j!) ((-d^j A)/j!)^{l_j}
    static const auto factorial = [](int n) {
        double f = 1.0;
        for (int i = 2; i <= n; ++i) f *= i;
        return f;
    };
    double sum = 0.0;
    std::vector<int> mults(m, 0);
    visit_partitions(m, m, mults, [&](const std::vector<int>& l) {
        double term = 1.0;
        for (int j = 1; j <= m; ++j) {
            const int lj = l[j - 1];
            if (lj == 0) continue;
            const double factor = -value.time_derivs[j - 1] / factorial(j);
            term *= std::pow(factor, lj) / factorial(lj);
        }
        sum += term;
    });
    return factorial(m) * std::exp(-value.a) * sum;
}

NecessityReport necessity_experiment(const SymbolFamily& fam, const MovingSupport& sup,
                                     const GridSpec& grid, double l, double r,
                                     const std::vector<Vector>& schedule, int time_nodes) {
    if (schedule.empty()) throw Error("necessity_experiment: empty schedule");
    const double T = fam.horizon();
    const int panels = (time_nodes + 3) / 4;
    auto nodes = quad::composite_gauss(0.0, T, panels, 4);

    // propagator multipliers are schedule-independent
    std::vector<std::vector<double>> mults;
    mults.reserve(nodes.size());
    for (auto [t, w] : nodes) mults.push_back(build_multiplier(fam, t, grid));
    auto mult0 = build_multiplier(fam, 0.0, grid);

    NecessityReport report;
    for (const auto& x0 : schedule) {
        auto probe = gaussian_probe(grid, x0, l);
        NecessityRow row;
        row.x0 = x0;
        {
            std::vector<cplx> tmp(probe.spectral().size());
            kern::cmul_real(tmp.data(), probe.spectral().data(), mult0.data(), tmp.size());
            row.delta_l = kern::norm_sq(tmp.data(), tmp.size()) / grid.box_volume();
        }
        auto ball = Indicator::ball(x0, r);
        auto ball_mask = build_mask(grid, ball);
        for (std::size_t m = 0; m < nodes.size(); ++m) {
            std::vector<cplx> spec(probe.spectral().size());
            kern::cmul_real(spec.data(), probe.spectral().data(), mults[m].data(),
                            spec.size());
            std::vector<cplx> phys;
            to_physical(grid, spec, phys);
            const double w = nodes[m].second;
            auto window_mask =
                build_mask(grid, Indicator::intersection_of({sup.at(nodes[m].first), ball}));
            row.window_energy += w *
                                 kern::masked_norm_sq(phys.data(), window_mask.data(),
                                                      phys.size()) *
                                 grid.cell_volume();
            const double total =
                kern::norm_sq(phys.data(), phys.size()) * grid.cell_volume();
            const double in_ball =
                kern::masked_norm_sq(phys.data(), ball_mask.data(), phys.size()) *
                grid.cell_volume();
            row.tail_energy += w * (total - in_ball);
        }
        report.rows.push_back(std::move(row));
    }

    double dmin = report.rows[0].delta_l, dmax = dmin;
    for (const auto& row : report.rows) {
        dmin = std::min(dmin, row.delta_l);
        dmax = std::max(dmax, row.delta_l);
    }
    report.delta_spread = dmax > 0.0 ? (dmax - dmin) / dmax : 0.0;
    report.window_decreasing = true;
    for (std::size_t i = 1; i < report.rows.size(); ++i)
        if (report.rows[i].window_energy > report.rows[i - 1].window_energy)
            report.window_decreasing = false;
    report.final_to_initial = report.rows.front().window_energy > 0.0
                                  ? report.rows.back().window_energy /
                                        report.rows.front().window_energy
                                  : 0.0;
    return report;
}

std::vector<std::vector<int>> multi_indices_up_to(int dim, int cap) {
    std::vector<std::vector<int>> out;
    std::vector<int> alpha(dim, 0);
    while (true) {
        int total = 0;
        for (int a : alpha) total += a;
        if (total <= cap) out.push_back(alpha);
        int axis = dim - 1;
        while (axis >= 0) {
            if (++alpha[axis] <= cap) {
                int partial = 0;
                for (int a : alpha) partial += a;
                if (partial <= cap) break;
            }
            alpha[axis] = 0;
            --axis;
        }
        if (axis < 0) break;
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        int sa = 0, sb = 0;
        for (int v : a) sa += v;
        for (int v : b) sb += v;
        if (sa != sb) return sa < sb;
        return a < b;
    });
    return out;
}

namespace {

double factorial_d(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

double multi_factorial_sqrt(const std::vector<int>& alpha) {
    double f = 1.0;
    for (int a : alpha) f *= factorial_d(a);
    return std::sqrt(f);
}

int order_of(const std::vector<int>& alpha) {
    int s = 0;
    for (int a : alpha) s += a;
    return s;
}

std::pair<double, double> least_squares(const std::vector<double>& x,
                                        const std::vector<double>& y) {
    const std::size_t m = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < m; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double denom = m * sxx - sx * sx;
    const double slope = (m * sxy - sx * sy) / denom;
    return {slope, (sy - slope * sx) / m};
}

// All (m, alpha) derivative norms at a fixed time in one mode sweep: the
// multiplier-derivative recurrence is shared across the table instead of
// being re-derived per combination. Same math path as derivative_norm_sq;
// equivalence is unit-tested.
std::vector<double> derivative_norms_batch(const SymbolFamily& fam, double t,
                                           const SpectralField& g, int m_max,
                                           const std::vector<std::vector<int>>& alphas) {
    const GridSpec& grid = g.grid();
    auto ctx = fam.context(t, m_max);
    const std::size_t combos = static_cast<std::size_t>(m_max + 1) * alphas.size();
    std::vector<double> acc(combos, 0.0);
    const int dim = grid.n;
    int max_per_axis = 0;
    for (const auto& alpha : alphas)
        for (int a : alpha) max_per_axis = std::max(max_per_axis, a);

    double xi[3];
    std::vector<double> derivs(m_max + 1);
    std::vector<double> powers(static_cast<std::size_t>(dim) * (max_per_axis + 1));
    const auto& spec = g.spectral();
    int idx[3];
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const double weight = std::norm(spec[i]);
        if (weight == 0.0) continue;
        grid.coords(i, idx);
        for (int axis = 0; axis < dim; ++axis) xi[axis] = grid.frequency(idx[axis]);
        ctx.multiplier_derivs(xi, m_max, derivs.data());
        for (int axis = 0; axis < dim; ++axis) {
            powers[axis * (max_per_axis + 1)] = 1.0;
            for (int p = 1; p <= max_per_axis; ++p)
                powers[axis * (max_per_axis + 1) + p] =
                    powers[axis * (max_per_axis + 1) + p - 1] * xi[axis];
        }
        std::size_t combo = 0;
        for (int m = 0; m <= m_max; ++m) {
            const double dsq = derivs[m] * derivs[m] * weight;
            for (const auto& alpha : alphas) {
                double mono = 1.0;
                for (int axis = 0; axis < dim; ++axis)
                    mono *= powers[axis * (max_per_axis + 1) + alpha[axis]];
                acc[combo++] += mono * mono * dsq;
            }
        }
    }
    for (auto& v : acc) v /= grid.box_volume();
    return acc;
}

} // namespace

BernsteinAudit bernstein_audit(const SymbolFamily& fam, const SpectralField& g,
                               const std::vector<double>& t_schedule, int m_max,
                               int alpha_max) {
    if (m_max > 6 || alpha_max > 6)
        throw Error("bernstein_audit: derivative caps limited to 6");
    const double T = fam.horizon();
    for (double t : t_schedule)
        if (!(t >= 0.0) || !(t < T)) throw Error("bernstein_audit: schedule must lie in [0, T)");

    BernsteinAudit audit;
    auto fit = fam.ellipticity_probe();
    audit.k_used = fit.k_hat;
    audit.c_hat = fit.c_hat;
    audit.s_hat = fam.analyticity_estimate();

    const double g_norm = g.l2_norm();
    auto alphas = multi_indices_up_to(g.grid().n, alpha_max);

    // Envelope S_p(t) = max over pure spatial derivatives |alpha| = p of the
    // norm. The spatial direction saturating the ellipticity exponent drives
    // S_p; time-derivative rows of an anisotropic family grow strictly slower
    // and would bias the slope, so they enter the table but not the fit.
    std::vector<std::vector<double>> envelope(alpha_max + 1,
                                              std::vector<double>(t_schedule.size(), 0.0));

    for (std::size_t ti = 0; ti < t_schedule.size(); ++ti) {
        const double t = t_schedule[ti];
        auto norms_sq = derivative_norms_batch(fam, t, g, m_max, alphas);
        std::size_t combo = 0;
        for (int m = 0; m <= m_max; ++m) {
            for (const auto& alpha : alphas) {
                const int p = 2 * m + order_of(alpha);
                const double norm = std::sqrt(norms_sq[combo++]);
                BernsteinRow row;
                row.t = t;
                row.m = m;
                row.alpha = alpha;
                row.norm = norm;
                row.rho = norm * std::pow(T - t, audit.k_used * p / 2.0) /
                          (factorial_d(m) * multi_factorial_sqrt(alpha) * g_norm);
                if (m == 0)
                    envelope[order_of(alpha)][ti] =
                        std::max(envelope[order_of(alpha)][ti], norm);
                audit.rows.push_back(std::move(row));
            }
        }
    }

    audit.c0_hat = 0.0;
    for (const auto& row : audit.rows) {
        const int card = row.m + order_of(row.alpha);
        if (card >= 1 && row.rho > 0.0)
            audit.c0_hat = std::max(audit.c0_hat, std::pow(row.rho, 1.0 / card));
    }

    // per-p slopes of log S_p against log(1/(T-t)), then regress against p/2;
    // the free intercept absorbs the order-independent measure offset
    std::vector<double> ps, slopes;
    for (int p = 1; p <= alpha_max; ++p) {
        std::vector<double> lx, ly;
        for (std::size_t ti = 0; ti < t_schedule.size(); ++ti) {
            if (envelope[p][ti] > 0.0) {
                lx.push_back(std::log(1.0 / (T - t_schedule[ti])));
                ly.push_back(std::log(envelope[p][ti]));
            }
        }
        if (lx.size() < 2) continue;
        ps.push_back(p / 2.0);
        slopes.push_back(least_squares(lx, ly).first);
    }
    if (ps.size() >= 2) audit.k_fit = least_squares(ps, slopes).first;
    return audit;
}

CylinderClassification classify_cylinders(const SymbolFamily& fam, double gamma,
                                          double epsilon, const SpectralField& g, double r,
                                          const std::vector<Vector>& beta_window, int m_cap,
                                          int alpha_cap, int time_nodes) {
    if (m_cap > 4 || alpha_cap > 4) throw Error("classify_cylinders: caps limited to 4");
    if (!(gamma > 0.0) || gamma > 1.0) throw Error("classify_cylinders: gamma in (0,1]");
    const double T = fam.horizon();
    CylinderClassification out;
    out.gamma = gamma;
    out.epsilon = epsilon;
    out.t_gamma = (1.0 - gamma / 2.0) * T;
    out.m_cap = m_cap;
    out.alpha_cap = alpha_cap;
    out.datum_norm_sq = g.l2_norm_sq();

    auto fit = fam.ellipticity_probe();
    out.c_hat = fit.c_hat;
    out.k_hat = fit.k_hat;
    out.s_hat = fam.analyticity_estimate();
    out.c_t_hat = std::max(1.0, T) * std::max(out.s_hat, 1.0) / out.c_hat;

    // empirical c0 from an audit over the classification window: T - t spans
    // [T - T_gamma, 0.95 T], clipped away from the endpoint blow-up
    {
        std::vector<double> schedule;
        const double tau_lo = std::max(T - out.t_gamma, 0.05 * T);
        const double tau_hi = 0.95 * T;
        for (int i = 0; i < 8; ++i)
            schedule.push_back(T - (tau_lo + (tau_hi - tau_lo) * i / 7.0));
        std::sort(schedule.begin(), schedule.end());
        auto audit =
            bernstein_audit(fam, g, schedule, std::min(m_cap, 4), std::min(alpha_cap, 4));
        out.c0_hat = std::max(audit.c0_hat, 1.0);
    }

    const int panels = (time_nodes + 3) / 4;
    auto nodes = quad::composite_gauss(0.0, out.t_gamma, panels, 4);
    auto alphas = multi_indices_up_to(g.grid().n, alpha_cap);

    // ball masks per cylinder
    std::vector<std::vector<double>> ball_masks;
    ball_masks.reserve(beta_window.size());
    for (const auto& beta : beta_window)
        ball_masks.push_back(build_mask(g.grid(), Indicator::ball(beta, r)));

    // cylinder norms: norms[b][combo] accumulated over time nodes
    const std::size_t combos = (m_cap + 1) * alphas.size();
    std::vector<std::vector<double>> norms_sq(beta_window.size(),
                                              std::vector<double>(combos, 0.0));
    for (const auto& [t, w] : nodes) {
        std::size_t combo = 0;
        for (int m = 0; m <= m_cap; ++m) {
            for (const auto& alpha : alphas) {
                auto field = derivative_field(fam, t, g, m, alpha);
                for (std::size_t b = 0; b < beta_window.size(); ++b)
                    norms_sq[b][combo] += w * masked_l2sq(field, ball_masks[b]);
                ++combo;
            }
        }
    }

    const double front = 3.0 * std::sqrt(2.0 * out.t_gamma) / std::sqrt(epsilon);
    for (std::size_t b = 0; b < beta_window.size(); ++b) {
        CylinderReport report;
        report.beta = beta_window[b];
        // combo 0 is (m, alpha) = (0, 0): the plain cylinder energy
        const double energy = norms_sq[b][0];
        report.energy = energy;
        std::size_t combo = 0;
        report.good = true;
        report.bound_ratio = 0.0;
        if (energy > 0.0) {
            for (int m = 0; m <= m_cap; ++m) {
                for (const auto& alpha : alphas) {
                    const int p = 2 * m + order_of(alpha);
                    const double lhs = std::sqrt(norms_sq[b][combo]);
                    const double rhs =
                        front * std::pow(out.c0_hat, m + order_of(alpha)) *
                        std::pow(4.0 * out.c_t_hat / (gamma * T), out.k_hat * p / 2.0) *
                        factorial_d(m) * std::sqrt(factorial_d(order_of(alpha))) *
                        std::sqrt(energy);
                    const double ratio = rhs > 0.0 ? lhs / rhs : 0.0;
                    if (ratio > report.bound_ratio) {
                        report.bound_ratio = ratio;
                        if (ratio > 1.0) {
                            report.witness_m = m;
                            report.witness_alpha = alpha;
                        }
                    }
                    ++combo;
                }
            }
            report.good = report.bound_ratio <= 1.0;
        }
        if (report.good)
            out.good_energy += report.energy;
        else
            out.bad_energy += report.energy;
        out.total_energy += report.energy;
        out.reports.push_back(std::move(report));
    }
    out.bad_energy_bounded = out.bad_energy <= epsilon * out.datum_norm_sq;
    return out;
}

} // namespace ouctrl
