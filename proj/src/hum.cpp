#include "ouctrl/hum.hpp"
#include "ouctrl/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>

namespace ouctrl {

namespace {

using Cvec = std::vector<cplx>;

double spectral_dot(const Cvec& a, const Cvec& b, const GridSpec& grid) {
    return kern::dot_re(a.data(), b.data(), a.size()) / grid.box_volume();
}

double spectral_norm_sq(const Cvec& a, const GridSpec& grid) {
    return kern::norm_sq(a.data(), a.size()) / grid.box_volume();
}

// Precomputed per-scenario state shared by every solve: time nodes/weights,
// per-node masks and propagator multipliers, the U(T,0) multiplier, and the
// Fourier-diagonal preconditioner d(xi) = sum_m w_m rho_m e^{-2 A_{t_m}(xi)}.
struct Workspace {
    GridSpec grid;
    double horizon = 0.0;
    std::vector<double> nodes, weights;
    std::vector<std::vector<double>> masks;
    std::vector<std::vector<double>> mults;
    std::vector<double> mult0;
    std::vector<double> precond_diag; // d(xi), before (eps + C d)^{-1}
    int threads = 1;

    Workspace(const SymbolFamily& fam, const MovingSupport& sup, const GridSpec& grid_,
              int time_nodes, int threads_)
        : grid(grid_), threads(threads_) {
        if (fam.dim() != grid.n) throw GridMismatch("hum: family/grid dimension mismatch");
        if (sup.dim() != grid.n) throw GridMismatch("hum: support/grid dimension mismatch");
        horizon = fam.horizon();
        if (std::abs(sup.horizon() - horizon) > 1e-12 * std::max(1.0, horizon))
            throw Error("hum: support horizon differs from the family horizon");
        if (time_nodes < 4) throw Error("hum: need at least 4 time nodes");
        const int panels = (time_nodes + 3) / 4;
        auto grid_nodes = quad::composite_gauss(0.0, horizon, panels, 4);
        double wsum = 0.0;
        for (auto [t, w] : grid_nodes) {
            if (!(t > 0.0 && t < horizon && w > 0.0))
                throw Error("hum: quadrature nodes must be interior with positive weights");
            nodes.push_back(t);
            weights.push_back(w);
            wsum += w;
        }
        if (std::abs(wsum - horizon) > 1e-12 * horizon)
            throw Error("hum: quadrature weights do not sum to the horizon");

        masks.resize(nodes.size());
        mults.resize(nodes.size());
        run_indexed(nodes.size(), [&](std::size_t m) {
            masks[m] = build_mask(grid, sup.at(nodes[m]));
            mults[m] = build_multiplier(fam, nodes[m], grid);
        });
        mult0 = build_multiplier(fam, 0.0, grid);

        precond_diag.assign(grid.size(), 0.0);
        for (std::size_t m = 0; m < nodes.size(); ++m) {
            double fill = 0.0;
            for (double v : masks[m]) fill += v;
            const double rho = fill / static_cast<double>(grid.size());
            const double ww = weights[m] * rho;
            for (std::size_t i = 0; i < precond_diag.size(); ++i)
                precond_diag[i] += ww * mults[m][i] * mults[m][i];
        }
    }

    void run_indexed(std::size_t count, const std::function<void(std::size_t)>& fn) const {
        if (threads <= 1) {
            for (std::size_t i = 0; i < count; ++i) fn(i);
            return;
        }
        std::vector<std::future<void>> futures;
        const std::size_t chunk = (count + threads - 1) / threads;
        for (int w = 0; w < threads; ++w) {
            const std::size_t lo = w * chunk, hi = std::min(count, lo + chunk);
            if (lo >= hi) break;
            futures.push_back(std::async(std::launch::async, [&, lo, hi] {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            }));
        }
        for (auto& f : futures) f.get();
    }

    // G x = sum_m w_m U_m (1_omega U_m x), spectral in/out. Work is split over
    // a fixed chunk grid so the reduction order is thread-count independent.
    Cvec apply_g(const Cvec& x) const {
        constexpr std::size_t kChunks = 16;
        const std::size_t m_count = nodes.size();
        const std::size_t chunk = std::max<std::size_t>(1, (m_count + kChunks - 1) / kChunks);
        const std::size_t n_chunks = (m_count + chunk - 1) / chunk;
        std::vector<Cvec> partials(n_chunks);
        run_indexed(n_chunks, [&](std::size_t c) {
            Cvec acc(x.size(), cplx{});
            Cvec y(x.size());
            Cvec phys;
            for (std::size_t m = c * chunk; m < std::min(m_count, (c + 1) * chunk); ++m) {
                kern::cmul_real(y.data(), x.data(), mults[m].data(), y.size());
                to_physical(grid, y, phys);
                kern::cmul_real_inplace(phys.data(), masks[m].data(), phys.size());
                to_spectral(grid, phys, y);
                kern::cmul_real_inplace(y.data(), mults[m].data(), y.size());
                kern::axpy(acc.data(), weights[m], y.data(), acc.size());
            }
            partials[c] = std::move(acc);
        });
        Cvec total(x.size(), cplx{});
        for (const auto& part : partials)
            kern::axpy(total.data(), 1.0, part.data(), total.size());
        return total;
    }

    Cvec apply_system(const Cvec& x, double c_weight, double epsilon) const {
        Cvec out = apply_g(x);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = c_weight * out[i] + epsilon * x[i];
        return out;
    }
};

struct CgOutcome {
    Cvec x;
    double rel_residual = 0.0;
    int iterations = 0;
    bool converged = false;
    bool stalled = false;
};

CgOutcome preconditioned_cg(const Workspace& ws, double c_weight, double epsilon,
                            const Cvec& rhs, const Cvec* warm_start, double cg_tol,
                            int max_iter) {
    const GridSpec& grid = ws.grid;
    const std::size_t n = rhs.size();
    std::vector<double> precond(ws.precond_diag.size());
    for (std::size_t i = 0; i < precond.size(); ++i)
        precond[i] = 1.0 / (epsilon + c_weight * ws.precond_diag[i]);

    CgOutcome out;
    out.x = warm_start ? *warm_start : Cvec(n, cplx{});
    const double norm_b = std::sqrt(spectral_norm_sq(rhs, grid));
    if (norm_b == 0.0) {
        out.x.assign(n, cplx{});
        out.converged = true;
        return out;
    }

    Cvec r = ws.apply_system(out.x, c_weight, epsilon);
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - r[i];
    Cvec z(n);
    kern::cmul_real(z.data(), r.data(), precond.data(), n);
    Cvec p = z;
    double rz = spectral_dot(r, z, grid);
    double resid = std::sqrt(spectral_norm_sq(r, grid));
    double best_resid = resid;
    int since_improvement = 0;

    for (int it = 1; it <= max_iter; ++it) {
        if (resid <= cg_tol * norm_b) {
            out.converged = true;
            break;
        }
        Cvec ap = ws.apply_system(p, c_weight, epsilon);
        const double pap = spectral_dot(p, ap, grid);
        if (!(pap > 0.0))
            throw IndefiniteForm("cg: nonpositive curvature (quadrature/masking bug)");
        const double alpha = rz / pap;
        kern::axpy(out.x.data(), alpha, p.data(), n);
        kern::axpy(r.data(), -alpha, ap.data(), n);
        resid = std::sqrt(spectral_norm_sq(r, grid));
        out.iterations = it;

        if (resid < 0.999 * best_resid) {
            best_resid = resid;
            since_improvement = 0;
        } else if (++since_improvement >= 50) {
            out.stalled = true;
            break;
        }

        kern::cmul_real(z.data(), r.data(), precond.data(), n);
        const double rz_new = spectral_dot(r, z, grid);
        kern::xpay(p.data(), rz_new / rz, z.data(), n);
        rz = rz_new;
    }
    out.rel_residual = resid / norm_b;
    out.converged = out.converged || resid <= cg_tol * norm_b;
    return out;
}

void validate_problem(const HumProblem& prob) {
    if (!(prob.epsilon > 0.0) || !(prob.epsilon < 1.0))
        throw Error("hum: epsilon must lie in (0, 1)");
    if (!(prob.cost_weight > 0.0)) throw Error("hum: cost weight must be positive");
}

// assemble the control, terminal state, and certificate ledger from h0
HumSolution assemble(const Workspace& ws, const HumProblem& prob, CgOutcome cg) {
    const GridSpec& grid = ws.grid;
    const double c_weight = prob.cost_weight;
    const std::size_t n = cg.x.size();

    Cvec terminal(n);
    kern::cmul_real(terminal.data(), prob.f0.spectral().data(), ws.mult0.data(), n);
    double control_energy = 0.0;
    Cvec y(n);
    Cvec phys;
    for (std::size_t m = 0; m < ws.nodes.size(); ++m) {
        kern::cmul_real(y.data(), cg.x.data(), ws.mults[m].data(), n);
        to_physical(grid, y, phys);
        kern::cmul_real_inplace(phys.data(), ws.masks[m].data(), phys.size());
        for (auto& v : phys) v *= c_weight; // h(t_m) = C 1_omega U_m h0
        control_energy +=
            ws.weights[m] * kern::norm_sq(phys.data(), phys.size()) * grid.cell_volume();
        to_spectral(grid, phys, y);
        kern::cmul_real_inplace(y.data(), ws.mults[m].data(), n);
        kern::axpy(terminal.data(), ws.weights[m], y.data(), n);
    }

    HumSolution sol;
    sol.h0 = SpectralField::from_spectral(grid, std::move(cg.x));
    sol.terminal = SpectralField::from_spectral(grid, std::move(terminal));
    sol.control_energy = control_energy;
    sol.terminal_norm = sol.terminal.l2_norm();
    sol.ledger.lhs =
        control_energy / c_weight + sol.terminal_norm * sol.terminal_norm / prob.epsilon;
    sol.ledger.rhs = prob.f0.l2_norm_sq();
    sol.ledger.cg_residual = cg.rel_residual;
    sol.ledger.iterations = cg.iterations;
    sol.ledger.certified = sol.ledger.lhs <= sol.ledger.rhs * (1.0 + 1e-6);
    sol.ledger.converged = cg.converged;
    sol.ledger.stalled = cg.stalled;
    return sol;
}

Cvec negative_propagated_datum(const Workspace& ws, const SpectralField& f0) {
    Cvec rhs(f0.spectral().size());
    kern::cmul_real(rhs.data(), f0.spectral().data(), ws.mult0.data(), rhs.size());
    for (auto& v : rhs) v = -v;
    return rhs;
}

HumSolution solve_with_workspace(const Workspace& ws, const HumProblem& prob, double cg_tol,
                                 int max_iter, const Cvec* warm_start, bool stall_throws) {
    if (!(cg_tol > 1e-12) || !(cg_tol < 1e-2))
        throw Error("hum: cg_tol must lie in (1e-12, 1e-2)");
    Cvec rhs = negative_propagated_datum(ws, prob.f0);
    CgOutcome cg = preconditioned_cg(ws, prob.cost_weight, prob.epsilon, rhs, warm_start,
                                     cg_tol, max_iter);
    if (cg.stalled && stall_throws)
        throw CgStall("cg: residual plateau over 50 iterations (relative residual " +
                      std::to_string(cg.rel_residual) + ")");
    return assemble(ws, prob, std::move(cg));
}

std::uint64_t xorshift_step(std::uint64_t& state) {
    state ^= state >> 12;
    state ^= state << 25;
    state ^= state >> 27;
    return state * 0x2545F4914F6CDD1Dull;
}

Cvec white_noise(std::size_t n, std::uint64_t& state) {
    Cvec v(n);
    for (auto& z : v) {
        double u1 = (xorshift_step(state) >> 11) * 0x1.0p-53;
        while (u1 <= 0.0) u1 = (xorshift_step(state) >> 11) * 0x1.0p-53;
        const double u2 = (xorshift_step(state) >> 11) * 0x1.0p-53;
        z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    return v;
}

} // namespace

SpectralField grad_j(const HumProblem& prob, const SpectralField& f) {
    validate_problem(prob);
    if (!(f.grid() == prob.f0.grid())) throw GridMismatch("grad_j: grids differ");
    Workspace ws(prob.fam, prob.sup, prob.f0.grid(), prob.time_nodes, prob.threads);
    Cvec g = ws.apply_g(f.spectral());
    const std::size_t n = g.size();
    Cvec out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = prob.cost_weight * g[i] + prob.epsilon * f.spectral()[i] +
                 ws.mult0[i] * prob.f0.spectral()[i];
    return SpectralField::from_spectral(f.grid(), std::move(out));
}

HumSolution synthesize(const HumProblem& prob, double cg_tol, int max_iter) {
    validate_problem(prob);
    Workspace ws(prob.fam, prob.sup, prob.f0.grid(), prob.time_nodes, prob.threads);
    return solve_with_workspace(ws, prob, cg_tol, max_iter, nullptr, /*stall_throws=*/true);
}

std::vector<CertifyRow> certify_uniform_cost(const SymbolFamily& fam, const MovingSupport& sup,
                                             const SpectralField& f0,
                                             const std::vector<double>& epsilons,
                                             double c_cap, int time_nodes, double cg_tol,
                                             int max_iter, int threads) {
    for (double eps : epsilons)
        if (!(eps > 0.0) || !(eps < 1.0)) throw Error("certify: epsilons must lie in (0, 1)");
    Workspace ws(fam, sup, f0.grid(), time_nodes, threads);
    const double f0_norm = f0.l2_norm();

    std::vector<CertifyRow> table;
    for (double eps : epsilons) {
        CertifyRow row;
        row.epsilon = eps;
        HumProblem prob{fam, sup, f0, eps, 1.0, time_nodes, threads};
        Cvec warm;
        for (double c = 1.0; c <= c_cap; c *= 2.0) {
            prob.cost_weight = c;
            ++row.doubling_steps;
            HumSolution sol =
                solve_with_workspace(ws, prob, cg_tol, max_iter,
                                     warm.empty() ? nullptr : &warm, /*stall_throws=*/false);
            row.total_iterations += sol.ledger.iterations;
            row.any_stall = row.any_stall || sol.ledger.stalled;
            warm = sol.h0.spectral();
            row.terminal_ratio = f0_norm > 0.0 ? sol.terminal_norm / f0_norm : 0.0;
            row.control_energy = sol.control_energy;
            if (sol.terminal_norm <= eps * f0_norm && sol.ledger.certified &&
                sol.ledger.converged) {
                row.certified = true;
                row.c_found = c;
                break;
            }
        }
        table.push_back(row);
    }
    return table;
}

std::vector<ControlSample> control_profile(const HumProblem& prob, const HumSolution& sol) {
    validate_problem(prob);
    const GridSpec& grid = prob.f0.grid();
    Workspace ws(prob.fam, prob.sup, grid, prob.time_nodes, prob.threads);
    const std::size_t n = grid.size();
    std::vector<ControlSample> profile;
    Cvec y(n);
    Cvec phys;
    for (std::size_t m = 0; m < ws.nodes.size(); ++m) {
        kern::cmul_real(y.data(), sol.h0.spectral().data(), ws.mults[m].data(), n);
        to_physical(grid, y, phys);
        kern::cmul_real_inplace(phys.data(), ws.masks[m].data(), phys.size());
        for (auto& v : phys) v *= prob.cost_weight;
        ControlSample sample;
        sample.t = ws.nodes[m];
        sample.weight = ws.weights[m];
        sample.window_energy =
            kern::norm_sq(phys.data(), phys.size()) * grid.cell_volume();
        profile.push_back(sample);
    }
    return profile;
}

double duality_check(const HumProblem& prob, const HumSolution& sol, int probes,
                     std::uint64_t seed) {
    validate_problem(prob);
    const GridSpec& grid = prob.f0.grid();
    Workspace ws(prob.fam, prob.sup, grid, prob.time_nodes, prob.threads);
    const std::size_t n = grid.size();

    // h_m in physical space, reconstructed from h0 exactly as in assembly
    std::vector<Cvec> controls(ws.nodes.size());
    Cvec y(n);
    Cvec phys;
    for (std::size_t m = 0; m < ws.nodes.size(); ++m) {
        kern::cmul_real(y.data(), sol.h0.spectral().data(), ws.mults[m].data(), n);
        to_physical(grid, y, phys);
        kern::cmul_real_inplace(phys.data(), ws.masks[m].data(), phys.size());
        for (auto& v : phys) v *= prob.cost_weight;
        controls[m] = phys;
    }

    double max_defect = 0.0;
    std::uint64_t state = mix_seed(seed, 0xD0A11);
    for (int p = 0; p < probes; ++p) {
        auto g = SpectralField::from_physical(grid, white_noise(n, state));

        Cvec u0g(n);
        kern::cmul_real(u0g.data(), g.spectral().data(), ws.mult0.data(), n);
        const double lhs = spectral_dot(prob.f0.spectral(), u0g, grid);

        double rhs = spectral_dot(sol.terminal.spectral(), g.spectral(), grid);
        Cvec umg(n), umg_phys;
        for (std::size_t m = 0; m < ws.nodes.size(); ++m) {
            kern::cmul_real(umg.data(), g.spectral().data(), ws.mults[m].data(), n);
            to_physical(grid, umg, umg_phys);
            // h_m vanishes outside omega(t_m), so this is the omega-window product
            rhs -= ws.weights[m] * kern::dot_re(controls[m].data(), umg_phys.data(), n) *
                   grid.cell_volume();
        }
        const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
        max_defect = std::max(max_defect, std::abs(lhs - rhs) / scale);
    }
    return max_defect;
}

double observability_ratio(const SymbolFamily& fam, const MovingSupport& sup, double c,
                           double epsilon, const GridSpec& grid, int time_nodes, int probes,
                           std::uint64_t seed) {
    Workspace ws(fam, sup, grid, time_nodes, 1);
    const std::size_t n = grid.size();
    double worst = 0.0;
    std::uint64_t state = mix_seed(seed, 0x0B5E55);
    Cvec y(n), phys;
    for (int p = 0; p < probes; ++p) {
        auto g = SpectralField::from_physical(grid, white_noise(n, state));

        Cvec u0g(n);
        kern::cmul_real(u0g.data(), g.spectral().data(), ws.mult0.data(), n);
        const double lhs = spectral_norm_sq(u0g, grid);

        double window = 0.0;
        for (std::size_t m = 0; m < ws.nodes.size(); ++m) {
            kern::cmul_real(y.data(), g.spectral().data(), ws.mults[m].data(), n);
            to_physical(grid, y, phys);
            window += ws.weights[m] *
                      kern::masked_norm_sq(phys.data(), ws.masks[m].data(), n) *
                      grid.cell_volume();
        }
        const double rhs = c * window + epsilon * g.l2_norm_sq();
        worst = std::max(worst, lhs / rhs);
    }
    return worst;
}

} // namespace ouctrl
