#include <catch2/catch_amalgamated.hpp>

#include "ouctrl/hum.hpp"
#include "ouctrl/quadrature.hpp"

#include <cmath>

using namespace ouctrl;

namespace {

SpectralField gaussian_field(const GridSpec& grid, double sigma, double center = 0.0,
                             bool normalized = true) {
    std::vector<cplx> phys(grid.size());
    int idx[3];
    for (std::size_t i = 0; i < phys.size(); ++i) {
        grid.coords(i, idx);
        double r2 = 0.0;
        for (int axis = 0; axis < grid.n; ++axis) {
            const double x = grid.position(idx[axis]) - center;
            r2 += x * x;
        }
        phys[i] = std::exp(-r2 / (2.0 * sigma * sigma));
    }
    auto f = SpectralField::from_physical(grid, std::move(phys));
    if (!normalized) return f;
    const double norm = f.l2_norm();
    std::vector<cplx> scaled = f.physical();
    for (auto& z : scaled) z /= norm;
    return SpectralField::from_physical(grid, std::move(scaled));
}

SpectralField single_mode_field(const GridSpec& grid, int mode) {
    std::vector<cplx> spec(grid.size(), cplx{});
    const int idx = mode >= 0 ? mode : mode + grid.points;
    spec[idx] = grid.box_volume();
    return SpectralField::from_spectral(grid, std::move(spec));
}

HumProblem lattice_problem(int points = 256, double epsilon = 0.1, double c = 1e3) {
    auto grid = GridSpec::make(1, points, 8.0);
    auto fam = SymbolFamily::heat(Matrix::Identity(1, 1), 1.0);
    auto sup = MovingSupport::fixed(Indicator::periodic_intervals(2.0, 1.0), 1, 1.0);
    return HumProblem{fam, sup, gaussian_field(grid, 1.0), epsilon, c, 64, 1};
}

} // namespace

TEST_CASE("grad_j vanishes for zero data and zero argument", "[hum]") {
    auto grid = GridSpec::make(1, 64, 8.0);
    auto fam = SymbolFamily::heat(Matrix::Identity(1, 1), 1.0);
    auto sup = MovingSupport::fixed(Indicator::periodic_intervals(2.0, 1.0), 1, 1.0);
    HumProblem prob{fam, sup, SpectralField::zero(grid), 0.1, 10.0, 64, 1};
    auto g = grad_j(prob, SpectralField::zero(grid));
    REQUIRE(g.l2_norm_sq() == 0.0);
}

TEST_CASE("empty support: gradient closed form and reported certificate failure", "[hum]") {
    auto grid = GridSpec::make(1, 128, 8.0);
    auto fam = SymbolFamily::heat(Matrix::Identity(1, 1), 1.0);
    auto sup = MovingSupport::fixed(Indicator::none(), 1, 1.0);
    const double eps = 0.05;
    HumProblem prob{fam, sup, gaussian_field(grid, 1.0), eps, 100.0, 64, 1};

    // grad J(f) = eps f + U(T,0) f0
    auto f = gaussian_field(grid, 2.0, 1.0);
    auto g = grad_j(prob, f);
    auto u0f0 = apply_propagator(fam, 0.0, prob.f0);
    for (std::size_t i = 0; i < g.spectral().size(); ++i) {
        const cplx expect = eps * f.spectral()[i] + u0f0.spectral()[i];
        REQUIRE(std::abs(g.spectral()[i] - expect) <= 1e-12 * (1.0 + std::abs(expect)));
    }

    // minimizer in closed form: h0 = -U(T,0) f0 / eps; terminal stays U(T,0) f0
    auto sol = synthesize(prob, 1e-8, 50);
    for (std::size_t i = 0; i < sol.h0.spectral().size(); ++i) {
        const cplx expect = -u0f0.spectral()[i] / eps;
        REQUIRE(std::abs(sol.h0.spectral()[i] - expect) <=
                1e-7 * (1.0 + std::abs(expect)));
    }
    REQUIRE(sol.control_energy == 0.0);
    REQUIRE(sol.terminal_norm == Catch::Approx(u0f0.l2_norm()).epsilon(1e-9));
    // the empty control region cannot certify; the failure must be reported
    REQUIRE(sol.ledger.lhs == Catch::Approx(u0f0.l2_norm_sq() / eps).epsilon(1e-6));
    REQUIRE_FALSE(sol.ledger.certified);
}

TEST_CASE("full-observation gradient matches the per-mode scalar oracle", "[hum]") {
    auto grid = GridSpec::make(1, 64, 8.0);
    const double T = 1.0, eps = 0.2, c = 7.0;
    auto fam = SymbolFamily::heat(Matrix::Identity(1, 1), T);
    auto sup = MovingSupport::fixed(Indicator::all(), 1, T);
    auto f0 = single_mode_field(grid, 4);
    auto f = single_mode_field(grid, 4);
    HumProblem prob{fam, sup, f0, eps, c, 64, 1};
    auto g = grad_j(prob, f);

    const double xi = 4 * grid.freq_step();
    const double xi_sq = xi * xi;
    // same-node quadrature oracle for int_0^T e^{-2(T-t)|xi|^2} dt
    double q_same = 0.0;
    for (auto [t, w] : quad::composite_gauss(0.0, T, 16, 4))
        q_same += w * std::exp(-2.0 * (T - t) * xi_sq);
    const double q_exact = (1.0 - std::exp(-2.0 * T * xi_sq)) / (2.0 * xi_sq);
    REQUIRE(q_same == Catch::Approx(q_exact).epsilon(1e-10));

    const cplx expect =
        (c * q_same + eps + std::exp(-T * xi_sq)) * f.spectral()[4] / grid.box_volume() *
        grid.box_volume();
    const cplx got = g.spectral()[4];
    REQUIRE(std::abs(got - expect) <= 1e-8 * std::abs(expect));
    // all other modes stay zero
    for (int k = 0; k < grid.points; ++k) {
        if (k == 4) continue;
        REQUIRE(std::abs(g.spectral()[k]) <= 1e-10 * std::abs(expect));
    }
}

TEST_CASE("synthesize with zero datum returns the zero control", "[hum]") {
    auto prob = lattice_problem(64);
    prob.f0 = SpectralField::zero(prob.f0.grid());
    auto sol = synthesize(prob);
    REQUIRE(sol.h0.l2_norm_sq() == 0.0);
    REQUIRE(sol.terminal.l2_norm_sq() == 0.0);
    REQUIRE(sol.ledger.lhs == 0.0);
    REQUIRE(sol.ledger.certified);
}

TEST_CASE("heat lattice synthesis: certificate, terminal identity, duality", "[hum]") {
    auto prob = lattice_problem();
    auto sol = synthesize(prob, 1e-6, 200);
    REQUIRE(sol.ledger.converged);
    REQUIRE(sol.ledger.iterations <= 200);

    // uniform-cost certificate
    REQUIRE(sol.ledger.lhs <= sol.ledger.rhs * (1.0 + 1e-6));
    REQUIRE(sol.ledger.certified);

    // terminal identity f(T) = -eps h0 up to the CG residual
    double diff = 0.0;
    for (std::size_t i = 0; i < sol.terminal.spectral().size(); ++i)
        diff += std::norm(sol.terminal.spectral()[i] +
                          prob.epsilon * sol.h0.spectral()[i]);
    diff = std::sqrt(diff / prob.f0.grid().box_volume());
    REQUIRE(diff <= 1e-5 * prob.f0.l2_norm());

    // discrete duality identity
    REQUIRE(duality_check(prob, sol, 20, 424242) <= 1e-8);

    // gradient at the minimizer is small
    auto residual = grad_j(prob, sol.h0);
    auto u0f0 = apply_propagator(prob.fam, 0.0, prob.f0);
    REQUIRE(residual.l2_norm() <= 2e-6 * u0f0.l2_norm());
}

TEST_CASE("synthesize is homogeneous of degree one in f0", "[hum]") {
    auto prob = lattice_problem(128);
    auto sol1 = synthesize(prob, 1e-8, 200);
    auto prob2 = prob;
    {
        std::vector<cplx> doubled = prob.f0.physical();
        for (auto& z : doubled) z *= 2.0;
        prob2.f0 = SpectralField::from_physical(prob.f0.grid(), std::move(doubled));
    }
    auto sol2 = synthesize(prob2, 1e-8, 200);
    for (std::size_t i = 0; i < sol1.h0.spectral().size(); ++i)
        REQUIRE(std::abs(sol2.h0.spectral()[i] - 2.0 * sol1.h0.spectral()[i]) <=
                1e-8 * (1.0 + std::abs(sol1.h0.spectral()[i])));
    REQUIRE(sol2.ledger.lhs == Catch::Approx(4.0 * sol1.ledger.lhs).epsilon(1e-7));
    REQUIRE(sol2.control_energy ==
            Catch::Approx(4.0 * sol1.control_energy).epsilon(1e-7).margin(1e-12));
}

TEST_CASE("duality with zero control reduces to self-adjointness", "[hum]") {
    auto grid = GridSpec::make(1, 64, 8.0);
    auto fam = SymbolFamily::heat(Matrix::Identity(1, 1), 1.0);
    auto sup = MovingSupport::fixed(Indicator::none(), 1, 1.0);
    HumProblem prob{fam, sup, gaussian_field(grid, 1.0), 0.3, 5.0, 64, 1};
    auto sol = synthesize(prob, 1e-8, 50);
    REQUIRE(duality_check(prob, sol, 10, 7) <= 1e-10);
}

TEST_CASE("certify on the thick lattice: monotone cost in epsilon", "[hum]") {
    auto grid = GridSpec::make(1, 128, 8.0);
    auto fam = SymbolFamily::heat(Matrix::Identity(1, 1), 1.0);
    auto sup = MovingSupport::fixed(Indicator::periodic_intervals(2.0, 1.0), 1, 1.0);
    auto f0 = gaussian_field(grid, 1.0);
    auto table = certify_uniform_cost(fam, sup, f0, {0.5, 0.1, 0.02});
    REQUIRE(table.size() == 3);
    for (const auto& row : table) {
        REQUIRE(row.certified);
        REQUIRE(row.terminal_ratio <= row.epsilon);
    }
    REQUIRE(table[1].c_found >= table[0].c_found);
    REQUIRE(table[2].c_found >= table[1].c_found);

    // whenever certify succeeds, the discrete weak observability inequality
    // holds for random probes at the found constants
    for (const auto& row : table) {
        const double worst = observability_ratio(fam, sup, row.c_found, row.epsilon, grid,
                                                 64, 100, 999);
        REQUIRE(worst <= 1.0 + 1e-9);
    }
}

TEST_CASE("full observation certifies at small cost for every epsilon", "[hum]") {
    auto grid = GridSpec::make(1, 64, 8.0);
    auto fam = SymbolFamily::heat(Matrix::Identity(1, 1), 1.0);
    auto sup = MovingSupport::fixed(Indicator::all(), 1, 1.0);
    auto table = certify_uniform_cost(fam, sup, gaussian_field(grid, 1.0), {0.5, 0.1, 0.02});
    for (const auto& row : table) {
        REQUIRE(row.certified);
        REQUIRE(row.c_found <= 16.0);
    }
}

TEST_CASE("empty support is NotCertified at the cap", "[hum]") {
    auto grid = GridSpec::make(1, 64, 8.0);
    auto fam = SymbolFamily::heat(Matrix::Identity(1, 1), 1.0);
    auto sup = MovingSupport::fixed(Indicator::none(), 1, 1.0);
    auto table = certify_uniform_cost(fam, sup, gaussian_field(grid, 1.0), {0.5});
    REQUIRE(table.size() == 1);
    REQUIRE_FALSE(table[0].certified);
    REQUIRE(table[0].doubling_steps == 41); // 2^0 .. 2^40
}

TEST_CASE("problem validation", "[hum]") {
    auto prob = lattice_problem(64);
    prob.epsilon = 1.5;
    REQUIRE_THROWS_AS(synthesize(prob), Error);
    prob.epsilon = 0.1;
    prob.cost_weight = -1.0;
    REQUIRE_THROWS_AS(synthesize(prob), Error);
    prob.cost_weight = 1.0;
    REQUIRE_THROWS_AS(synthesize(prob, 0.5), Error); // cg_tol out of range
}
