#include <catch2/catch_amalgamated.hpp>

#include "ouctrl/diagnostics.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace ouctrl;

namespace {

MatrixPair kolmogorov_pair() {
    Matrix q(2, 2), b(2, 2);
    q << 0, 0, 0, 1;
    b << 0, 1, 0, 0;
    return MatrixPair::make(q, b);
}

Vector vec2(double x, double y) {
    Vector v(2);
    v << x, y;
    return v;
}

SpectralField normalized_gaussian(const GridSpec& grid, double sigma) {
    std::vector<cplx> phys(grid.size());
    int idx[3];
    for (std::size_t i = 0; i < phys.size(); ++i) {
        grid.coords(i, idx);
        double r2 = 0.0;
        for (int axis = 0; axis < grid.n; ++axis) {
            const double x = grid.position(idx[axis]);
            r2 += x * x;
        }
        phys[i] = std::exp(-r2 / (2.0 * sigma * sigma));
    }
    auto f = SpectralField::from_physical(grid, std::move(phys));
    std::vector<cplx> scaled = f.physical();
    for (auto& z : scaled) z /= f.l2_norm();
    return SpectralField::from_physical(grid, std::move(scaled));
}

} // namespace

TEST_CASE("faa di bruno partition sum: hand-checked small cases", "[diagnostics]") {
    // m = 1: single partition l1 = 1 gives a
    REQUIRE(faa_di_bruno_sum(1, Rational(5)) == Rational(5));
    // m = 2, a = 2: partitions l1 = 2 -> a^2/2 = 2 and l2 = 1 -> a/2 = 1
    REQUIRE(faa_di_bruno_sum(2, Rational(2)) == Rational(3));
    REQUIRE(rising_factorial_form(2, Rational(2)) == Rational(3));
    // m = 3, a = 1: 1/6 + 1/2 + 1/3 = 1
    REQUIRE(faa_di_bruno_sum(3, Rational(1)) == Rational(1));
}

TEST_CASE("faa di bruno identity holds exactly for m <= 12, a in 1..8", "[diagnostics]") {
    for (int m = 1; m <= 12; ++m)
        for (int a = 1; a <= 8; ++a)
            REQUIRE(faa_di_bruno_sum(m, Rational(a)) == rising_factorial_form(m, Rational(a)));
}

TEST_CASE("faa di bruno identity also holds at non-integer rationals", "[diagnostics]") {
    const Rational half(1, 2), third(7, 3);
    for (int m = 1; m <= 9; ++m) {
        REQUIRE(faa_di_bruno_sum(m, half) == rising_factorial_form(m, half));
        REQUIRE(faa_di_bruno_sum(m, third) == rising_factorial_form(m, third));
    }
}

TEST_CASE("partition overflow guard", "[diagnostics]") {
    REQUIRE_THROWS_AS(faa_di_bruno_sum(41, Rational(1)), PartitionOverflow);
}

TEST_CASE("multiplier derivatives: recurrence vs partition expansion", "[diagnostics]") {
    const double T = 1.6;
    std::vector<SymbolFamily> fams = {
        SymbolFamily::heat(Matrix::Identity(2, 2), T),
        SymbolFamily::ou_reduction(kolmogorov_pair(), T),
        SymbolFamily::fractional(0.5, T, 2),
    };
    std::mt19937_64 rng(3);
    auto uniform = [&](double lo, double hi) {
        return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53);
    };
    for (const auto& fam : fams) {
        for (int m = 1; m <= 6; ++m) {
            for (int trial = 0; trial < 10; ++trial) {
                const double t = uniform(0.1, T - 0.1);
                Vector xi(2);
                xi << uniform(-2.0, 2.0), uniform(-2.0, 2.0);
                const double via_recurrence = fam.multiplier_derivative(t, xi, m);
                const double via_partitions =
                    faa_di_bruno_multiplier_derivative(fam, t, xi, m);
                REQUIRE(via_recurrence ==
                        Catch::Approx(via_partitions).epsilon(1e-9).margin(1e-14));
            }
        }
    }
}

TEST_CASE("gaussian probe matches its continuum norm on the grid", "[diagnostics]") {
    auto grid = GridSpec::make(2, 128, 32.0);
    for (double l : {2.0, 4.0, 8.0}) {
        auto probe = gaussian_probe(grid, vec2(3.0, -5.0), l);
        REQUIRE(probe.l2_norm_sq() ==
                Catch::Approx(gaussian_probe_norm_sq(2, l)).epsilon(1e-6));
    }
}

TEST_CASE("necessity experiment: full-space support conserves the split", "[diagnostics]") {
    auto grid = GridSpec::make(1, 256, 32.0);
    auto fam = SymbolFamily::heat(Matrix::Identity(1, 1), 1.0);
    auto sup = MovingSupport::fixed(Indicator::all(), 1, 1.0);
    auto report =
        necessity_experiment(fam, sup, grid, 2.0, 6.0, {Vector::Constant(1, 0.0)}, 32);
    const auto& row = report.rows[0];
    // window + tail = total time-integrated energy >= T * delta_l by the
    // backwards-monotone norm
    const double total = row.window_energy + row.tail_energy;
    REQUIRE(total >= row.delta_l * (1.0 - 1e-10));
}

TEST_CASE("necessity experiment: rotation cone at the critical time", "[diagnostics]") {
    const double theta0 = std::numbers::pi / 8;
    const double T = std::numbers::pi - theta0;
    auto pair = [] {
        Matrix q(2, 2), b(2, 2);
        q << 0, 0, 0, 1;
        b << 0, 1, -1, 0;
        return MatrixPair::make(q, b);
    }();
    auto fam = SymbolFamily::ou_reduction(pair, T);
    auto sup = rotation_cone_support(theta0, T, FlowOrientation::Forward);
    auto grid = GridSpec::make(2, 128, 64.0);
    std::vector<Vector> schedule;
    for (int m = 2; m <= 26; m += 4) schedule.push_back(vec2(m, m * std::tan(theta0)));
    auto report = necessity_experiment(fam, sup, grid, 2.0, 5.0, schedule, 64);
    REQUIRE(report.delta_spread <= 1e-8);
    REQUIRE(report.window_decreasing);
    REQUIRE(report.final_to_initial <= 0.5);
}

TEST_CASE("bernstein audit: heat contraction at (0, 0) and the single-mode optimum",
          "[diagnostics]") {
    auto grid = GridSpec::make(1, 256, 8.0);
    const double T = 1.2;
    auto fam = SymbolFamily::heat(Matrix::Identity(1, 1), T);
    auto g = normalized_gaussian(grid, 0.3);
    std::vector<double> schedule;
    for (double tau : {0.06, 0.1, 0.2, 0.4, 0.8}) schedule.push_back(T - tau);
    auto audit = bernstein_audit(fam, g, schedule, 2, 2);
    for (const auto& row : audit.rows) {
        if (row.m == 0 && row.alpha == std::vector<int>{0}) REQUIRE(row.rho <= 1.0 + 1e-12);
    }
    REQUIRE(std::isfinite(audit.c0_hat));
    REQUIRE(audit.c0_hat > 0.0);

    // single mode xi0: ||d_x^2 U g|| = xi0^2 e^{-(T-t) xi0^2} ||g||; the ratio
    // rho = (T-t) xi0^2 e^{-(T-t) xi0^2} / sqrt(2) peaks at 1/(e sqrt 2)
    std::vector<cplx> spec(grid.size(), cplx{});
    spec[20] = grid.box_volume();
    auto mode = SpectralField::from_spectral(grid, std::move(spec));
    const double xi0 = 20 * grid.freq_step();
    const double t_opt = T - 1.0 / (xi0 * xi0);
    auto audit_mode = bernstein_audit(fam, mode, {t_opt}, 0, 2);
    double rho_at_2 = 0.0;
    for (const auto& row : audit_mode.rows)
        if (row.m == 0 && row.alpha == std::vector<int>{2}) rho_at_2 = row.rho;
    REQUIRE(rho_at_2 ==
            Catch::Approx(1.0 / (std::numbers::e * std::sqrt(2.0))).epsilon(1e-10));
}

TEST_CASE("bernstein audit recovers the heat exponent", "[diagnostics]") {
    auto grid = GridSpec::make(1, 1024, 8.0);
    const double T = 1.5;
    auto fam = SymbolFamily::heat(Matrix::Identity(1, 1), T);
    auto g = normalized_gaussian(grid, 0.05);
    std::vector<double> schedule;
    for (int i = 0; i < 10; ++i) schedule.push_back(T - std::pow(20.0, i / 9.0) * 0.05);
    std::sort(schedule.begin(), schedule.end());
    auto audit = bernstein_audit(fam, g, schedule, 3, 3);
    REQUIRE(audit.k_used == Catch::Approx(1.0).epsilon(0.02));
    REQUIRE(audit.k_fit == Catch::Approx(1.0).epsilon(0.05));
}

TEST_CASE("cylinder classification: zero datum is vacuously good", "[diagnostics]") {
    auto grid = GridSpec::make(1, 64, 8.0);
    auto fam = SymbolFamily::heat(Matrix::Identity(1, 1), 1.0);
    std::vector<Vector> betas;
    for (int k = -4; k <= 4; ++k) betas.push_back(Vector::Constant(1, 2.0 * k));
    auto cls = classify_cylinders(fam, 0.5, 1e-2, SpectralField::zero(grid), 2.0, betas, 2, 2);
    for (const auto& rep : cls.reports) {
        REQUIRE(rep.good);
        REQUIRE(rep.energy == 0.0);
    }
    REQUIRE(cls.bad_energy == 0.0);
    REQUIRE(cls.bad_energy_bounded);
}

TEST_CASE("cylinder classification: centered Gaussian with generous epsilon",
          "[diagnostics]") {
    auto grid = GridSpec::make(1, 256, 8.0);
    auto fam = SymbolFamily::heat(Matrix::Identity(1, 1), 1.0);
    auto g = normalized_gaussian(grid, 0.5);
    std::vector<Vector> betas;
    for (int k = -7; k <= 7; ++k) betas.push_back(Vector::Constant(1, k * 1.0));
    auto cls = classify_cylinders(fam, 0.5, 0.5, g, 1.0, betas, 3, 3);
    REQUIRE(cls.total_energy > 0.0);
    for (const auto& rep : cls.reports) REQUIRE(rep.good);
    REQUIRE(cls.bad_energy == 0.0);
    REQUIRE(cls.bad_energy_bounded);
}

TEST_CASE("cylinder classification: adversarially small epsilon keeps the energy bound",
          "[diagnostics]") {
    auto grid = GridSpec::make(1, 256, 8.0);
    auto fam = SymbolFamily::heat(Matrix::Identity(1, 1), 1.0);
    auto g = normalized_gaussian(grid, 0.5);
    std::vector<Vector> betas;
    for (int k = -7; k <= 7; ++k) betas.push_back(Vector::Constant(1, k * 1.0));
    auto cls = classify_cylinders(fam, 0.5, 1e-8, g, 1.0, betas, 3, 3);
    // the partition stays exhaustive and exclusive
    double good_plus_bad = 0.0;
    for (const auto& rep : cls.reports) good_plus_bad += rep.energy;
    REQUIRE(good_plus_bad == Catch::Approx(cls.total_energy).epsilon(1e-12));
    REQUIRE(cls.good_energy + cls.bad_energy ==
            Catch::Approx(cls.total_energy).epsilon(1e-12));
    REQUIRE(cls.bad_energy_bounded);
}

TEST_CASE("multi-index enumeration", "[diagnostics]") {
    auto idx1 = multi_indices_up_to(1, 4);
    REQUIRE(idx1.size() == 5);
    auto idx2 = multi_indices_up_to(2, 4);
    REQUIRE(idx2.size() == 15); // (4+1)(4+2)/2
    REQUIRE(idx2.front() == std::vector<int>{0, 0});
}
