#include <catch2/catch_amalgamated.hpp>

#include "ouctrl/field.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace ouctrl;

namespace {

std::vector<cplx> random_phys(const GridSpec& grid, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::vector<cplx> v(grid.size());
    for (auto& z : v) z = {gauss(rng), gauss(rng)};
    return v;
}

// single Fourier mode e^{i xi0 . x} sampled in physical space
std::vector<cplx> single_mode(const GridSpec& grid, const std::vector<int>& modes) {
    std::vector<cplx> v(grid.size());
    int idx[3];
    for (std::size_t i = 0; i < v.size(); ++i) {
        grid.coords(i, idx);
        double phase = 0.0;
        for (int axis = 0; axis < grid.n; ++axis)
            phase += modes[axis] * grid.freq_step() * grid.position(idx[axis]);
        v[i] = {std::cos(phase), std::sin(phase)};
    }
    return v;
}

std::vector<cplx> gaussian_phys(const GridSpec& grid, double sigma) {
    std::vector<cplx> v(grid.size());
    int idx[3];
    for (std::size_t i = 0; i < v.size(); ++i) {
        grid.coords(i, idx);
        double r2 = 0.0;
        for (int axis = 0; axis < grid.n; ++axis) {
            const double x = grid.position(idx[axis]);
            r2 += x * x;
        }
        v[i] = std::exp(-r2 / (2.0 * sigma * sigma));
    }
    return v;
}

MatrixPair kolmogorov_pair() {
    Matrix q(2, 2), b(2, 2);
    q << 0, 0, 0, 1;
    b << 0, 1, 0, 0;
    return MatrixPair::make(q, b);
}

} // namespace

TEST_CASE("transform round-trip returns the input", "[field]") {
    for (int n : {1, 2}) {
        auto grid = GridSpec::make(n, 32, 4.0);
        auto phys = random_phys(grid, 3);
        auto f = SpectralField::from_physical(grid, phys);
        auto g = SpectralField::from_spectral(grid, f.spectral());
        double max_err = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < phys.size(); ++i) {
            max_err = std::max(max_err, std::abs(g.physical()[i] - phys[i]));
            scale = std::max(scale, std::abs(phys[i]));
        }
        REQUIRE(max_err <= 1e-13 * scale);
    }
}

TEST_CASE("Parseval identity between the two representations", "[field]") {
    for (int n : {1, 2}) {
        auto grid = GridSpec::make(n, 64, 6.0);
        auto f = SpectralField::from_physical(grid, random_phys(grid, 5));
        double phys_sum = 0.0;
        for (const auto& z : f.physical()) phys_sum += std::norm(z);
        const double phys_norm = phys_sum * grid.cell_volume();
        REQUIRE(f.l2_norm_sq() == Catch::Approx(phys_norm).epsilon(1e-12));
    }
}

TEST_CASE("single Fourier mode lands on one coefficient", "[field]") {
    auto grid = GridSpec::make(1, 64, 8.0);
    auto f = SpectralField::from_physical(grid, single_mode(grid, {5}));
    // u = e^{i xi_5 x}: spectral coefficient at mode 5 should be 2L, others ~ 0
    for (int k = 0; k < grid.points; ++k) {
        const double expect = grid.mode_of(k) == 5 ? grid.box_volume() : 0.0;
        REQUIRE(std::abs(f.spectral()[k] - expect) <= 1e-10 * grid.box_volume());
    }
}

TEST_CASE("propagator at t = T is the identity", "[field]") {
    auto grid = GridSpec::make(1, 64, 8.0);
    auto fam = SymbolFamily::heat(Matrix::Identity(1, 1), 1.0);
    auto f = SpectralField::from_physical(grid, random_phys(grid, 7));
    auto g = apply_propagator(fam, 1.0, f);
    for (std::size_t i = 0; i < f.spectral().size(); ++i)
        REQUIRE(std::abs(g.spectral()[i] - f.spectral()[i]) <= 1e-14 * (1 + std::abs(f.spectral()[i])));
}

TEST_CASE("propagator scales a single mode by the heat multiplier", "[field]") {
    auto grid = GridSpec::make(2, 32, 4.0);
    auto fam = SymbolFamily::heat(Matrix::Identity(2, 2), 1.0);
    const std::vector<int> modes = {3, -2};
    auto f = SpectralField::from_physical(grid, single_mode(grid, modes));
    const double t = 0.25;
    auto g = apply_propagator(fam, t, f);
    const double xi_sq = (modes[0] * modes[0] + modes[1] * modes[1]) *
                         grid.freq_step() * grid.freq_step();
    const double expect = std::exp(-(1.0 - t) * xi_sq);
    // compare physical values pointwise: mode is scaled uniformly
    for (std::size_t i = 0; i < f.physical().size(); ++i)
        REQUIRE(std::abs(g.physical()[i] - expect * f.physical()[i]) <= 1e-12);
}

TEST_CASE("propagator contraction and norm monotonicity in t", "[field]") {
    auto grid = GridSpec::make(2, 32, 5.0);
    const double T = 1.0;
    std::vector<SymbolFamily> fams = {SymbolFamily::heat(Matrix::Identity(2, 2), T),
                                      SymbolFamily::ou_reduction(kolmogorov_pair(), T)};
    for (const auto& fam : fams) {
        for (unsigned seed = 0; seed < 20; ++seed) {
            auto f = SpectralField::from_physical(grid, random_phys(grid, 100 + seed));
            double prev = -1.0;
            for (int i = 0; i <= 20; ++i) {
                const double t = T * i / 20.0;
                const double norm = apply_propagator(fam, t, f).l2_norm();
                REQUIRE(norm <= f.l2_norm() * (1 + 1e-12));
                REQUIRE(norm >= prev - 1e-12 * f.l2_norm());
                prev = norm;
            }
        }
    }
}

TEST_CASE("propagator self-adjointness", "[field]") {
    auto grid = GridSpec::make(1, 128, 8.0);
    auto fam = SymbolFamily::heat(Matrix::Identity(1, 1), 1.0);
    auto f = SpectralField::from_physical(grid, random_phys(grid, 31));
    auto g = SpectralField::from_physical(grid, random_phys(grid, 32));
    const double lhs = inner_re(apply_propagator(fam, 0.3, f), g);
    const double rhs = inner_re(f, apply_propagator(fam, 0.3, g));
    REQUIRE(lhs == Catch::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("derivative_field at (m, alpha) = (0, 0) equals apply_propagator", "[field]") {
    auto grid = GridSpec::make(2, 32, 4.0);
    auto fam = SymbolFamily::ou_reduction(kolmogorov_pair(), 1.0);
    auto f = SpectralField::from_physical(grid, random_phys(grid, 41));
    auto a = apply_propagator(fam, 0.4, f);
    auto d = derivative_field(fam, 0.4, f, 0, {0, 0});
    for (std::size_t i = 0; i < a.spectral().size(); ++i)
        REQUIRE(std::abs(a.spectral()[i] - d.spectral()[i]) <= 1e-13);
}

TEST_CASE("derivative_field single mode heat oracle", "[field]") {
    auto grid = GridSpec::make(1, 64, 8.0);
    auto fam = SymbolFamily::heat(Matrix::Identity(1, 1), 1.0);
    const std::vector<int> modes = {4};
    auto f = SpectralField::from_physical(grid, single_mode(grid, modes));
    const double t = 0.25, xi = modes[0] * grid.freq_step();
    auto d = derivative_field(fam, t, f, 1, {0});
    const double expect = xi * xi * std::exp(-(1.0 - t) * xi * xi);
    for (std::size_t i = 0; i < f.physical().size(); ++i)
        REQUIRE(std::abs(d.physical()[i] - expect * f.physical()[i]) <= 1e-11);
}

TEST_CASE("Kolmogorov derivative field matches time finite differences", "[field]") {
    auto grid = GridSpec::make(2, 32, 6.0);
    auto fam = SymbolFamily::ou_reduction(kolmogorov_pair(), 1.0);
    auto f = SpectralField::from_physical(grid, gaussian_phys(grid, 1.0));
    const double t = 0.5, h = 1e-4;
    auto d2 = derivative_field(fam, t, f, 2, {1, 0});
    auto dp = derivative_field(fam, t + h, f, 1, {1, 0});
    auto dm = derivative_field(fam, t - h, f, 1, {1, 0});
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < d2.spectral().size(); ++i) {
        const cplx fd = (dp.spectral()[i] - dm.spectral()[i]) / (2.0 * h);
        num += std::norm(d2.spectral()[i] - fd);
        den += std::norm(d2.spectral()[i]);
    }
    REQUIRE(std::sqrt(num / den) <= 1e-4);
}

TEST_CASE("derivative_norm_sq equals the field-op route", "[field]") {
    auto grid = GridSpec::make(2, 32, 4.0);
    auto fam = SymbolFamily::ou_reduction(kolmogorov_pair(), 1.0);
    auto f = SpectralField::from_physical(grid, gaussian_phys(grid, 0.8));
    for (int m : {0, 1, 2}) {
        for (std::vector<int> alpha : {std::vector<int>{0, 0}, {1, 0}, {0, 2}, {2, 1}}) {
            const double direct = derivative_norm_sq(fam, 0.3, f, m, alpha);
            const double via_field = derivative_field(fam, 0.3, f, m, alpha).l2_norm_sq();
            REQUIRE(direct == Catch::Approx(via_field).epsilon(1e-12).margin(1e-300));
        }
    }
}

TEST_CASE("mask_multiply trivial and idempotent", "[field]") {
    auto grid = GridSpec::make(1, 64, 8.0);
    auto f = SpectralField::from_physical(grid, random_phys(grid, 51));
    auto all = mask_multiply(f, Indicator::all());
    auto none = mask_multiply(f, Indicator::none());
    REQUIRE(none.l2_norm_sq() == 0.0);
    for (std::size_t i = 0; i < f.physical().size(); ++i)
        REQUIRE(all.physical()[i] == f.physical()[i]);

    auto half = Indicator::halfspace(Vector::Constant(1, 1.0), 0.0);
    auto once = mask_multiply(f, half);
    auto twice = mask_multiply(once, half);
    for (std::size_t i = 0; i < f.physical().size(); ++i)
        REQUIRE(std::abs(twice.physical()[i] - once.physical()[i]) <= 1e-13);
}

TEST_CASE("half-line mask on an even field keeps half the energy", "[field]") {
    // sigma comparable to L so the x = 0 cell (which falls wholly into the
    // mask) carries O(1/N) of the energy, matching the 2/N bound
    auto grid = GridSpec::make(1, 256, 8.0);
    auto f = SpectralField::from_physical(grid, gaussian_phys(grid, 3.0));
    auto masked = mask_multiply(f, Indicator::halfspace(Vector::Constant(1, 1.0), 0.0));
    const double ratio = masked.l2_norm_sq() / f.l2_norm_sq();
    REQUIRE(std::abs(ratio - 0.5) <= 2.0 / grid.points);
}

TEST_CASE("windowed_l2sq Gaussian erf oracle", "[field]") {
    // oracle: sqrt(pi) * erf over the union of included cells [-1-h/2, 1+h/2];
    // the cell-centered sum then carries only the O(h^2) midpoint error
    auto run = [](int points) {
        auto grid = GridSpec::make(1, points, 8.0);
        auto f = SpectralField::from_physical(grid, gaussian_phys(grid, 1.0));
        auto window = Indicator::ball(Vector::Zero(1), 1.0);
        const double got = windowed_l2sq(f, window);
        // |g|^2 = e^{-x^2}; covered cells are those with center in [-1, 1]
        double lo = 0.0, hi = 0.0;
        const double h = grid.cell_width();
        for (int j = 0; j < grid.points; ++j) {
            const double x = grid.position(j);
            if (std::abs(x) <= 1.0) {
                lo = std::min(lo, x - h / 2);
                hi = std::max(hi, x + h / 2);
            }
        }
        const double expect =
            std::sqrt(std::numbers::pi) / 2.0 * (std::erf(hi) - std::erf(lo));
        return std::abs(got - expect) / expect;
    };
    REQUIRE(run(256) <= 1e-3);
    REQUIRE(run(8192) <= 1e-6);
}

TEST_CASE("windowed_l2sq trivial cases", "[field]") {
    auto grid = GridSpec::make(2, 32, 4.0);
    auto f = SpectralField::from_physical(grid, random_phys(grid, 61));
    REQUIRE(windowed_l2sq(f, Indicator::all()) == Catch::Approx(f.l2_norm_sq()).epsilon(1e-12));
    REQUIRE(windowed_l2sq(SpectralField::zero(grid), Indicator::all()) == 0.0);
}

TEST_CASE("aliasing guard separates damped and undamped grids", "[field]") {
    // heat at T = 1 from t = 0: A = |xi|^2 at the band edge; L controls xi_max
    auto fam = SymbolFamily::heat(Matrix::Identity(1, 1), 1.0);
    auto fine = GridSpec::make(1, 64, 4.0); // band xi >= 16.7 -> A >= 280
    REQUIRE(check_aliasing(fam, 0.0, fine).ok);
    auto coarse = GridSpec::make(1, 16, 16.0); // band xi >= 1.05 -> A ~ 1.1
    auto check = check_aliasing(fam, 0.0, coarse);
    REQUIRE_FALSE(check.ok);
    REQUIRE_FALSE(check.message.empty());
}

TEST_CASE("field binary serialization round-trips", "[field]") {
    auto grid = GridSpec::make(2, 16, 2.5);
    auto f = SpectralField::from_physical(grid, random_phys(grid, 71));
    std::stringstream ss;
    write_field(ss, f);
    auto g = read_field(ss);
    REQUIRE(g.grid() == f.grid());
    for (std::size_t i = 0; i < f.physical().size(); ++i)
        REQUIRE(g.physical()[i] == f.physical()[i]);
}

TEST_CASE("csv slice emits a header and N rows", "[field]") {
    auto grid = GridSpec::make(2, 16, 2.0);
    auto f = SpectralField::from_physical(grid, random_phys(grid, 81));
    std::stringstream ss;
    write_csv_slice(ss, f);
    std::string line;
    int rows = 0;
    std::getline(ss, line);
    REQUIRE(line == "x,re,im");
    while (std::getline(ss, line)) ++rows;
    REQUIRE(rows == grid.points);
}
