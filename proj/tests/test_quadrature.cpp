#include <catch2/catch_amalgamated.hpp>

#include "ouctrl/quadrature.hpp"

#include <cmath>
#include <numbers>

using namespace ouctrl;

TEST_CASE("Gauss-Legendre rules integrate polynomials exactly", "[quadrature]") {
    for (int npts : {4, 15}) {
        const auto& rule = quad::gauss_legendre(npts);
        double wsum = 0.0;
        for (double w : rule.weights) wsum += w;
        REQUIRE(wsum == Catch::Approx(2.0).epsilon(1e-14));
        // exact up to degree 2*npts - 1
        for (int deg : {1, 3, 2 * npts - 1}) {
            double acc = 0.0;
            for (int i = 0; i < npts; ++i)
                acc += rule.weights[i] * std::pow(rule.nodes[i], deg);
            REQUIRE(acc == Catch::Approx(0.0).margin(1e-13)); // odd powers vanish
        }
        double acc = 0.0;
        for (int i = 0; i < npts; ++i)
            acc += rule.weights[i] * std::pow(rule.nodes[i], 2 * npts - 2);
        REQUIRE(acc == Catch::Approx(2.0 / (2 * npts - 1)).epsilon(1e-12));
    }
}

TEST_CASE("adaptive quadrature hits analytic values", "[quadrature]") {
    // int_0^1 s^2 ds = 1/3
    REQUIRE(quad::adaptive([](double s) { return s * s; }, 0.0, 1.0, 1e-13) ==
            Catch::Approx(1.0 / 3.0).epsilon(1e-13));
    // int_0^pi sin = 2
    REQUIRE(quad::adaptive([](double s) { return std::sin(s); }, 0.0, std::numbers::pi,
                           1e-12) == Catch::Approx(2.0).epsilon(1e-12));
    // a spiky integrand that forces refinement: int_0^1 1/sqrt(x+1e-6)
    const double expect = 2.0 * (std::sqrt(1.0 + 1e-6) - std::sqrt(1e-6));
    REQUIRE(quad::adaptive([](double s) { return 1.0 / std::sqrt(s + 1e-6); }, 0.0, 1.0,
                           1e-10) == Catch::Approx(expect).epsilon(1e-9));
}

TEST_CASE("adaptive quadrature reports QuadratureFailure at the depth cap", "[quadrature]") {
    // Discontinuous at an irrational point: refinement near it never settles
    // at an impossible tolerance.
    auto f = [](double s) { return s > std::numbers::inv_sqrt3 ? 1.0 : 0.0; };
    REQUIRE_THROWS_AS(quad::adaptive(f, 0.0, 1.0, 1e-300, 12), QuadratureFailure);
}

TEST_CASE("composite Gauss grid has interior nodes and weights summing to T",
          "[quadrature]") {
    const double T = 3.25;
    auto grid = quad::composite_gauss(0.0, T, 16, 4);
    REQUIRE(grid.size() == 64);
    double wsum = 0.0;
    double prev = 0.0;
    for (auto [t, w] : grid) {
        REQUIRE(t > 0.0);
        REQUIRE(t < T);
        REQUIRE(t > prev);
        REQUIRE(w > 0.0);
        wsum += w;
        prev = t;
    }
    REQUIRE(wsum == Catch::Approx(T).epsilon(1e-12));

    // quadrature sanity: integrates cos exactly enough
    double acc = 0.0;
    for (auto [t, w] : grid) acc += w * std::cos(t);
    REQUIRE(acc == Catch::Approx(std::sin(T)).epsilon(1e-10));
}
