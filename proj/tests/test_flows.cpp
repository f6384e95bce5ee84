#include <catch2/catch_amalgamated.hpp>

#include "ouctrl/flows.hpp"
#include "rational_oracle.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace ouctrl;

namespace {

MatrixPair kolmogorov_translation() {
    Matrix q(2, 2), b(2, 2);
    q << 0, 0, 0, 1;
    b << 0, 1, 0, 0;
    return MatrixPair::make(q, b);
}

MatrixPair kolmogorov_rotation() {
    Matrix q(2, 2), b(2, 2);
    q << 0, 0, 0, 1;
    b << 0, 1, -1, 0;
    return MatrixPair::make(q, b);
}

Matrix random_orthogonal(int n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = gauss(rng);
    Eigen::HouseholderQR<Matrix> qr(a);
    return qr.householderQ();
}

} // namespace

TEST_CASE("matrix_exponential on the translation flow", "[flows]") {
    Matrix b(2, 2);
    b << 0, 1, 0, 0;
    Matrix expect(2, 2);
    expect << 1, 3, 0, 1;
    REQUIRE((matrix_exponential(b, 3.0) - expect).norm() <= 1e-14);
}

TEST_CASE("matrix_exponential at t = 0 is exactly the identity", "[flows]") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> gauss;
    Matrix b(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b(i, j) = gauss(rng);
    Matrix e = matrix_exponential(b, 0.0);
    REQUIRE(e == Matrix::Identity(3, 3));
}

TEST_CASE("matrix_exponential on the rotation flow at pi/2", "[flows]") {
    Matrix b(2, 2);
    b << 0, 1, -1, 0;
    Matrix expect(2, 2);
    expect << 0, 1, -1, 0;
    REQUIRE((matrix_exponential(b, std::numbers::pi / 2) - expect).norm() <= 1e-13);
}

TEST_CASE("matrix_exponential semigroup property", "[flows]") {
    // Flows of the kinds the toolkit actually propagates (nilpotent shears,
    // rotations, mild random drifts). Opposite-sign s, t with large ||sB||
    // make the product itself uncomputable in doubles, so random matrices are
    // scaled to keep e^{sB} well conditioned.
    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss;
    std::vector<Matrix> flows;
    Matrix shear(2, 2), rot(2, 2);
    shear << 0, 1, 0, 0;
    rot << 0, 1, -1, 0;
    flows.push_back(shear);
    flows.push_back(rot);
    for (int trial = 0; trial < 18; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 2);
        Matrix b(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) b(i, j) = gauss(rng);
        flows.push_back(0.3 * b / b.norm());
    }
    auto u = [&] { return 20.0 * (rng() >> 11) * 0x1.0p-53 - 10.0; };
    for (const auto& b : flows) {
        for (int rep = 0; rep < 5; ++rep) {
            const double s = u(), t = u();
            Matrix lhs = matrix_exponential(b, s + t);
            Matrix rhs = matrix_exponential(b, s) * matrix_exponential(b, t);
            REQUIRE((lhs - rhs).norm() <= 1e-10 * std::max(1.0, lhs.norm()));
        }
    }
}

TEST_CASE("matrix_exponential signals FlowOverflow beyond the norm cap", "[flows]") {
    Matrix b(2, 2);
    b << 0, 1, -1, 0;
    REQUIRE_THROWS_AS(matrix_exponential(b, 1e9, 1e4), FlowOverflow);
}

TEST_CASE("MatrixPair validation and square root", "[flows]") {
    auto pair = kolmogorov_translation();
    REQUIRE((pair.sqrt_q * pair.sqrt_q - pair.q).norm() <= 1e-10 * std::max(1.0, pair.q.norm()));

    Matrix negative(2, 2);
    negative << -1, 0, 0, 1;
    Matrix b = Matrix::Zero(2, 2);
    REQUIRE_THROWS_AS(MatrixPair::make(negative, b), Error);

    // tiny negative eigenvalues within tolerance get clamped
    Matrix nearly = Matrix::Identity(2, 2);
    nearly(0, 0) = -1e-14;
    auto clamped = MatrixPair::make(nearly, b);
    REQUIRE(clamped.sqrt_q(0, 0) == 0.0);
}

TEST_CASE("analyze_hypoellipticity on the shipped pairs vs exact rational oracle",
          "[flows]") {
    using oracle::Rational;

    auto check = [&](const MatrixPair& pair, const oracle::RatMatrix& sqrt_q,
                     const oracle::RatMatrix& b, bool expect_kalman, int expect_k0) {
        auto report = analyze_hypoellipticity(pair);
        auto exact_chain = oracle::kernel_chain(sqrt_q, b);
        REQUIRE(report.kernel_chain == exact_chain);
        REQUIRE(report.kalman_holds == expect_kalman);
        if (expect_kalman) {
            REQUIRE(report.k0.has_value());
            REQUIRE(*report.k0 == expect_k0);
        } else {
            REQUIRE_FALSE(report.k0.has_value());
        }
    };

    const oracle::RatMatrix sq01 = {{Rational(0), Rational(0)}, {Rational(0), Rational(1)}};
    check(kolmogorov_translation(), sq01, {{Rational(0), Rational(1)}, {Rational(0), Rational(0)}},
          true, 1);
    check(kolmogorov_rotation(), sq01, {{Rational(0), Rational(1)}, {Rational(-1), Rational(0)}},
          true, 1);

    // Q = I, B = 0: already full rank at k = 0
    auto identity_pair = MatrixPair::make(Matrix::Identity(2, 2), Matrix::Zero(2, 2));
    const oracle::RatMatrix id2 = {{Rational(1), Rational(0)}, {Rational(0), Rational(1)}};
    const oracle::RatMatrix zero2 = {{Rational(0), Rational(0)}, {Rational(0), Rational(0)}};
    check(identity_pair, id2, zero2, true, 0);

    // Q = 0: every kernel is the full space
    Matrix some_b(2, 2);
    some_b << 1, 2, 3, 4;
    auto degenerate = MatrixPair::make(Matrix::Zero(2, 2), some_b);
    auto report = analyze_hypoellipticity(degenerate);
    REQUIRE_FALSE(report.kalman_holds);
    REQUIRE_FALSE(report.k0.has_value());
    REQUIRE(report.kernel_chain == std::vector<int>{2, 2});
}

TEST_CASE("kernel chain is non-increasing and kalman iff last entry zero", "[flows]") {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 2);
        Matrix a(n, n), b(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                a(i, j) = gauss(rng);
                b(i, j) = gauss(rng);
            }
        auto pair = MatrixPair::make(a * a.transpose(), b);
        auto report = analyze_hypoellipticity(pair);
        for (std::size_t k = 1; k < report.kernel_chain.size(); ++k)
            REQUIRE(report.kernel_chain[k] <= report.kernel_chain[k - 1]);
        REQUIRE(report.kalman_holds == (report.kernel_chain.back() == 0));
    }
}

TEST_CASE("hypoellipticity analysis is invariant under orthogonal conjugation", "[flows]") {
    auto base = kolmogorov_translation();
    for (unsigned seed : {1u, 2u, 3u, 4u, 5u}) {
        Matrix o = random_orthogonal(2, seed);
        auto conj = MatrixPair::make(o * base.q * o.transpose(), o * base.b * o.transpose());
        auto r0 = analyze_hypoellipticity(base);
        auto r1 = analyze_hypoellipticity(conj);
        REQUIRE(r0.kalman_holds == r1.kalman_holds);
        REQUIRE(r0.k0 == r1.k0);
    }
}

TEST_CASE("gramian quadratic form matches the closed form for the translation pair",
          "[flows]") {
    auto pair = kolmogorov_translation();
    // |sqrtQ e^{sB^T} xi|^2 = (s xi1 + xi2)^2; at xi = (1,0): integral = tau^3/3
    Vector xi(2);
    xi << 1, 0;
    for (double tau : {0.1, 0.5, 1.0, 2.0}) {
        const double expect = tau * tau * tau / 3.0;
        REQUIRE(gramian_quadratic_form(pair, tau, xi) == Catch::Approx(expect).epsilon(1e-11));
        // matrix route agrees with the scalar route
        REQUIRE(xi.dot(gramian_matrix(pair, tau) * xi) ==
                Catch::Approx(expect).epsilon(1e-11));
    }
}

TEST_CASE("gramian curve: isotropic pair gives value tau and exponent 1", "[flows]") {
    auto pair = MatrixPair::make(Matrix::Identity(2, 2), Matrix::Zero(2, 2));
    std::vector<double> taus = {1e-3, 2e-3, 5e-3, 1e-2, 5e-2, 1e-1};
    auto curve = gramian_curve(pair, taus, 128);
    for (std::size_t i = 0; i < taus.size(); ++i)
        REQUIRE(curve.values[i] == Catch::Approx(taus[i]).epsilon(1e-10));
    REQUIRE(curve.fitted_exponent == Catch::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("gramian curve exponent approaches 2 k0 + 1 for both example pairs", "[flows]") {
    std::vector<double> taus;
    for (double tau = 1e-3; tau <= 1.0001e-1; tau *= std::pow(10.0, 0.25))
        taus.push_back(tau);
    for (auto pair : {kolmogorov_translation(), kolmogorov_rotation()}) {
        auto curve = gramian_curve(pair, taus, 256);
        REQUIRE(curve.fitted_exponent == Catch::Approx(3.0).epsilon(0.05));
        // cross-check the sampled infimum against the exact smallest eigenvalue
        for (std::size_t i = 0; i < taus.size(); ++i) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(gramian_matrix(pair, taus[i]));
            REQUIRE(curve.values[i] ==
                    Catch::Approx(es.eigenvalues().minCoeff()).epsilon(1e-6));
        }
    }
}

TEST_CASE("gramian curve values are strictly increasing and positive under Kalman",
          "[flows]") {
    std::vector<double> taus = {0.05, 0.1, 0.2, 0.4, 0.8};
    std::mt19937_64 rng(31);
    std::normal_distribution<double> gauss;
    std::vector<MatrixPair> pairs = {kolmogorov_translation(), kolmogorov_rotation()};
    while (pairs.size() < 52) {
        Matrix a(2, 2), b(2, 2);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                a(i, j) = gauss(rng);
                b(i, j) = gauss(rng);
            }
        auto pair = MatrixPair::make(a * a.transpose(), b);
        if (analyze_hypoellipticity(pair).kalman_holds) pairs.push_back(pair);
    }
    for (const auto& pair : pairs) {
        auto curve = gramian_curve(pair, taus, 100);
        REQUIRE(curve.values.front() > 0.0);
        for (std::size_t i = 1; i < curve.values.size(); ++i)
            REQUIRE(curve.values[i] > curve.values[i - 1]);
    }
}

TEST_CASE("gramian_curve validates inputs", "[flows]") {
    auto pair = kolmogorov_translation();
    REQUIRE_THROWS_AS(gramian_curve(pair, {0.2, 0.1}, 128), Error);
    REQUIRE_THROWS_AS(gramian_curve(pair, {0.1, 0.2}, 10), Error);
}
