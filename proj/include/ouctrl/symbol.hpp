#pragma once

#include "ouctrl/errors.hpp"
#include "ouctrl/flows.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace ouctrl {

enum class SymbolKind { ExplicitQuadratic, OuReduction, Fractional };

// A_t(xi) together with d^m/dt^m A_t(xi) for m = 1..M.
struct SymbolValue {
    double a = 0.0;
    std::vector<double> time_derivs;
};

// Per-time evaluation context for grid loops: the integrated matrix W with
// A = xi^T W xi, and the Q_t derivative matrices, flattened row-major so the
// per-mode quadratic forms stay allocation-free.
struct SymbolContext {
    SymbolKind kind;
    int dim = 0;
    double time_left = 0.0;        // T - t
    double frac_power = 0.0;       // s, Fractional only
    int max_deriv = 0;
    std::vector<double> w;                   // dim x dim, row-major
    std::vector<std::vector<double>> q_derivs; // P_j = d^j Q_t / dt^j, j = 0..max_deriv-1

    double a(const double* xi) const;
    // out[0] = A, out[m] = d^m A / dt^m for m = 1..m_count
    void a_derivs(const double* xi, int m_count, double* out) const;
    // multiplier derivatives D_m = d^m/dt^m e^{-A_t(xi)} for m = 0..m_count
    void multiplier_derivs(const double* xi, int m_count, double* out) const;
};

// Time-dependent quadratic (or fractional) Fourier symbol
//   A_t(xi) = int_t^T Q_s xi . xi ds     (quadratic kinds)
//   A_t(xi) = (T - t) |xi|^{2s}          (fractional, s >= 1/2, time-constant)
// with exact time-derivative access. Value type; cheap to copy.
class SymbolFamily {
public:
    static SymbolFamily heat(Matrix q, double T);
    static SymbolFamily explicit_poly(std::vector<Matrix> coeffs, double T);
    // general callable family; derivs[j-1] supplies d^j Q_t / dt^j, j = 1..J_max
    static SymbolFamily explicit_callable(std::function<Matrix(double)> q_of_t,
                                          std::vector<std::function<Matrix(double)>> derivs,
                                          int dim, double T);
    static SymbolFamily ou_reduction(MatrixPair pair, double T);
    static SymbolFamily fractional(double s, double T, int dim);

    SymbolKind kind() const;
    double horizon() const;
    int dim() const;
    int max_deriv_order() const; // orders the family can supply (INT_MAX when unlimited)
    double fractional_power() const;
    const MatrixPair* matrix_pair() const; // OuReduction only, else nullptr

    Matrix q_at(double t) const;                 // quadratic kinds
    Matrix q_derivative(double t, int j) const;  // d^j Q_t / dt^j

    SymbolValue eval(double t, const Vector& xi, int deriv_order) const;
    double multiplier_derivative(double t, const Vector& xi, int m) const;

    SymbolContext context(double t, int max_deriv) const;

    struct EllipticityFit {
        double c_hat = 0.0;
        double k_hat = 0.0;
        double fit_residual = 0.0;
    };
    // Best empirical (c, k) with A_t(xi) >= c (T-t)^k |xi|^2 near t -> T.
    EllipticityFit ellipticity_probe(int time_samples = 24, int xi_samples = 256) const;

    // Empirical analyticity scale: max over sampled (t, m) of
    // (||d^m Q_t/dt^m|| / m!)^{1/(m+1)}. Reported, never assumed.
    double analyticity_estimate(int m_max = 6, int time_samples = 32) const;

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
    explicit SymbolFamily(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
};

} // namespace ouctrl
