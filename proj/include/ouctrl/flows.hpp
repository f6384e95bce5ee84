#pragma once

#include "ouctrl/errors.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace ouctrl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// The (Q, B) data of an Ornstein-Uhlenbeck operator Q D.D + Bx.grad, with the
// principal square root of Q cached. Q must be symmetric PSD up to
// tol = 1e-12 * ||Q||; eigenvalues within that band are clamped to zero.
struct MatrixPair {
    int n = 0;
    Matrix q;
    Matrix b;
    Matrix sqrt_q;

    static MatrixPair make(Matrix q, Matrix b);
};

struct HypoellipticityReport {
    bool kalman_holds = false;
    int rank = 0;                  // rank of the Kalman block [sqrtQ, B sqrtQ, ...]
    std::optional<int> k0;        // smallest k with kernel_chain[k] == 0
    std::vector<int> kernel_chain; // dim of intersect_{j<=k} Ker(sqrtQ (B^T)^j), k = 0..n-1
};

struct GramianCurve {
    std::vector<double> tau_grid;
    std::vector<double> values;   // inf over the unit sphere of the Gramian quadratic form
    double fitted_exponent = 0.0; // log-log LS slope over the smallest decade of tau
    double fit_residual = 0.0;    // RMS residual of the fit
};

// e^{tB} by scaling-and-squaring with Pade approximants (orders 3/5/7/9/13).
// Exact identity at t = 0. Throws FlowOverflow when ||tB||_1 exceeds norm_cap.
Matrix matrix_exponential(const Matrix& b, double t, double norm_cap = 1e4);

HypoellipticityReport analyze_hypoellipticity(const MatrixPair& pair);

// Finite-horizon Gramian W(tau) = int_0^tau e^{sB} Q e^{sB^T} ds by adaptive
// Gauss-Legendre on the matrix integrand (entrywise abs tol).
Matrix gramian_matrix(const MatrixPair& pair, double tau, double abs_tol = 1e-13);

// Independent scalar route: int_0^tau |sqrtQ e^{sB^T} xi|^2 ds by adaptive
// quadrature of the scalar integrand. Used as the cross-check oracle for the
// matrix route and for the symbol-engine consistency property.
double gramian_quadratic_form(const MatrixPair& pair, double tau, const Vector& xi,
                              double abs_tol = 1e-12);

GramianCurve gramian_curve(const MatrixPair& pair, const std::vector<double>& tau_grid,
                           int sphere_samples);

// Deterministic low-discrepancy unit-sphere sample (n = 1, 2, 3).
std::vector<Vector> sphere_samples(int dim, int count);

// Infimum of xi -> xi^T W xi over the unit sphere: scan the sample set, then
// refine the running minimum by exact 2-D great-circle sections.
double sphere_quadratic_infimum(const Matrix& w, const std::vector<Vector>& dirs);

// Least-squares slope of log(y) vs log(x) restricted to x <= 10 * min(x)
// (the smallest decade). Returns {slope, rms_residual}.
std::pair<double, double> loglog_slope_smallest_decade(const std::vector<double>& x,
                                                       const std::vector<double>& y);

} // namespace ouctrl
