#pragma once

#include "ouctrl/field.hpp"
#include "ouctrl/geometry.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <vector>

namespace ouctrl {

using Rational = boost::multiprecision::cpp_rational;

// Gaussian probe built directly on the Fourier side:
// g_hat(xi) = (2 pi)^{n/2} exp(-i x0 . xi - l^2 |xi|^2 / 2).
SpectralField gaussian_probe(const GridSpec& grid, const Vector& x0, double l);
// continuum norm^2 (pi / l^2)^{n/2}, for the grid cross-check
double gaussian_probe_norm_sq(int dim, double l);

// Exact partition sum  sum_{l1 + 2 l2 + ... + m lm = m} a^{l1+...+lm} /
// (1^{l1} l1! ... m^{lm} lm!)  which must equal (1/m!) prod_{j<m} (a + j).
Rational faa_di_bruno_sum(int m, const Rational& a);
Rational rising_factorial_form(int m, const Rational& a);

// d^m/dt^m e^{-A_t(xi)} assembled from the explicit partition expansion;
// independent of the recurrence used by the symbol engine.
double faa_di_bruno_multiplier_derivative(const SymbolFamily& fam, double t, const Vector& xi,
                                          int m);

struct NecessityRow {
    Vector x0;
    double delta_l = 0.0;       // ||U(T,0) g_l||^2
    double window_energy = 0.0; // sum_m w_m ||U(T,t_m) g_l||^2_{omega(t_m) cap B(x0,r)}
    double tail_energy = 0.0;   // sum_m w_m energy outside |x - x0| <= r
};

struct NecessityReport {
    std::vector<NecessityRow> rows;
    double delta_spread = 0.0; // max relative spread of delta_l over the schedule
    bool window_decreasing = false;
    double final_to_initial = 0.0;
};

NecessityReport necessity_experiment(const SymbolFamily& fam, const MovingSupport& sup,
                                     const GridSpec& grid, double l, double r,
                                     const std::vector<Vector>& schedule, int time_nodes = 64);

struct BernsteinRow {
    double t = 0.0;
    int m = 0;
    std::vector<int> alpha;
    double norm = 0.0;
    double rho = 0.0; // norm (T-t)^{k(2m+|a|)/2} / (m! sqrt(a!) ||g||)
};

struct BernsteinAudit {
    std::vector<BernsteinRow> rows;
    double c0_hat = 0.0; // max over m+|a| >= 1 of rho^{1/(m+|a|)}
    double k_fit = 0.0;  // equal-total-order envelope slope regression
    double k_used = 0.0; // exponent from ellipticity_probe entering rho
    double c_hat = 0.0;
    double s_hat = 0.0;
};

BernsteinAudit bernstein_audit(const SymbolFamily& fam, const SpectralField& g,
                               const std::vector<double>& t_schedule, int m_max,
                               int alpha_max);

struct CylinderReport {
    Vector beta;
    bool good = true;
    int witness_m = -1;             // set for bad cylinders
    std::vector<int> witness_alpha; //
    double bound_ratio = 0.0;       // max over tested (m, alpha) of lhs/rhs
    double energy = 0.0;            // ||U g||^2_{L2(C(beta))}
};

struct CylinderClassification {
    std::vector<CylinderReport> reports;
    double good_energy = 0.0;
    double bad_energy = 0.0;
    double total_energy = 0.0;
    double epsilon = 0.0;
    double datum_norm_sq = 0.0;
    bool bad_energy_bounded = false; // bad_energy <= eps ||g||^2
    // constants entering the classification, all measured
    double c0_hat = 0.0, c_hat = 0.0, k_hat = 0.0, s_hat = 0.0, c_t_hat = 0.0;
    double t_gamma = 0.0, gamma = 0.0;
    int m_cap = 0, alpha_cap = 0;
};

CylinderClassification classify_cylinders(const SymbolFamily& fam, double gamma,
                                          double epsilon, const SpectralField& g, double r,
                                          const std::vector<Vector>& beta_window, int m_cap,
                                          int alpha_cap, int time_nodes = 32);

// all multi-indices alpha in N^dim with |alpha| <= cap, lexicographic
std::vector<std::vector<int>> multi_indices_up_to(int dim, int cap);

} // namespace ouctrl
