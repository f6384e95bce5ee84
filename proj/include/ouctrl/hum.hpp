#pragma once

#include "ouctrl/field.hpp"
#include "ouctrl/geometry.hpp"
#include "ouctrl/symbol.hpp"

#include <cstdint>
#include <vector>

namespace ouctrl {

// Penalized minimization data: J(f) = (C/2) sum_m w_m ||U(T,t_m) f||^2_{omega(t_m)}
//                                   + (eps/2) ||f||^2 + <U(T,0) f, f0>.
struct HumProblem {
    SymbolFamily fam;
    MovingSupport sup;
    SpectralField f0;
    double epsilon = 0.1;     // approximation rate, in (0, 1)
    double cost_weight = 1.0; // C > 0
    int time_nodes = 64;      // composite Gauss-Legendre nodes on [0, T]
    int threads = 1;
};

struct HumLedger {
    double lhs = 0.0; // (1/C) control_energy + (1/eps) terminal_norm^2
    double rhs = 0.0; // ||f0||^2
    double cg_residual = 0.0;
    int iterations = 0;
    bool certified = false; // lhs <= rhs (1 + 1e-6)
    bool converged = false;
    bool stalled = false;
};

struct HumSolution {
    SpectralField h0;
    SpectralField terminal; // f(T, .) = U(T,0) f0 + sum_m w_m U(T,t_m)(1_omega h_m)
    double control_energy = 0.0;
    double terminal_norm = 0.0;
    HumLedger ledger;
};

SpectralField grad_j(const HumProblem& prob, const SpectralField& f);

// Preconditioned conjugate gradient on (C G + eps I) h0 = -U(T,0) f0 with the
// exact discrete adjoint; stops at ||grad J|| <= cg_tol ||U(T,0) f0||. Throws
// CgStall on a residual plateau and IndefiniteForm on negative curvature.
HumSolution synthesize(const HumProblem& prob, double cg_tol = 1e-6, int max_iter = 200);

struct CertifyRow {
    double epsilon = 0.0;
    bool certified = false;
    double c_found = 0.0; // meaningful when certified
    double terminal_ratio = 0.0;
    double control_energy = 0.0;
    int doubling_steps = 0;
    int total_iterations = 0;
    bool any_stall = false;
};

// Doubling search over C per epsilon; stalls and unconverged solves count as
// "criterion not met at this C" and the search continues to the cap.
std::vector<CertifyRow> certify_uniform_cost(const SymbolFamily& fam, const MovingSupport& sup,
                                             const SpectralField& f0,
                                             const std::vector<double>& epsilons,
                                             double c_cap = 1099511627776.0, // 2^40
                                             int time_nodes = 64, double cg_tol = 1e-6,
                                             int max_iter = 200, int threads = 1);

struct ControlSample {
    double t = 0.0;
    double weight = 0.0;
    double window_energy = 0.0; // ||h(t, .)||^2_{L2(omega(t))}
};

// per-node control energies of a synthesized solution
std::vector<ControlSample> control_profile(const HumProblem& prob, const HumSolution& sol);

// Max relative defect of the discrete duality identity
// <f0, U(T,0) g> = <f(T), g> - sum_m w_m <h_m, U(T,t_m) g>_{omega(t_m)}
// over seeded white-noise probes g.
double duality_check(const HumProblem& prob, const HumSolution& sol, int probes,
                     std::uint64_t seed);

// Discrete weak observability check for a given (C, eps):
// ||U(T,0) g||^2 <= C sum_m w_m ||U(T,t_m) g||^2_{omega(t_m)} + eps ||g||^2.
// Returns the max over probes of lhs / rhs (<= 1 when the inequality holds).
double observability_ratio(const SymbolFamily& fam, const MovingSupport& sup, double c,
                           double epsilon, const GridSpec& grid, int time_nodes, int probes,
                           std::uint64_t seed);

} // namespace ouctrl
