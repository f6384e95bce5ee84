#pragma once

#include "ouctrl/grid.hpp"
#include "ouctrl/indicator.hpp"
#include "ouctrl/kernels.hpp"
#include "ouctrl/symbol.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace ouctrl {

using kern::cplx;

// Complex field on the truncated periodic box, with both the physical samples
// and the continuum-convention Fourier coefficients materialized (Parseval:
// h^n sum|u_j|^2 == (2L)^{-n} sum|u_k|^2 exactly at the discrete level).
// Immutable value type; operations return new fields.
class SpectralField {
public:
    static SpectralField zero(const GridSpec& grid);
    static SpectralField from_physical(const GridSpec& grid, std::vector<cplx> phys);
    static SpectralField from_spectral(const GridSpec& grid, std::vector<cplx> spec);

    const GridSpec& grid() const { return grid_; }
    const std::vector<cplx>& physical() const { return phys_; }
    const std::vector<cplx>& spectral() const { return spec_; }

    double l2_norm_sq() const; // Parseval weight included
    double l2_norm() const;

private:
    GridSpec grid_;
    std::vector<cplx> phys_;
    std::vector<cplx> spec_;
};

// real L^2 inner product <f, g> = Re int f conj(g)
double inner_re(const SpectralField& f, const SpectralField& g);

// spec' = spec * e^{-A_t(xi)}; self-adjoint positivity-preserving diagonal action
SpectralField apply_propagator(const SymbolFamily& fam, double t, const SpectralField& g);

// spec' = spec * (i xi)^alpha * d^m/dt^m e^{-A_t(xi)}
SpectralField derivative_field(const SymbolFamily& fam, double t, const SpectralField& g,
                               int m, const std::vector<int>& alpha,
                               int max_alpha_order = 8);

// Parseval norm^2 of derivative_field without materializing it (same
// multiplier path; equivalence-tested against derivative_field).
double derivative_norm_sq(const SymbolFamily& fam, double t, const SpectralField& g, int m,
                          const std::vector<int>& alpha, int max_alpha_order = 8);

// pointwise physical-space product with the {0,1} indicator at cell centers
SpectralField mask_multiply(const SpectralField& g, const Indicator& indicator);

// cell-centered Riemann sum of |g|^2 over the indicator region
double windowed_l2sq(const SpectralField& g, const Indicator& indicator);
double masked_l2sq(const SpectralField& g, const std::vector<double>& mask);

// 0/1 indicator sampled at cell centers, row-major
std::vector<double> build_mask(const GridSpec& grid, const Indicator& indicator);

// raw-array transforms with the field conventions (solver hot paths)
void to_spectral(const GridSpec& grid, const std::vector<cplx>& phys,
                 std::vector<cplx>& spec);
void to_physical(const GridSpec& grid, const std::vector<cplx>& spec,
                 std::vector<cplx>& phys);

// per-mode propagator multiplier e^{-A_t(xi_k)}, row-major over the grid
std::vector<double> build_multiplier(const SymbolFamily& fam, double t, const GridSpec& grid);

// Aliasing guard: the top-third frequency band must be damped by at least
// e^{-30} at the earliest evaluation time used.
struct TruncationCheck {
    bool ok = true;
    double min_band_exponent = 0.0; // min over the band of A_t(xi)
    std::string message;
};
TruncationCheck check_aliasing(const SymbolFamily& fam, double earliest_t,
                               const GridSpec& grid, double required_exponent = 30.0);

// Binary container: header (magic, version, endianness tag, n, N, L), payload
// of interleaved re/im doubles in row-major physical order.
void write_field(std::ostream& os, const SpectralField& field);
SpectralField read_field(std::istream& is);
void write_field_file(const std::string& path, const SpectralField& field);
SpectralField read_field_file(const std::string& path);

// CSV of a 1-D axis-0 slice through the remaining axes' origin indices.
void write_csv_slice(std::ostream& os, const SpectralField& field);

} // namespace ouctrl
