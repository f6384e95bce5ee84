#include "ouctrl/field.hpp"
#include "ouctrl/fft.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <ostream>

namespace ouctrl {

namespace {

void check_sizes(const GridSpec& grid, std::size_t got) {
    if (got != grid.size()) throw Error("SpectralField: data size does not match grid");
}

std::array<int, 3> dims_of(const GridSpec& grid) {
    std::array<int, 3> dims{};
    for (int i = 0; i < grid.n; ++i) dims[i] = grid.points;
    return dims;
}

// (-1)^{sum of axis indices}; with N even this equals the mode-parity phase
// e^{i xi . L} of the shifted box.
inline double parity_sign(const GridSpec& grid, std::size_t linear) {
    int parity = 0;
    for (int axis = 0; axis < grid.n; ++axis) {
        parity += static_cast<int>(linear % grid.points);
        linear /= grid.points;
    }
    return (parity & 1) ? -1.0 : 1.0;
}

std::vector<cplx> forward_transform(const GridSpec& grid, const std::vector<cplx>& phys) {
    std::vector<cplx> spec(phys.size());
    auto dims = dims_of(grid);
    fft::dft(grid.n, dims.data(), phys.data(), spec.data(), fft::kForward);
    const double scale = grid.cell_volume();
    for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= scale * parity_sign(grid, i);
    return spec;
}

std::vector<cplx> backward_transform(const GridSpec& grid, const std::vector<cplx>& spec) {
    std::vector<cplx> phys(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) phys[i] = spec[i] * parity_sign(grid, i);
    auto dims = dims_of(grid);
    fft::dft(grid.n, dims.data(), phys.data(), phys.data(), fft::kBackward);
    const double scale = 1.0 / grid.box_volume();
    for (auto& z : phys) z *= scale;
    return phys;
}

void mode_frequencies(const GridSpec& grid, std::size_t linear, double* xi) {
    for (int axis = grid.n - 1; axis >= 0; --axis) {
        xi[axis] = grid.frequency(static_cast<int>(linear % grid.points));
        linear /= grid.points;
    }
}

} // namespace

void to_spectral(const GridSpec& grid, const std::vector<cplx>& phys,
                 std::vector<cplx>& spec) {
    check_sizes(grid, phys.size());
    spec = forward_transform(grid, phys);
}

void to_physical(const GridSpec& grid, const std::vector<cplx>& spec,
                 std::vector<cplx>& phys) {
    check_sizes(grid, spec.size());
    phys = backward_transform(grid, spec);
}

SpectralField SpectralField::zero(const GridSpec& grid) {
    SpectralField f;
    f.grid_ = grid;
    f.phys_.assign(grid.size(), cplx{});
    f.spec_.assign(grid.size(), cplx{});
    return f;
}

SpectralField SpectralField::from_physical(const GridSpec& grid, std::vector<cplx> phys) {
    check_sizes(grid, phys.size());
    SpectralField f;
    f.grid_ = grid;
    f.spec_ = forward_transform(grid, phys);
    f.phys_ = std::move(phys);
    return f;
}

SpectralField SpectralField::from_spectral(const GridSpec& grid, std::vector<cplx> spec) {
    check_sizes(grid, spec.size());
    SpectralField f;
    f.grid_ = grid;
    f.phys_ = backward_transform(grid, spec);
    f.spec_ = std::move(spec);
    return f;
}

double SpectralField::l2_norm_sq() const {
    return kern::norm_sq(spec_.data(), spec_.size()) / grid_.box_volume();
}

double SpectralField::l2_norm() const { return std::sqrt(l2_norm_sq()); }

double inner_re(const SpectralField& f, const SpectralField& g) {
    if (!(f.grid() == g.grid())) throw GridMismatch("inner_re: grids differ");
    return kern::dot_re(f.spectral().data(), g.spectral().data(), f.spectral().size()) /
           f.grid().box_volume();
}

std::vector<double> build_multiplier(const SymbolFamily& fam, double t, const GridSpec& grid) {
    if (fam.dim() != grid.n) throw GridMismatch("multiplier: family/grid dimension mismatch");
    auto ctx = fam.context(t, 0);
    std::vector<double> mult(grid.size());
    double xi[3];
    for (std::size_t i = 0; i < mult.size(); ++i) {
        mode_frequencies(grid, i, xi);
        mult[i] = std::exp(-ctx.a(xi));
    }
    return mult;
}

SpectralField apply_propagator(const SymbolFamily& fam, double t, const SpectralField& g) {
    if (fam.dim() != g.grid().n) throw GridMismatch("apply_propagator: dimension mismatch");
    if (t < 0.0 || t > fam.horizon() * (1 + 1e-12))
        throw Error("apply_propagator: t outside [0, T]");
    auto mult = build_multiplier(fam, t, g.grid());
    std::vector<cplx> spec(g.spectral().size());
    kern::cmul_real(spec.data(), g.spectral().data(), mult.data(), spec.size());
    return SpectralField::from_spectral(g.grid(), std::move(spec));
}

namespace {

int alpha_order(const std::vector<int>& alpha) {
    int sum = 0;
    for (int a : alpha) {
        if (a < 0) throw Error("derivative multi-index entries must be nonnegative");
        sum += a;
    }
    return sum;
}

// fills factor[i] = (i xi)^alpha * d^m/dt^m e^{-A_t(xi)} over the grid
std::vector<cplx> derivative_multiplier(const SymbolFamily& fam, double t,
                                        const GridSpec& grid, int m,
                                        const std::vector<int>& alpha) {
    auto ctx = fam.context(t, m);
    std::vector<cplx> factor(grid.size());
    const int total = alpha_order(alpha);
    // i^{|alpha|} cycles over {1, i, -1, -i}
    static const cplx iphase[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    const cplx phase = iphase[total & 3];
    double xi[3];
    std::vector<double> derivs(m + 1);
    for (std::size_t i = 0; i < factor.size(); ++i) {
        mode_frequencies(grid, i, xi);
        double mono = 1.0;
        for (int axis = 0; axis < grid.n; ++axis)
            for (int p = 0; p < alpha[axis]; ++p) mono *= xi[axis];
        ctx.multiplier_derivs(xi, m, derivs.data());
        factor[i] = phase * (mono * derivs[m]);
    }
    return factor;
}

} // namespace

SpectralField derivative_field(const SymbolFamily& fam, double t, const SpectralField& g,
                               int m, const std::vector<int>& alpha, int max_alpha_order) {
    if (fam.dim() != g.grid().n) throw GridMismatch("derivative_field: dimension mismatch");
    if (static_cast<int>(alpha.size()) != g.grid().n)
        throw Error("derivative_field: multi-index length must equal the dimension");
    if (alpha_order(alpha) > max_alpha_order)
        throw Error("derivative_field: |alpha| exceeds the configured maximum");
    auto factor = derivative_multiplier(fam, t, g.grid(), m, alpha);
    std::vector<cplx> spec(g.spectral().size());
    kern::cmul_cplx(spec.data(), g.spectral().data(), factor.data(), spec.size());
    return SpectralField::from_spectral(g.grid(), std::move(spec));
}

double derivative_norm_sq(const SymbolFamily& fam, double t, const SpectralField& g, int m,
                          const std::vector<int>& alpha, int max_alpha_order) {
    if (fam.dim() != g.grid().n) throw GridMismatch("derivative_norm: dimension mismatch");
    if (static_cast<int>(alpha.size()) != g.grid().n)
        throw Error("derivative_norm: multi-index length must equal the dimension");
    if (alpha_order(alpha) > max_alpha_order)
        throw Error("derivative_norm: |alpha| exceeds the configured maximum");
    const GridSpec& grid = g.grid();
    auto ctx = fam.context(t, m);
    double xi[3];
    std::vector<double> derivs(m + 1);
    double acc = 0.0;
    const auto& spec = g.spectral();
    for (std::size_t i = 0; i < spec.size(); ++i) {
        mode_frequencies(grid, i, xi);
        double mono = 1.0;
        for (int axis = 0; axis < grid.n; ++axis)
            for (int p = 0; p < alpha[axis]; ++p) mono *= xi[axis];
        ctx.multiplier_derivs(xi, m, derivs.data());
        const double f = mono * derivs[m];
        acc += f * f * std::norm(spec[i]);
    }
    return acc / grid.box_volume();
}

std::vector<double> build_mask(const GridSpec& grid, const Indicator& indicator) {
    std::vector<double> mask(grid.size());
    double x[3];
    int idx[3];
    for (std::size_t i = 0; i < mask.size(); ++i) {
        grid.coords(i, idx);
        for (int axis = 0; axis < grid.n; ++axis) x[axis] = grid.position(idx[axis]);
        mask[i] = indicator.contains(x, grid.n) ? 1.0 : 0.0;
    }
    return mask;
}

SpectralField mask_multiply(const SpectralField& g, const Indicator& indicator) {
    auto mask = build_mask(g.grid(), indicator);
    std::vector<cplx> phys(g.physical().size());
    kern::cmul_real(phys.data(), g.physical().data(), mask.data(), phys.size());
    return SpectralField::from_physical(g.grid(), std::move(phys));
}

double windowed_l2sq(const SpectralField& g, const Indicator& indicator) {
    auto mask = build_mask(g.grid(), indicator);
    return masked_l2sq(g, mask);
}

double masked_l2sq(const SpectralField& g, const std::vector<double>& mask) {
    if (mask.size() != g.physical().size()) throw GridMismatch("masked_l2sq: mask size");
    return kern::masked_norm_sq(g.physical().data(), mask.data(), mask.size()) *
           g.grid().cell_volume();
}

TruncationCheck check_aliasing(const SymbolFamily& fam, double earliest_t,
                               const GridSpec& grid, double required_exponent) {
    auto ctx = fam.context(earliest_t, 0);
    const int band_start = grid.points / 3;
    TruncationCheck check;
    check.min_band_exponent = std::numeric_limits<double>::infinity();
    double xi[3];
    int idx[3];
    // scan the band |k|_inf >= N/3; subsample large grids
    const std::size_t stride = grid.size() > (1u << 22) ? 4 : 1;
    for (std::size_t i = 0; i < grid.size(); i += stride) {
        grid.coords(i, idx);
        bool in_band = false;
        for (int axis = 0; axis < grid.n; ++axis)
            if (std::abs(grid.mode_of(idx[axis])) >= band_start) in_band = true;
        if (!in_band) continue;
        for (int axis = 0; axis < grid.n; ++axis) xi[axis] = grid.frequency(idx[axis]);
        check.min_band_exponent = std::min(check.min_band_exponent, ctx.a(xi));
    }
    check.ok = check.min_band_exponent >= required_exponent;
    if (!check.ok)
        check.message = "top-third frequency band damped only by exp(-" +
                        std::to_string(check.min_band_exponent) + "), below exp(-" +
                        std::to_string(required_exponent) + ")";
    return check;
}

namespace {

constexpr std::uint32_t kMagic = 0x4F554644; // "OUFD"
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kEndianTag = 0x01020304;

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw Error("field read: truncated stream");
    return v;
}

} // namespace

void write_field(std::ostream& os, const SpectralField& field) {
    put(os, kMagic);
    put(os, kVersion);
    put(os, kEndianTag);
    put(os, static_cast<std::uint32_t>(field.grid().n));
    put(os, static_cast<std::uint32_t>(field.grid().points));
    put(os, field.grid().half_width);
    for (const cplx& z : field.physical()) {
        put(os, z.real());
        put(os, z.imag());
    }
}

SpectralField read_field(std::istream& is) {
    if (get<std::uint32_t>(is) != kMagic) throw Error("field read: bad magic");
    if (get<std::uint32_t>(is) != kVersion) throw Error("field read: unsupported version");
    if (get<std::uint32_t>(is) != kEndianTag)
        throw Error("field read: endianness mismatch");
    const auto n = get<std::uint32_t>(is);
    const auto points = get<std::uint32_t>(is);
    const double half_width = get<double>(is);
    auto grid = GridSpec::make(static_cast<int>(n), static_cast<int>(points), half_width);
    std::vector<cplx> phys(grid.size());
    for (auto& z : phys) {
        const double re = get<double>(is);
        const double im = get<double>(is);
        z = {re, im};
    }
    return SpectralField::from_physical(grid, std::move(phys));
}

void write_field_file(const std::string& path, const SpectralField& field) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path + " for writing");
    write_field(os, field);
}

SpectralField read_field_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path);
    return read_field(is);
}

void write_csv_slice(std::ostream& os, const SpectralField& field) {
    const GridSpec& grid = field.grid();
    os << "x,re,im\n";
    char buf[128];
    // axis-0 slice through the other axes' midpoint index N/2 (position 0)
    std::size_t stride = 1, base = 0;
    for (int axis = 1; axis < grid.n; ++axis) {
        stride *= grid.points;
        base = base * grid.points + grid.points / 2;
    }
    for (int j = 0; j < grid.points; ++j) {
        const cplx z = field.physical()[static_cast<std::size_t>(j) * stride + base];
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", grid.position(j), z.real(),
                      z.imag());
        os << buf;
    }
}

} // namespace ouctrl
