#include "ouctrl/symbol.hpp"
#include "ouctrl/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace ouctrl {

namespace {

std::vector<double> flatten(const Matrix& m) {
    std::vector<double> out(static_cast<std::size_t>(m.rows() * m.cols()));
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) out[i * m.cols() + j] = m(i, j);
    return out;
}

double quad_form(const std::vector<double>& m, const double* xi, int n) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int j = 0; j < n; ++j) row += m[i * n + j] * xi[j];
        acc += xi[i] * row;
    }
    return acc;
}

double sq_norm(const double* xi, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += xi[i] * xi[i];
    return s;
}

constexpr int kDerivCap = 40;

const double* binomial_row(int m) {
    static const std::vector<std::vector<double>> rows = [] {
        std::vector<std::vector<double>> r(kDerivCap + 1);
        for (int i = 0; i <= kDerivCap; ++i) {
            r[i].resize(i + 1);
            r[i][0] = r[i][i] = 1.0;
            for (int j = 1; j < i; ++j) r[i][j] = r[i - 1][j - 1] + r[i - 1][j];
        }
        return r;
    }();
    if (m > kDerivCap) throw DerivOrderUnavailable("derivative order beyond supported cap");
    return rows[m].data();
}

} // namespace

double SymbolContext::a(const double* xi) const {
    if (kind == SymbolKind::Fractional)
        return time_left * std::pow(sq_norm(xi, dim), frac_power);
    return quad_form(w, xi, dim);
}

void SymbolContext::a_derivs(const double* xi, int m_count, double* out) const {
    if (m_count > max_deriv)
        throw DerivOrderUnavailable("symbol context built with lower derivative order");
    out[0] = a(xi);
    if (kind == SymbolKind::Fractional) {
        if (m_count >= 1) out[1] = -std::pow(sq_norm(xi, dim), frac_power);
        for (int m = 2; m <= m_count; ++m) out[m] = 0.0;
        return;
    }
    for (int m = 1; m <= m_count; ++m) out[m] = -quad_form(q_derivs[m - 1], xi, dim);
}

void SymbolContext::multiplier_derivs(const double* xi, int m_count, double* out) const {
    double aderivs[kDerivCap + 1];
    if (m_count > kDerivCap) throw DerivOrderUnavailable("derivative order beyond cap");
    a_derivs(xi, m_count, aderivs);
    out[0] = std::exp(-aderivs[0]);
    // D_m = sum_j C(m-1, j) * (-d^{m-j} A) * D_j  (Leibniz on D' = (-A') D)
    for (int m = 1; m <= m_count; ++m) {
        const double* binom = binomial_row(m - 1);
        double acc = 0.0;
        for (int j = 0; j < m; ++j) acc += binom[j] * (-aderivs[m - j]) * out[j];
        out[m] = acc;
    }
}

struct SymbolFamily::Impl {
    SymbolKind kind = SymbolKind::ExplicitQuadratic;
    double T = 0.0;
    int dim = 0;

    // ExplicitQuadratic, polynomial form: Q_t = sum coeffs[k] t^k
    std::vector<Matrix> coeffs;
    bool is_poly = false;
    // ExplicitQuadratic, callable form
    std::function<Matrix(double)> q_fn;
    std::vector<std::function<Matrix(double)>> q_deriv_fns;

    std::optional<MatrixPair> pair; // OuReduction
    double s = 0.0;                 // Fractional

    int max_deriv() const {
        if (kind == SymbolKind::ExplicitQuadratic && !is_poly)
            return static_cast<int>(q_deriv_fns.size());
        return std::numeric_limits<int>::max();
    }

    Matrix q_at(double t) const {
        switch (kind) {
            case SymbolKind::ExplicitQuadratic: {
                if (!is_poly) return q_fn(t);
                Matrix acc = Matrix::Zero(dim, dim);
                double tp = 1.0;
                for (const auto& c : coeffs) {
                    acc += tp * c;
                    tp *= t;
                }
                return acc;
            }
            case SymbolKind::OuReduction: {
                Matrix e = matrix_exponential(pair->b, T - t);
                return e * pair->q * e.transpose();
            }
            case SymbolKind::Fractional:
                throw Error("fractional families have no Q_t matrix");
        }
        return {};
    }

    Matrix q_derivative(double t, int j) const {
        if (j == 0) return q_at(t);
        switch (kind) {
            case SymbolKind::ExplicitQuadratic: {
                if (!is_poly) {
                    if (j > static_cast<int>(q_deriv_fns.size()))
                        throw DerivOrderUnavailable("callable family supplies orders <= " +
                                                    std::to_string(q_deriv_fns.size()));
                    return q_deriv_fns[j - 1](t);
                }
                Matrix acc = Matrix::Zero(dim, dim);
                double tp = 1.0;
                for (std::size_t k = static_cast<std::size_t>(j); k < coeffs.size(); ++k) {
                    double falling = 1.0;
                    for (int i = 0; i < j; ++i) falling *= static_cast<double>(k - i);
                    acc += falling * tp * coeffs[k];
                    tp *= t;
                }
                return acc;
            }
            case SymbolKind::OuReduction: {
                // Q_t = M(T-t) with M' = B M + M B^T, hence
                // d^j/dt^j Q_t = (-1)^j L^j(M)(T-t) with L(X) = BX + XB^T.
                Matrix m = q_at(t);
                for (int i = 0; i < j; ++i) m = pair->b * m + m * pair->b.transpose();
                return (j % 2 == 0 ? 1.0 : -1.0) * m;
            }
            case SymbolKind::Fractional:
                throw Error("fractional families have no Q_t matrix");
        }
        return {};
    }

    // W(t) = int_t^T Q_s ds; closed forms registered per kind, adaptive
    // quadrature for the general callable family.
    Matrix integrated_matrix(double t) const {
        switch (kind) {
            case SymbolKind::ExplicitQuadratic: {
                if (is_poly) {
                    Matrix acc = Matrix::Zero(dim, dim);
                    double tp = t, Tp = T;
                    for (std::size_t k = 0; k < coeffs.size(); ++k) {
                        // int_t^T s^k ds = (T^{k+1} - t^{k+1}) / (k+1)
                        acc += ((Tp - tp) / static_cast<double>(k + 1)) * coeffs[k];
                        tp *= t;
                        Tp *= T;
                    }
                    return acc;
                }
                auto integrand = [&](double u) -> Matrix { return q_fn(u); };
                return quad::adaptive_generic<Matrix>(
                    integrand, t, T, 1e-13 * (1.0 + (T - t)),
                    [](const Matrix& m) { return m.cwiseAbs().maxCoeff(); });
            }
            case SymbolKind::OuReduction:
                // change of variables: int_t^T e^{(T-s)B} Q e^{(T-s)B^T} ds
                //                    = int_0^{T-t} e^{uB} Q e^{uB^T} du
                return gramian_matrix(*pair, T - t, 1e-14 * (1.0 + (T - t)));
            case SymbolKind::Fractional:
                throw Error("fractional families have no integrated matrix");
        }
        return {};
    }
};

SymbolFamily SymbolFamily::heat(Matrix q, double T) { return explicit_poly({std::move(q)}, T); }

SymbolFamily SymbolFamily::explicit_poly(std::vector<Matrix> coeffs, double T) {
    if (coeffs.empty()) throw Error("explicit_poly: need at least one coefficient matrix");
    if (T <= 0.0) throw Error("symbol family: T must be positive");
    auto impl = std::make_shared<Impl>();
    impl->kind = SymbolKind::ExplicitQuadratic;
    impl->is_poly = true;
    impl->dim = static_cast<int>(coeffs.front().rows());
    for (const auto& c : coeffs)
        if (c.rows() != impl->dim || c.cols() != impl->dim)
            throw Error("explicit_poly: coefficient dimensions disagree");
    impl->coeffs = std::move(coeffs);
    impl->T = T;
    return SymbolFamily(std::move(impl));
}

SymbolFamily SymbolFamily::explicit_callable(std::function<Matrix(double)> q_of_t,
                                             std::vector<std::function<Matrix(double)>> derivs,
                                             int dim, double T) {
    if (T <= 0.0) throw Error("symbol family: T must be positive");
    auto impl = std::make_shared<Impl>();
    impl->kind = SymbolKind::ExplicitQuadratic;
    impl->is_poly = false;
    impl->dim = dim;
    impl->q_fn = std::move(q_of_t);
    impl->q_deriv_fns = std::move(derivs);
    impl->T = T;
    return SymbolFamily(std::move(impl));
}

SymbolFamily SymbolFamily::ou_reduction(MatrixPair pair, double T) {
    if (T <= 0.0) throw Error("symbol family: T must be positive");
    auto impl = std::make_shared<Impl>();
    impl->kind = SymbolKind::OuReduction;
    impl->dim = pair.n;
    impl->T = T;
    impl->pair = std::move(pair);
    // PSD check of Q_t on a 32-point grid; congruence keeps Q_t PSD, this
    // guards against flow blow-up and corrupted input
    for (int i = 0; i < 32; ++i) {
        const double t = T * (i + 0.5) / 32.0;
        Matrix qt = impl->q_at(t);
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (qt + qt.transpose()));
        if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, qt.norm()))
            throw Error("ou_reduction: Q_t lost positive semidefiniteness");
    }
    return SymbolFamily(std::move(impl));
}

SymbolFamily SymbolFamily::fractional(double s, double T, int dim) {
    if (s < 0.5) throw Error("fractional family requires s >= 1/2");
    if (T <= 0.0) throw Error("symbol family: T must be positive");
    auto impl = std::make_shared<Impl>();
    impl->kind = SymbolKind::Fractional;
    impl->dim = dim;
    impl->T = T;
    impl->s = s;
    return SymbolFamily(std::move(impl));
}

SymbolKind SymbolFamily::kind() const { return impl_->kind; }
double SymbolFamily::horizon() const { return impl_->T; }
int SymbolFamily::dim() const { return impl_->dim; }
int SymbolFamily::max_deriv_order() const { return impl_->max_deriv(); }
double SymbolFamily::fractional_power() const { return impl_->s; }
const MatrixPair* SymbolFamily::matrix_pair() const {
    return impl_->pair ? &*impl_->pair : nullptr;
}

Matrix SymbolFamily::q_at(double t) const { return impl_->q_at(t); }
Matrix SymbolFamily::q_derivative(double t, int j) const { return impl_->q_derivative(t, j); }

SymbolContext SymbolFamily::context(double t, int max_deriv) const {
    if (t < 0.0 || t > impl_->T * (1.0 + 1e-12)) throw Error("symbol context: t outside [0, T]");
    if (max_deriv > impl_->max_deriv())
        throw DerivOrderUnavailable("family cannot supply derivative order " +
                                    std::to_string(max_deriv));
    SymbolContext ctx;
    ctx.kind = impl_->kind;
    ctx.dim = impl_->dim;
    ctx.time_left = impl_->T - t;
    ctx.frac_power = impl_->s;
    ctx.max_deriv = max_deriv;
    if (impl_->kind != SymbolKind::Fractional) {
        ctx.w = flatten(impl_->integrated_matrix(t));
        ctx.q_derivs.reserve(max_deriv);
        for (int j = 0; j < max_deriv; ++j)
            ctx.q_derivs.push_back(flatten(impl_->q_derivative(t, j)));
    }
    return ctx;
}

SymbolValue SymbolFamily::eval(double t, const Vector& xi, int deriv_order) const {
    if (xi.size() != impl_->dim) throw Error("eval: frequency dimension mismatch");
    auto ctx = context(t, deriv_order);
    SymbolValue value;
    std::vector<double> buf(deriv_order + 1);
    ctx.a_derivs(xi.data(), deriv_order, buf.data());
    value.a = buf[0];
    value.time_derivs.assign(buf.begin() + 1, buf.end());
    return value;
}

double SymbolFamily::multiplier_derivative(double t, const Vector& xi, int m) const {
    if (xi.size() != impl_->dim) throw Error("multiplier_derivative: dimension mismatch");
    auto ctx = context(t, m);
    std::vector<double> buf(m + 1);
    ctx.multiplier_derivs(xi.data(), m, buf.data());
    return buf[m];
}

SymbolFamily::EllipticityFit SymbolFamily::ellipticity_probe(int time_samples,
                                                             int xi_samples) const {
    if (impl_->kind == SymbolKind::OuReduction) {
        if (!analyze_hypoellipticity(*impl_->pair).kalman_holds)
            throw EllipticityFailure("ellipticity probe: Kalman rank condition fails");
    }
    const double tau_max = std::min(impl_->T, 1.0);
    const double tau_min = 1e-3 * tau_max;
    std::vector<double> taus, ratios;
    const auto dirs = sphere_samples(impl_->dim, xi_samples);
    for (int i = 0; i < time_samples; ++i) {
        const double tau =
            tau_min * std::pow(tau_max / tau_min, i / static_cast<double>(time_samples - 1));
        const double t = impl_->T - tau;
        double inf_ratio;
        if (impl_->kind == SymbolKind::Fractional) {
            inf_ratio = tau; // |xi| = 1 on the sphere
        } else {
            const Matrix w = impl_->integrated_matrix(t);
            inf_ratio = sphere_quadratic_infimum(w, dirs);
        }
        taus.push_back(tau);
        ratios.push_back(inf_ratio);
    }
    const double top = *std::max_element(ratios.begin(), ratios.end());
    for (double r : ratios)
        if (!(r > 1e-12 * std::max(top, 1e-300)))
            throw EllipticityFailure("ellipticity probe: symbol infimum vanishes at t < T");

    EllipticityFit fit;
    auto [slope, residual] = loglog_slope_smallest_decade(taus, ratios);
    fit.k_hat = slope;
    fit.fit_residual = residual;
    fit.c_hat = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < taus.size(); ++i)
        fit.c_hat = std::min(fit.c_hat, ratios[i] / std::pow(taus[i], fit.k_hat));
    return fit;
}

double SymbolFamily::analyticity_estimate(int m_max, int time_samples) const {
    if (impl_->kind == SymbolKind::Fractional) return 1.0; // symbol linear in t
    double s_hat = 0.0;
    const int orders = impl_->max_deriv() == std::numeric_limits<int>::max()
                           ? m_max
                           : std::min(m_max, impl_->max_deriv());
    for (int i = 0; i < time_samples; ++i) {
        const double t = impl_->T * (i + 0.5) / time_samples;
        double fact = 1.0;
        for (int m = 0; m <= orders; ++m) {
            if (m > 1) fact *= m;
            // spectral norm (the bound is in the induced Euclidean norm)
            Eigen::JacobiSVD<Matrix> svd(impl_->q_derivative(t, m));
            const double norm = svd.singularValues()(0);
            if (norm > 0.0) s_hat = std::max(s_hat, std::pow(norm / fact, 1.0 / (m + 1)));
        }
    }
    return s_hat;
}

} // namespace ouctrl
