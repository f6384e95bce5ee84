#include "ouctrl/flows.hpp"
#include "ouctrl/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ouctrl {

MatrixPair MatrixPair::make(Matrix q, Matrix b) {
    if (q.rows() != q.cols() || b.rows() != b.cols() || q.rows() != b.rows() || q.rows() < 1)
        throw Error("MatrixPair: Q and B must be square with matching dimensions");
    const int n = static_cast<int>(q.rows());
    const double qnorm = q.norm();
    if ((q - q.transpose()).norm() > 1e-12 * std::max(1.0, qnorm))
        throw Error("MatrixPair: Q must be symmetric");
    q = 0.5 * (q + q.transpose());

    Eigen::SelfAdjointEigenSolver<Matrix> es(q);
    const double tol_psd = 1e-12 * std::max(1.0, qnorm);
    Vector evals = es.eigenvalues();
    for (int i = 0; i < n; ++i) {
        if (evals[i] < -tol_psd)
            throw Error("MatrixPair: Q has a negative eigenvalue beyond tolerance");
        // symmetric clamp: eigenvalue noise within tol would otherwise inflate
        // the rank of sqrt(Q) (sqrt stretches 1e-17 noise to 3e-9)
        if (std::abs(evals[i]) <= tol_psd) evals[i] = 0.0;
    }
    Matrix sqrt_q =
        es.eigenvectors() * evals.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    sqrt_q = 0.5 * (sqrt_q + sqrt_q.transpose());
    if (qnorm > 0.0 && (sqrt_q * sqrt_q - q).norm() > 1e-10 * qnorm)
        throw Error("MatrixPair: sqrt(Q)^2 does not reproduce Q to 1e-10");

    MatrixPair pair;
    pair.n = n;
    pair.q = std::move(q);
    pair.b = std::move(b);
    pair.sqrt_q = std::move(sqrt_q);
    return pair;
}

namespace {

// Diagonal Pade coefficients for e^x of order m: sum c_k x^k in p(x), with
// q(x) = p(-x).
std::vector<double> pade_coeffs(int m) {
    std::vector<double> c(m + 1);
    c[0] = 1.0;
    for (int k = 1; k <= m; ++k)
        c[k] = c[k - 1] * static_cast<double>(m - k + 1) / (k * (2 * m - k + 1));
    return c;
}

Matrix pade_exp(const Matrix& a, int order) {
    const int n = static_cast<int>(a.rows());
    const auto c = pade_coeffs(order);
    const Matrix a2 = a * a;
    // Split into even/odd parts: p(A) = U + V, p(-A) = -U + V with U odd.
    Matrix v = c[0] * Matrix::Identity(n, n);
    Matrix u = c[1] * Matrix::Identity(n, n);
    Matrix apow = Matrix::Identity(n, n);
    for (int k = 2; k <= order; k += 2) {
        apow = apow * a2;
        v += c[k] * apow;
        if (k + 1 <= order) u += c[k + 1] * apow;
    }
    u = a * u;
    return (v - u).partialPivLu().solve(v + u);
}

} // namespace

Matrix matrix_exponential(const Matrix& b, double t, double norm_cap) {
    if (b.rows() != b.cols()) throw Error("matrix_exponential: B must be square");
    const int n = static_cast<int>(b.rows());
    if (t == 0.0) return Matrix::Identity(n, n);

    Matrix a = t * b;
    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    if (!(norm1 <= norm_cap))
        throw FlowOverflow("matrix_exponential: ||tB||_1 = " + std::to_string(norm1) +
                           " exceeds cap " + std::to_string(norm_cap));

    // Order thresholds from the scaling-and-squaring backward error analysis.
    static constexpr double theta3 = 1.495585217958292e-2;
    static constexpr double theta5 = 2.539398330063230e-1;
    static constexpr double theta7 = 9.504178996162932e-1;
    static constexpr double theta9 = 2.097847961257068e0;
    static constexpr double theta13 = 5.371920351148152e0;

    if (norm1 <= theta3) return pade_exp(a, 3);
    if (norm1 <= theta5) return pade_exp(a, 5);
    if (norm1 <= theta7) return pade_exp(a, 7);
    if (norm1 <= theta9) return pade_exp(a, 9);

    int squarings = 0;
    if (norm1 > theta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
        a *= std::ldexp(1.0, -squarings);
    }
    Matrix e = pade_exp(a, 13);
    for (int i = 0; i < squarings; ++i) e = e * e;
    return e;
}

HypoellipticityReport analyze_hypoellipticity(const MatrixPair& pair) {
    const int n = pair.n;
    const Matrix bt = pair.b.transpose();

    // kernel_chain[k] = n - rank([sqrtQ; sqrtQ B^T; ...; sqrtQ (B^T)^k])
    HypoellipticityReport report;
    report.kernel_chain.reserve(n);
    Matrix stacked(n * n, n);
    Matrix block = pair.sqrt_q;
    for (int k = 0; k < n; ++k) {
        stacked.middleRows(k * n, n) = block;
        Eigen::JacobiSVD<Matrix> svd(stacked.topRows((k + 1) * n));
        const double cutoff = 1e-10 * svd.singularValues()[0];
        int rank = 0;
        for (int i = 0; i < svd.singularValues().size(); ++i)
            if (svd.singularValues()[i] > cutoff) ++rank;
        report.kernel_chain.push_back(n - rank);
        block = block * bt;
    }

    const bool chain_kalman = report.kernel_chain.back() == 0;
    if (chain_kalman) {
        for (int k = 0; k < n; ++k) {
            if (report.kernel_chain[k] == 0) {
                report.k0 = k;
                break;
            }
        }
    }

    // Cross-check against the Kalman block matrix [sqrtQ, B sqrtQ, ..., B^{n-1} sqrtQ].
    Matrix kalman(n, n * n);
    Matrix col_block = pair.sqrt_q;
    for (int k = 0; k < n; ++k) {
        kalman.middleCols(k * n, n) = col_block;
        col_block = pair.b * col_block;
    }
    Eigen::JacobiSVD<Matrix> svd(kalman);
    const double cutoff = 1e-10 * svd.singularValues()[0];
    int kalman_rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()[i] > cutoff) ++kalman_rank;
    report.rank = kalman_rank;
    report.kalman_holds = kalman_rank == n;

    if (report.kalman_holds != chain_kalman)
        throw Error("analyze_hypoellipticity: kernel-chain and Kalman-rank criteria disagree");
    return report;
}

Matrix gramian_matrix(const MatrixPair& pair, double tau, double abs_tol) {
    if (tau == 0.0) return Matrix::Zero(pair.n, pair.n);
    auto integrand = [&](double s) -> Matrix {
        Matrix e = matrix_exponential(pair.b, s);
        return e * pair.q * e.transpose();
    };
    Matrix w = quad::adaptive_generic<Matrix>(
        integrand, 0.0, tau, abs_tol, [](const Matrix& m) { return m.cwiseAbs().maxCoeff(); });
    return 0.5 * (w + w.transpose());
}

double gramian_quadratic_form(const MatrixPair& pair, double tau, const Vector& xi,
                              double abs_tol) {
    auto integrand = [&](double s) {
        return (pair.sqrt_q * (matrix_exponential(pair.b.transpose(), s) * xi)).squaredNorm();
    };
    return quad::adaptive(integrand, 0.0, tau, abs_tol);
}

std::vector<Vector> sphere_samples(int dim, int count) {
    std::vector<Vector> pts;
    if (dim == 1) {
        pts.push_back(Vector::Constant(1, 1.0));
        pts.push_back(Vector::Constant(1, -1.0));
        return pts;
    }
    pts.reserve(count);
    constexpr double golden = 0.6180339887498949;
    if (dim == 2) {
        for (int i = 0; i < count; ++i) {
            const double theta =
                2.0 * std::numbers::pi * std::fmod(0.5 / count + golden * i, 1.0);
            Vector v(2);
            v << std::cos(theta), std::sin(theta);
            pts.push_back(std::move(v));
        }
        return pts;
    }
    if (dim == 3) {
        // Fibonacci sphere
        for (int i = 0; i < count; ++i) {
            const double z = 1.0 - (2.0 * i + 1.0) / count;
            const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double theta = 2.0 * std::numbers::pi * std::fmod(golden * i, 1.0);
            Vector v(3);
            v << rho * std::cos(theta), rho * std::sin(theta), z;
            pts.push_back(std::move(v));
        }
        return pts;
    }
    throw Error("sphere_samples: only dimensions 1..3 are supported");
}

std::pair<double, double> loglog_slope_smallest_decade(const std::vector<double>& x,
                                                       const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw Error("loglog_slope: need at least two matching points");
    const double x_min = *std::min_element(x.begin(), x.end());
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] <= 10.0 * x_min * (1.0 + 1e-12) && y[i] > 0.0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    if (lx.size() < 2) throw Error("loglog_slope: not enough points in the smallest decade");
    const std::size_t m = lx.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < m; ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    const double denom = m * sxx - sx * sx;
    const double slope = (m * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / m;
    double rss = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double r = ly[i] - slope * lx[i] - intercept;
        rss += r * r;
    }
    return {slope, std::sqrt(rss / m)};
}

namespace {

// Refine the sphere infimum of xi -> xi^T W xi around the running minimum.
// Each sweep minimizes exactly over 2-D great circles spanned by the current
// direction and a tangent vector (a closed-form 2x2 eigenproblem), so the
// n = 2 case is exact after one sweep and n = 3 converges Jacobi-style.
std::pair<Vector, double> refine_min(const Matrix& w, Vector best, double best_val) {
    const int n = static_cast<int>(w.rows());
    if (n == 1) return {best, best_val};
    for (int sweep = 0; sweep < 64; ++sweep) {
        bool improved = false;
        for (int axis = 0; axis < n; ++axis) {
            Vector tangent = Vector::Unit(n, axis) - best[axis] * best;
            const double tn = tangent.norm();
            if (tn < 1e-12) continue;
            tangent /= tn;
            const double a = best.dot(w * best);
            const double b2 = tangent.dot(w * best);
            const double c = tangent.dot(w * tangent);
            // min over phi of the section form [[a, b2], [b2, c]]
            const double half_trace = 0.5 * (a + c);
            const double disc = std::sqrt(0.25 * (a - c) * (a - c) + b2 * b2);
            const double lam = half_trace - disc;
            if (lam < best_val - 1e-16 * std::abs(best_val)) {
                const double phi = 0.5 * std::atan2(2.0 * b2, a - c);
                Vector cand = std::cos(phi) * best + std::sin(phi) * tangent;
                cand.normalize();
                double val = cand.dot(w * cand);
                // the other rotation branch can be the minimizing one
                Vector cand2 = -std::sin(phi) * best + std::cos(phi) * tangent;
                cand2.normalize();
                const double val2 = cand2.dot(w * cand2);
                if (val2 < val) {
                    val = val2;
                    cand = cand2;
                }
                if (val < best_val) {
                    best_val = val;
                    best = cand;
                    improved = true;
                }
            }
        }
        if (!improved) break;
    }
    return {best, best_val};
}

} // namespace

double sphere_quadratic_infimum(const Matrix& w, const std::vector<Vector>& dirs) {
    double best_val = std::numeric_limits<double>::infinity();
    Vector best = dirs.front();
    for (const auto& xi : dirs) {
        const double val = xi.dot(w * xi);
        if (val < best_val) {
            best_val = val;
            best = xi;
        }
    }
    return refine_min(w, best, best_val).second;
}

GramianCurve gramian_curve(const MatrixPair& pair, const std::vector<double>& tau_grid,
                           int sphere_samples_count) {
    if (tau_grid.empty()) throw Error("gramian_curve: empty tau grid");
    for (std::size_t i = 0; i < tau_grid.size(); ++i) {
        if (tau_grid[i] <= 0.0 || (i > 0 && tau_grid[i] <= tau_grid[i - 1]))
            throw Error("gramian_curve: tau grid must be positive and strictly increasing");
    }
    const int required = pair.n <= 2 ? 100 : 100 * 10 * (pair.n - 2);
    if (sphere_samples_count < required)
        throw Error("gramian_curve: sphere_samples too small for dimension");

    const auto dirs = sphere_samples(pair.n, sphere_samples_count);
    GramianCurve curve;
    curve.tau_grid = tau_grid;
    curve.values.reserve(tau_grid.size());
    for (double tau : tau_grid) {
        const Matrix w = gramian_matrix(pair, tau);
        curve.values.push_back(sphere_quadratic_infimum(w, dirs));
    }
    auto [slope, residual] = loglog_slope_smallest_decade(curve.tau_grid, curve.values);
    curve.fitted_exponent = slope;
    curve.fit_residual = residual;
    return curve;
}

} // namespace ouctrl
