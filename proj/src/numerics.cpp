#include "czopt/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace czopt {

namespace {

constexpr double kHermTol = 1e-9;
constexpr int kQlMaxSweeps = 30;  // per eigenvalue

void check_same_shape(const ComplexMatrix& a, const ComplexMatrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw PreconditionError(std::string(op) + ": dimension mismatch");
}

void matmul_into(const ComplexMatrix& a, const ComplexMatrix& b, ComplexMatrix& c, bool parallel) {
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
#pragma omp parallel for schedule(static) if (parallel && n * k * m > 32768)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        cplx* ci = c.row(i);
        std::fill(ci, ci + m, cplx(0.0, 0.0));
        const cplx* ai = a.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const cplx aip = ai[p];
            const cplx* bp = b.row(p);
            for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
        }
    }
}

}  // namespace

bool ComplexMatrix::all_finite() const {
    for (const cplx& z : data_)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols() != b.rows()) throw PreconditionError("matmul: inner dimension mismatch");
    ComplexMatrix c(a.rows(), b.cols());
    matmul_into(a, b, c, true);
    return c;
}

ComplexMatrix matmul_serial(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols() != b.rows()) throw PreconditionError("matmul: inner dimension mismatch");
    ComplexMatrix c(a.rows(), b.cols());
    matmul_into(a, b, c, false);
    return c;
}

ComplexMatrix adjoint(const ComplexMatrix& a) {
    ComplexMatrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = std::conj(a(i, j));
    return t;
}

double max_abs(const ComplexMatrix& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j)));
    return m;
}

double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
    check_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
    return m;
}

double hermiticity_residual(const ComplexMatrix& h) {
    if (h.rows() != h.cols()) throw PreconditionError("hermiticity_residual: non-square");
    double m = 0.0;
    for (std::size_t i = 0; i < h.rows(); ++i)
        for (std::size_t j = i; j < h.cols(); ++j)
            m = std::max(m, std::abs(h(i, j) - std::conj(h(j, i))));
    return m;
}

HermEig herm_eig(const ComplexMatrix& h) {
    const std::size_t n = h.rows();
    if (n == 0 || h.rows() != h.cols()) throw PreconditionError("herm_eig: matrix must be square");
    if (!h.all_finite()) throw PreconditionError("herm_eig: non-finite entries");
    if (hermiticity_residual(h) >= kHermTol) throw PreconditionError("herm_eig: input is not Hermitian");

    ComplexMatrix a = h;  // working copy; lower part overwritten during reduction
    std::vector<double> d(n), e(n, 0.0);

    // Stage 1: Householder reduction to tridiagonal form. Reflector vectors
    // kept for the back-transformation.
    std::vector<std::vector<cplx>> reflectors(n >= 2 ? n - 2 : 0);
    for (std::size_t k = 0; k + 2 < n; ++k) {
        const std::size_t m = n - k - 1;  // trailing block size
        double xnorm2 = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) xnorm2 += std::norm(a(i, k));
        if (xnorm2 == 0.0) continue;

        const cplx x0 = a(k + 1, k);
        const double xnorm = std::sqrt(xnorm2);
        const cplx phase = (std::abs(x0) > 0.0) ? x0 / std::abs(x0) : cplx(1.0, 0.0);
        const cplx alpha = -phase * xnorm;

        std::vector<cplx> v(m);
        for (std::size_t i = 0; i < m; ++i) v[i] = a(k + 1 + i, k);
        v[0] -= alpha;
        double unorm2 = 0.0;
        for (const cplx& z : v) unorm2 += std::norm(z);
        if (unorm2 == 0.0) {
            a(k + 1, k) = alpha;
            a(k, k + 1) = std::conj(alpha);
            continue;
        }
        const double inv = 1.0 / std::sqrt(unorm2);
        for (cplx& z : v) z *= inv;

        // Hermitian rank-2 update of the trailing block:
        // A <- A - 2 v q^dag - 2 q v^dag with q = w - (v^dag w) v, w = A v.
        std::vector<cplx> w(m, cplx(0.0, 0.0));
        for (std::size_t i = 0; i < m; ++i) {
            const cplx* arow = a.row(k + 1 + i);
            cplx acc(0.0, 0.0);
            for (std::size_t j = 0; j < m; ++j) acc += arow[k + 1 + j] * v[j];
            w[i] = acc;
        }
        cplx c(0.0, 0.0);
        for (std::size_t i = 0; i < m; ++i) c += std::conj(v[i]) * w[i];
        std::vector<cplx> q(m);
        for (std::size_t i = 0; i < m; ++i) q[i] = w[i] - c * v[i];
        for (std::size_t i = 0; i < m; ++i) {
            cplx* arow = a.row(k + 1 + i);
            for (std::size_t j = 0; j < m; ++j)
                arow[k + 1 + j] -= 2.0 * (v[i] * std::conj(q[j]) + q[i] * std::conj(v[j]));
        }

        a(k + 1, k) = alpha;
        a(k, k + 1) = std::conj(alpha);
        reflectors[k] = std::move(v);
    }

    // Phase scaling makes the subdiagonal real non-negative.
    std::vector<cplx> colphase(n, cplx(1.0, 0.0));
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const cplx s = a(j + 1, j);
        const double mag = std::abs(s);
        e[j] = mag;
        colphase[j + 1] = (mag > 0.0 ? s / mag : cplx(1.0, 0.0)) * colphase[j];
    }
    for (std::size_t j = 0; j < n; ++j) d[j] = a(j, j).real();

    // Stage 2: implicit-shift QL on (d, e) accumulating real rotations.
    std::vector<double> z(n * n, 0.0);  // row-major real orthogonal accumulator
    for (std::size_t i = 0; i < n; ++i) z[i * n + i] = 1.0;
    // shift e down: e[i] couples d[i] and d[i+1]; tqli wants e[i] at index i+1-style;
    // keep e[i] as coupling (i, i+1) and use the standard loop bounds.
    int total_iters = 0;
    for (std::size_t l = 0; l < n; ++l) {
        int iter = 0;
        for (;;) {
            std::size_t m = l;
            for (; m + 1 < n; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= 2.3e-16 * dd) break;
            }
            if (m == l) break;
            if (iter++ == kQlMaxSweeps)
                throw NumericalError("herm_eig: QL failed to converge", total_iters);
            ++total_iters;
            double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            double r = std::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
            double s = 1.0, c = 1.0, p = 0.0;
            bool underflow = false;
            for (std::size_t i1 = m; i1-- > l;) {
                double f = s * e[i1];
                const double b = c * e[i1];
                r = std::hypot(f, g);
                e[i1 + 1] = r;
                if (r == 0.0) {
                    d[i1 + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i1 + 1] - p;
                r = (d[i1] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i1 + 1] = g + p;
                g = c * r - b;
                double* zi = z.data();
                for (std::size_t krow = 0; krow < n; ++krow, zi += n) {
                    f = zi[i1 + 1];
                    zi[i1 + 1] = s * zi[i1] + c * f;
                    zi[i1] = c * zi[i1] - s * f;
                }
            }
            if (underflow) continue;
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    // Stage 3: back-transformation. Columns of the eigenvector matrix are
    // (P_0 ... P_{n-3} D) z.
    ComplexMatrix vec(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) vec(i, j) = colphase[i] * z[i * n + j];
    for (std::size_t k = reflectors.size(); k-- > 0;) {
        const std::vector<cplx>& v = reflectors[k];
        if (v.empty()) continue;
        const std::size_t m = v.size();
        for (std::size_t col = 0; col < n; ++col) {
            cplx acc(0.0, 0.0);
            for (std::size_t i = 0; i < m; ++i) acc += std::conj(v[i]) * vec(k + 1 + i, col);
            acc *= 2.0;
            for (std::size_t i = 0; i < m; ++i) vec(k + 1 + i, col) -= acc * v[i];
        }
    }

    // Stage 4: ascending order plus a fixed per-column phase convention
    // (largest-magnitude entry made real positive) for reproducibility.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return d[x] < d[y]; });

    HermEig out;
    out.eigenvalues.resize(n);
    out.eigenvectors = ComplexMatrix(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        const std::size_t src = order[c];
        out.eigenvalues[c] = d[src];
        std::size_t imax = 0;
        double amax = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double mag = std::abs(vec(i, src));
            if (mag > amax) {
                amax = mag;
                imax = i;
            }
        }
        cplx ph = vec(imax, src);
        ph = (std::abs(ph) > 0.0) ? std::conj(ph) / std::abs(ph) : cplx(1.0, 0.0);
        for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, c) = vec(i, src) * ph;
    }
    return out;
}

ComplexMatrix unitary_step(const HermEig& eig, double dt_ns) {
    const std::size_t n = eig.eigenvalues.size();
    ComplexMatrix scaled(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        const double ang = -eig.eigenvalues[c] * dt_ns;
        const cplx ph(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; ++i) scaled(i, c) = eig.eigenvectors(i, c) * ph;
    }
    return matmul(scaled, adjoint(eig.eigenvectors));
}

ComplexMatrix unitary_step(const ComplexMatrix& h, double dt_ns) {
    if (dt_ns < 0.0) throw PreconditionError("unitary_step: dt must be non-negative");
    return unitary_step(herm_eig(h), dt_ns);
}

ComplexMatrix expm_frechet(const ComplexMatrix& h, const ComplexMatrix& dh, double dt_ns) {
    check_same_shape(h, dh, "expm_frechet");
    const HermEig eig = herm_eig(h);
    const std::size_t n = h.rows();

    // dH in the eigenbasis of H
    ComplexMatrix tmp = matmul(adjoint(eig.eigenvectors), dh);
    ComplexMatrix dht = matmul(tmp, eig.eigenvectors);

    double lmax = 0.0;
    for (double lam : eig.eigenvalues) lmax = std::max(lmax, std::abs(lam));
    const double tol = 1e-9 * lmax;

    std::vector<cplx> ph(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double ang = -eig.eigenvalues[i] * dt_ns;
        ph[i] = cplx(std::cos(ang), std::sin(ang));
    }
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            const double dl = eig.eigenvalues[a] - eig.eigenvalues[b];
            cplx w;
            if (std::abs(dl) > tol)
                w = (ph[a] - ph[b]) / dl;
            else
                w = cplx(0.0, -dt_ns) * ph[a];
            dht(a, b) *= w;
        }
    }
    tmp = matmul(eig.eigenvectors, dht);
    return matmul(tmp, adjoint(eig.eigenvectors));
}

void evolve_columns(const HermEig& eig, double dt_ns, ComplexMatrix& cols, int sign) {
    const std::size_t n = eig.eigenvalues.size();
    if (cols.rows() != n) throw PreconditionError("evolve_columns: row mismatch");
    ComplexMatrix proj = matmul(adjoint(eig.eigenvectors), cols);
    for (std::size_t i = 0; i < n; ++i) {
        const double ang = -sign * eig.eigenvalues[i] * dt_ns;
        const cplx ph(std::cos(ang), std::sin(ang));
        cplx* pi = proj.row(i);
        for (std::size_t j = 0; j < proj.cols(); ++j) pi[j] *= ph;
    }
    cols = matmul(eig.eigenvectors, proj);
}

}  // namespace czopt
