#pragma once

// Test-only oracles kept independent of the implementation paths they check:
// random Hermitian generators, central finite differences for the exponential
// derivative, and a brute-force phase-compensation grid search.

#include <cmath>
#include <vector>

#include "czopt/numerics.hpp"
#include "czopt/rng.hpp"

namespace czopt::testing {

inline ComplexMatrix random_hermitian(std::size_t n, Rng& rng, double scale = 1.0) {
    ComplexMatrix h(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        h(i, i) = cplx(scale * (2.0 * rng.uniform() - 1.0), 0.0);
        for (std::size_t j = i + 1; j < n; ++j) {
            const cplx z(scale * (2.0 * rng.uniform() - 1.0), scale * (2.0 * rng.uniform() - 1.0));
            h(i, j) = z;
            h(j, i) = std::conj(z);
        }
    }
    return h;
}

inline ComplexMatrix random_unitary(std::size_t n, Rng& rng) {
    // exp(-i H) of a random Hermitian is Haar-ish enough for test purposes
    return unitary_step(random_hermitian(n, rng, 2.0), 1.0);
}

// Central finite difference of exp(-i (H + eps dH) dt) along dH.
inline ComplexMatrix frechet_central_fd(const ComplexMatrix& h, const ComplexMatrix& dh,
                                        double dt, double eps = 1e-6) {
    ComplexMatrix hp = h, hm = h;
    for (std::size_t i = 0; i < h.rows(); ++i)
        for (std::size_t j = 0; j < h.cols(); ++j) {
            hp(i, j) += eps * dh(i, j);
            hm(i, j) -= eps * dh(i, j);
        }
    ComplexMatrix up = unitary_step(hp, dt);
    ComplexMatrix um = unitary_step(hm, dt);
    ComplexMatrix out(h.rows(), h.cols());
    for (std::size_t i = 0; i < h.rows(); ++i)
        for (std::size_t j = 0; j < h.cols(); ++j) out(i, j) = (up(i, j) - um(i, j)) / (2.0 * eps);
    return out;
}

// Relative max-norm deviation between two matrices.
inline double rel_max_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
    const double scale = std::max(max_abs(b), 1e-300);
    return max_abs_diff(a, b) / scale;
}

}  // namespace czopt::testing
