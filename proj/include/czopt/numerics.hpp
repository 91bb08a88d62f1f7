#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace czopt {

using cplx = std::complex<double>;

// Dense row-major complex matrix. Dimensions in this project stay small
// (d^3 <= 125), so everything is dense and value-semantic.
class ComplexMatrix {
public:
    ComplexMatrix() = default;
    ComplexMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols) {}

    static ComplexMatrix identity(std::size_t n) {
        ComplexMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    cplx* row(std::size_t r) { return data_.data() + r * cols_; }
    const cplx* row(std::size_t r) const { return data_.data() + r * cols_; }

    cplx* data() { return data_.data(); }
    const cplx* data() const { return data_.data(); }

    bool all_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

struct PreconditionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NumericalError : std::runtime_error {
    NumericalError(const std::string& what, int iterations)
        : std::runtime_error(what), iterations(iterations) {}
    int iterations = 0;
};

// C = A * B. The OpenMP kernel splits output rows across threads; each entry
// is accumulated in a fixed order, so results are identical to the serial
// kernel bit for bit and independent of the thread count.
ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix matmul_serial(const ComplexMatrix& a, const ComplexMatrix& b);

ComplexMatrix adjoint(const ComplexMatrix& a);

double max_abs(const ComplexMatrix& a);
double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b);
// max |H - H^dag| entry
double hermiticity_residual(const ComplexMatrix& h);

struct HermEig {
    std::vector<double> eigenvalues;  // ascending
    ComplexMatrix eigenvectors;       // unitary; column c pairs with eigenvalues[c]
};

// Hermitian eigendecomposition: Householder tridiagonalization followed by
// implicit-shift QL. Throws PreconditionError on non-square / non-Hermitian
// input and NumericalError (with the iteration count) if QL fails to
// converge within 30 sweeps per eigenvalue.
HermEig herm_eig(const ComplexMatrix& h);

// U = exp(-i H dt) via the eigendecomposition of H. dt in ns, H in rad/ns.
ComplexMatrix unitary_step(const ComplexMatrix& h, double dt_ns);
ComplexMatrix unitary_step(const HermEig& eig, double dt_ns);

// Directional derivative of exp(-i H dt) along dH (Daleckii-Krein divided
// differences in the eigenbasis of H). Degenerate pairs |la - lb| below
// 1e-9 * max|lambda| take the confluent limit -i dt e^{-i la dt}.
ComplexMatrix expm_frechet(const ComplexMatrix& h, const ComplexMatrix& dh, double dt_ns);

// cols <- V diag(e^{-i sign lambda dt}) V^dag cols; shared by the propagators.
void evolve_columns(const HermEig& eig, double dt_ns, ComplexMatrix& cols, int sign = +1);

}  // namespace czopt
