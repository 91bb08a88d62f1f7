#include "czopt/gradopt.hpp"

#include <algorithm>
#include <cmath>

namespace czopt {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// V^dag cols for a dim x 4 block
ComplexMatrix project(const HermEig& eig, const ComplexMatrix& cols) {
    return matmul(adjoint(eig.eigenvectors), cols);
}

}  // namespace

void OptimizerConfig::validate() const {
    if (lr <= 0.0) throw PreconditionError("OptimizerConfig: learning rate must be positive");
    if (tol <= 0.0) throw PreconditionError("OptimizerConfig: tolerance must be positive");
    if (max_iters < 0 || patience < 1 || restarts < 1)
        throw PreconditionError("OptimizerConfig: invalid iteration counts");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw PreconditionError("OptimizerConfig: moment decays must lie in [0, 1)");
}

GradResult infidelity_and_gradient(const CircuitParams& p, const PulseSchedule& sched) {
    sched.validate();
    const std::size_t n = sched.steps();
    const double dt = sched.step_ns;
    const LabeledBasis idle = idle_eigenbasis(p);
    const std::size_t dim = idle.dim();
    const double w1_gate = p.gate_w1();

    ComplexMatrix comp_init(dim, 4);
    const auto& comp = computational_labels();
    for (std::size_t c = 0; c < 4; ++c) {
        const int col = idle.column_of(comp[c]);
        for (std::size_t r = 0; r < dim; ++r) comp_init(r, c) = idle.eig().eigenvectors(r, col);
    }

    // forward pass: store per-step eigendecompositions and propagated columns
    std::vector<HermEig> eigs(n);
    std::vector<ComplexMatrix> fwd(n + 1);
    fwd[0] = comp_init;
    for (std::size_t k = 0; k < n; ++k) {
        eigs[k] = herm_eig(build_hamiltonian(p, sched.values_ghz[k], w1_gate));
        fwd[k + 1] = fwd[k];
        evolve_columns(eigs[k], dt, fwd[k + 1]);
    }

    // backward pass: bwd[k] = U_k^dag ... U_{n-1}^dag comp_init
    std::vector<ComplexMatrix> bwd(n + 1);
    bwd[n] = comp_init;
    for (std::size_t k = n; k-- > 0;) {
        bwd[k] = bwd[k + 1];
        evolve_columns(eigs[k], dt, bwd[k], -1);
    }

    // computational block and the fidelity cotangent at the phase optimum
    ComplexMatrix u(4, 4);
    for (std::size_t r = 0; r < 4; ++r) {
        const int col = idle.column_of(comp[r]);
        for (std::size_t c = 0; c < 4; ++c) {
            cplx amp(0.0, 0.0);
            for (std::size_t q = 0; q < dim; ++q)
                amp += std::conj(idle.eig().eigenvectors(q, col)) * fwd[n](q, c);
            u(r, c) = amp;
        }
    }
    const PhaseFit fit = cz_fidelity(u);
    const cplx w_diag[4] = {cplx(1.0, 0.0), std::polar(1.0, fit.beta2),
                            std::polar(1.0, fit.beta1), -std::polar(1.0, fit.beta1 + fit.beta2)};
    cplx tr_m(0.0, 0.0);
    for (int l = 0; l < 4; ++l) tr_m += w_diag[l] * u(l, l);
    // dF = 0.1 Re Tr[(u^dag + conj(TrM) W) du]
    ComplexMatrix cotangent = adjoint(u);
    for (int l = 0; l < 4; ++l) cotangent(l, l) += std::conj(tr_m) * w_diag[l];

    GradResult out;
    out.infidelity = 1.0 - fit.fidelity;
    out.grad.assign(n, 0.0);

    // occupancy of the coupler mode per basis state (dH/dwc = 2 pi diag(j))
    std::vector<double> coupler_n(dim);
    for (std::size_t flat = 0; flat < dim; ++flat) coupler_n[flat] = idle.label_at(flat).j;

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ks = 0; ks < static_cast<std::ptrdiff_t>(n); ++ks) {
        const auto k = static_cast<std::size_t>(ks);
        const HermEig& eig = eigs[k];
        const ComplexMatrix& v = eig.eigenvectors;

        // dH in the step eigenbasis: 2 pi V^dag diag(j) V
        ComplexMatrix scaled(dim, dim);
        for (std::size_t r = 0; r < dim; ++r) {
            const double jr = kTwoPi * coupler_n[r];
            for (std::size_t c = 0; c < dim; ++c) scaled(r, c) = jr * v(r, c);
        }
        ComplexMatrix dht = matmul(adjoint(v), scaled);

        // divided differences of exp(-i lambda dt)
        double lmax = 0.0;
        for (double lam : eig.eigenvalues) lmax = std::max(lmax, std::abs(lam));
        const double tol = 1e-9 * lmax;
        std::vector<cplx> ph(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            const double ang = -eig.eigenvalues[i] * dt;
            ph[i] = cplx(std::cos(ang), std::sin(ang));
        }
        for (std::size_t a = 0; a < dim; ++a)
            for (std::size_t b = 0; b < dim; ++b) {
                const double dl = eig.eigenvalues[a] - eig.eigenvalues[b];
                const cplx w = (std::abs(dl) > tol) ? (ph[a] - ph[b]) / dl
                                                    : cplx(0.0, -dt) * ph[a];
                dht(a, b) *= w;
            }

        const ComplexMatrix pf = project(eig, fwd[k]);
        const ComplexMatrix pb = project(eig, bwd[k + 1]);
        const ComplexMatrix mid = matmul(dht, pf);        // dim x 4
        const ComplexMatrix blk = matmul(adjoint(pb), mid);  // 4 x 4

        // dI/dwc_k = -0.1 Re Tr[cotangent blk]
        cplx tr(0.0, 0.0);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) tr += cotangent(r, c) * blk(c, r);
        out.grad[k] = -0.1 * tr.real();
    }
    return out;
}

RefineResult refine(const CircuitParams& p, const PulseSchedule& init, const OptimizerConfig& cfg,
                    const RefineObserver& observer) {
    init.validate();
    cfg.validate();
    const std::size_t n = init.steps();

    PulseSchedule x = init;
    GradResult gr = infidelity_and_gradient(p, x);

    RefineResult res;
    res.best = x;
    res.best_infidelity = gr.infidelity;
    res.trace.reserve(cfg.max_iters + 1);
    res.trace.push_back(gr.infidelity);
    if (observer) observer(0, x, gr);

    std::vector<double> m(n, 0.0), v(n, 0.0);
    int stall = 0;
    for (int t = 1; t <= cfg.max_iters; ++t) {
        for (double g : gr.grad)
            if (!std::isfinite(g))
                throw NumericalError("refine: non-finite gradient at iteration " + std::to_string(t),
                                     t);
        const double bc1 = 1.0 - std::pow(cfg.beta1, t);
        const double bc2 = 1.0 - std::pow(cfg.beta2, t);
        for (std::size_t k = 0; k < n; ++k) {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gr.grad[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gr.grad[k] * gr.grad[k];
            const double step = cfg.lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + 1e-8);
            x.values_ghz[k] = std::clamp(x.values_ghz[k] - step, x.lo_ghz, x.hi_ghz);
        }
        const double prev = gr.infidelity;
        gr = infidelity_and_gradient(p, x);
        res.trace.push_back(gr.infidelity);
        if (observer) observer(t, x, gr);
        if (gr.infidelity < res.best_infidelity) {
            res.best_infidelity = gr.infidelity;
            res.best = x;
        }
        stall = (std::abs(gr.infidelity - prev) < cfg.tol) ? stall + 1 : 0;
        if (stall >= cfg.patience) break;
    }
    return res;
}

PulseSchedule naive_ansatz(AnsatzKind kind, const PulseSchedule& shape, double idle_ghz, Rng& rng) {
    const std::size_t n = shape.shape_steps();
    PulseSchedule s = shape;
    s.values_ghz.assign(n, 0.0);
    const double idle = std::clamp(idle_ghz, s.lo_ghz, s.hi_ghz);
    switch (kind) {
        case AnsatzKind::Constant: {
            const double mid = 0.5 * (s.lo_ghz + s.hi_ghz);
            std::fill(s.values_ghz.begin(), s.values_ghz.end(), mid);
            break;
        }
        case AnsatzKind::Ramp: {
            for (std::size_t k = 0; k < n; ++k) {
                const double x = (n > 1) ? static_cast<double>(k) / (n - 1) : 0.5;
                const double tri = 1.0 - 2.0 * std::abs(x - 0.5);  // 0 at ends, 1 mid
                s.values_ghz[k] = idle + (s.lo_ghz - idle) * tri;
            }
            break;
        }
        case AnsatzKind::Random: {
            for (std::size_t k = 0; k < n; ++k) s.values_ghz[k] = rng.uniform(s.lo_ghz, s.hi_ghz);
            break;
        }
    }
    return s;
}

}  // namespace czopt
