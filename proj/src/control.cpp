#include "czopt/control.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

namespace czopt {

namespace {

constexpr double kPi = 3.14159265358979323846;

double logistic(double x) {
    // numerically stable on both tails
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double wrap_angle(double a) {
    while (a > kPi) a -= 2.0 * kPi;
    while (a <= -kPi) a += 2.0 * kPi;
    return a;
}

// |z0 + z1 e^{i b2} + z2 e^{i b1} + z3 e^{i(b1+b2)}|^2 and its derivatives.
struct PhaseObjective {
    cplx z0, z1, z2, z3;

    double value(double b1, double b2) const {
        const cplx a = std::polar(1.0, b1), b = std::polar(1.0, b2);
        return std::norm(z0 + z1 * b + z2 * a + z3 * a * b);
    }

    void grad_hess(double b1, double b2, double g[2], double h[3]) const {
        const cplx a = std::polar(1.0, b1), b = std::polar(1.0, b2);
        const cplx t = z0 + z1 * b + z2 * a + z3 * a * b;
        const cplx i(0.0, 1.0);
        const cplx t1 = i * a * (z2 + z3 * b);
        const cplx t2 = i * b * (z1 + z3 * a);
        const cplx t11 = -a * (z2 + z3 * b);
        const cplx t22 = -b * (z1 + z3 * a);
        const cplx t12 = -a * b * z3;
        g[0] = 2.0 * std::real(std::conj(t) * t1);
        g[1] = 2.0 * std::real(std::conj(t) * t2);
        h[0] = 2.0 * std::real(std::conj(t1) * t1 + std::conj(t) * t11);
        h[1] = 2.0 * std::real(std::conj(t2) * t1 + std::conj(t) * t12);
        h[2] = 2.0 * std::real(std::conj(t2) * t2 + std::conj(t) * t22);
    }
};

// Nelder-Mead on the 2-torus for the phase objective (maximization).
void nelder_mead(const PhaseObjective& obj, double& b1, double& b2) {
    struct Vertex {
        double x[2];
        double f;  // negated objective
    };
    auto eval = [&](const double x[2]) { return -obj.value(x[0], x[1]); };
    Vertex v[3];
    const double init[3][2] = {{b1, b2}, {b1 + 0.25, b2}, {b1, b2 + 0.25}};
    for (int i = 0; i < 3; ++i) {
        v[i].x[0] = init[i][0];
        v[i].x[1] = init[i][1];
        v[i].f = eval(v[i].x);
    }
    for (int iter = 0; iter < 400; ++iter) {
        std::sort(v, v + 3, [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
        const double size = std::max(
            std::hypot(v[1].x[0] - v[0].x[0], v[1].x[1] - v[0].x[1]),
            std::hypot(v[2].x[0] - v[0].x[0], v[2].x[1] - v[0].x[1]));
        if (size < 1e-12) break;
        double c[2] = {0.5 * (v[0].x[0] + v[1].x[0]), 0.5 * (v[0].x[1] + v[1].x[1])};
        double xr[2] = {2.0 * c[0] - v[2].x[0], 2.0 * c[1] - v[2].x[1]};
        const double fr = eval(xr);
        if (fr < v[0].f) {
            double xe[2] = {c[0] + 2.0 * (xr[0] - c[0]), c[1] + 2.0 * (xr[1] - c[1])};
            const double fe = eval(xe);
            if (fe < fr) {
                v[2] = {{xe[0], xe[1]}, fe};
            } else {
                v[2] = {{xr[0], xr[1]}, fr};
            }
        } else if (fr < v[1].f) {
            v[2] = {{xr[0], xr[1]}, fr};
        } else {
            double xc[2] = {c[0] + 0.5 * (v[2].x[0] - c[0]), c[1] + 0.5 * (v[2].x[1] - c[1])};
            const double fc = eval(xc);
            if (fc < v[2].f) {
                v[2] = {{xc[0], xc[1]}, fc};
            } else {
                for (int i = 1; i < 3; ++i) {
                    v[i].x[0] = 0.5 * (v[i].x[0] + v[0].x[0]);
                    v[i].x[1] = 0.5 * (v[i].x[1] + v[0].x[1]);
                    v[i].f = eval(v[i].x);
                }
            }
        }
    }
    std::sort(v, v + 3, [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
    b1 = v[0].x[0];
    b2 = v[0].x[1];
}

}  // namespace

void PulseSchedule::validate() const {
    if (step_ns <= 0.0) throw PreconditionError("PulseSchedule: step length must be positive");
    const double n_exact = gate_time_ns / step_ns;
    const auto n = static_cast<std::size_t>(std::llround(n_exact));
    if (n == 0 || std::abs(static_cast<double>(n) * step_ns - gate_time_ns) > 1e-9)
        throw PreconditionError("PulseSchedule: step length must divide the gate time");
    if (values_ghz.size() != n)
        throw PreconditionError("PulseSchedule: expected " + std::to_string(n) + " values, got " +
                                std::to_string(values_ghz.size()));
    if (lo_ghz >= hi_ghz) throw PreconditionError("PulseSchedule: empty bounds interval");
    for (double v : values_ghz)
        if (v < lo_ghz || v > hi_ghz)
            throw PreconditionError("PulseSchedule: value " + std::to_string(v) + " outside bounds");
}

std::size_t PulseSchedule::shape_steps() const {
    if (step_ns <= 0.0) throw PreconditionError("PulseSchedule: step length must be positive");
    const auto n = static_cast<std::size_t>(std::llround(gate_time_ns / step_ns));
    if (n == 0 || std::abs(static_cast<double>(n) * step_ns - gate_time_ns) > 1e-9)
        throw PreconditionError("PulseSchedule: step length must divide the gate time");
    return n;
}

void SmoothedPulse::validate() const {
    base.validate();
    if (width_ns <= 0.0) throw PreconditionError("SmoothedPulse: width must be positive");
    if (sub_step_ns <= 0.0 || sub_step_ns > base.step_ns / 10.0 + 1e-15)
        throw PreconditionError("SmoothedPulse: sub-step must be positive and <= step/10");
}

const std::vector<LevelLabel>& default_tracked_labels() {
    static const std::vector<LevelLabel> labels = {
        {0, 0, 0}, {0, 0, 1}, {1, 0, 0}, {1, 0, 1}, {0, 1, 0},
        {1, 1, 0}, {0, 1, 1}, {0, 0, 2}, {2, 0, 0}};
    return labels;
}

StepPropagator::StepPropagator(const CircuitParams& p, double step_ns,
                               std::optional<double> w1_gate_ghz)
    : params_(p),
      idle_(idle_eigenbasis(p)),
      dt_(step_ns),
      w1_gate_(w1_gate_ghz.value_or(p.gate_w1())) {
    const std::size_t dim = idle_.dim();
    comp_init_ = ComplexMatrix(dim, 4);
    const auto& comp = computational_labels();
    for (std::size_t c = 0; c < 4; ++c) {
        const int col = idle_.column_of(comp[c]);
        for (std::size_t r = 0; r < dim; ++r) comp_init_(r, c) = idle_.eig().eigenvectors(r, col);
    }
    cols_ = comp_init_;
}

void StepPropagator::reset() {
    cols_ = comp_init_;
    steps_ = 0;
}

void StepPropagator::apply(double wc_ghz, double dt_ns) {
    const HermEig eig = herm_eig(build_hamiltonian(params_, wc_ghz, w1_gate_));
    evolve_columns(eig, dt_ns, cols_);
    ++steps_;
}

void StepPropagator::apply(double wc_ghz) { apply(wc_ghz, dt_); }

std::vector<double> StepPropagator::populations(const std::vector<LevelLabel>& tracked) const {
    const std::size_t dim = idle_.dim();
    std::vector<double> out(4 * tracked.size());
    for (std::size_t c = 0; c < 4; ++c) {
        for (std::size_t t = 0; t < tracked.size(); ++t) {
            const int col = idle_.column_of(tracked[t]);
            cplx amp(0.0, 0.0);
            for (std::size_t r = 0; r < dim; ++r)
                amp += std::conj(idle_.eig().eigenvectors(r, col)) * cols_(r, c);
            out[c * tracked.size() + t] = std::norm(amp);
        }
    }
    return out;
}

ComplexMatrix StepPropagator::comp_block() const {
    const std::size_t dim = idle_.dim();
    ComplexMatrix block(4, 4);
    const auto& comp = computational_labels();
    for (std::size_t r = 0; r < 4; ++r) {
        const int col = idle_.column_of(comp[r]);
        for (std::size_t c = 0; c < 4; ++c) {
            cplx amp(0.0, 0.0);
            for (std::size_t q = 0; q < dim; ++q)
                amp += std::conj(idle_.eig().eigenvectors(q, col)) * cols_(q, c);
            block(r, c) = amp;
        }
    }
    return block;
}

namespace {

GateEvaluation finish_evaluation(const StepPropagator& prop,
                                 const std::vector<LevelLabel>& tracked,
                                 std::vector<double> populations, std::size_t recorded_steps) {
    GateEvaluation ev;
    ev.u_comp = prop.comp_block();
    const PhaseFit fit = cz_fidelity(ev.u_comp);
    ev.fidelity = fit.fidelity;
    ev.beta1 = fit.beta1;
    ev.beta2 = fit.beta2;
    ev.leakage = leakage(ev.u_comp);
    ev.tracked = tracked;
    ev.populations = std::move(populations);
    ev.recorded_steps = recorded_steps;
    return ev;
}

}  // namespace

GateEvaluation propagate(const CircuitParams& p, const PulseSchedule& sched,
                         const std::vector<LevelLabel>& tracked,
                         std::optional<double> w1_gate_ghz) {
    sched.validate();
    StepPropagator prop(p, sched.step_ns, w1_gate_ghz);
    std::vector<double> pops;
    pops.reserve(sched.steps() * 4 * tracked.size());
    for (double wc : sched.values_ghz) {
        prop.apply(wc);
        const std::vector<double> step_pops = prop.populations(tracked);
        pops.insert(pops.end(), step_pops.begin(), step_pops.end());
    }
    return finish_evaluation(prop, tracked, std::move(pops), sched.steps());
}

double smoothed_value(const SmoothedPulse& sp, double t_ns) {
    const PulseSchedule& s = sp.base;
    const std::size_t n = s.steps();
    double v = sp.idle_ghz;
    double prev = sp.idle_ghz;
    for (std::size_t k = 0; k <= n; ++k) {
        const double next = (k < n) ? s.values_ghz[k] : sp.idle_ghz;
        v += (next - prev) * logistic((t_ns - static_cast<double>(k) * s.step_ns) / sp.width_ns);
        prev = next;
    }
    return v;
}

std::vector<std::pair<double, double>> smooth_pulse(const SmoothedPulse& sp) {
    sp.validate();
    const double tau = sp.base.gate_time_ns;
    const auto samples = static_cast<std::size_t>(
        std::max<long long>(1, std::llround(tau / sp.sub_step_ns)));
    const double dt = tau / static_cast<double>(samples);
    std::vector<std::pair<double, double>> out;
    out.reserve(samples + 1);
    for (std::size_t s = 0; s <= samples; ++s) {
        const double t = static_cast<double>(s) * dt;
        out.emplace_back(t, smoothed_value(sp, t));
    }
    return out;
}

namespace {

// midpoint-sampled piecewise-constant propagation of the smoothed waveform
GateEvaluation propagate_smoothed_at(const CircuitParams& p, const SmoothedPulse& sp,
                                     std::size_t samples,
                                     const std::vector<LevelLabel>& tracked) {
    const double tau = sp.base.gate_time_ns;
    const double dt = tau / static_cast<double>(samples);
    StepPropagator prop(p, dt);
    std::vector<double> pops;
    pops.reserve(samples * 4 * tracked.size());
    for (std::size_t s = 0; s < samples; ++s) {
        const double t_mid = (static_cast<double>(s) + 0.5) * dt;
        prop.apply(smoothed_value(sp, t_mid), dt);
        const std::vector<double> step_pops = prop.populations(tracked);
        pops.insert(pops.end(), step_pops.begin(), step_pops.end());
    }
    return finish_evaluation(prop, tracked, std::move(pops), samples);
}

}  // namespace

GateEvaluation propagate_smoothed(const CircuitParams& p, const SmoothedPulse& sp,
                                  const std::vector<LevelLabel>& tracked) {
    sp.validate();
    const double tau = sp.base.gate_time_ns;
    auto samples = static_cast<std::size_t>(
        std::max<long long>(1, std::llround(tau / sp.sub_step_ns)));
    GateEvaluation coarse = propagate_smoothed_at(p, sp, samples, tracked);
    // near-hard edges need deep refinement: the midpoint-rule error decays
    // as the square of the sub-step
    for (int refinement = 0; refinement < 10; ++refinement) {
        GateEvaluation fine = propagate_smoothed_at(p, sp, samples * 2, tracked);
        if (std::abs(fine.fidelity - coarse.fidelity) < 1e-8) return fine;
        samples *= 2;
        coarse = std::move(fine);
    }
    GateEvaluation fine = propagate_smoothed_at(p, sp, samples * 2, tracked);
    if (std::abs(fine.fidelity - coarse.fidelity) < 1e-8) return fine;
    throw ResolutionError("propagate_smoothed: sub-step refinement did not converge",
                          coarse.fidelity, fine.fidelity);
}

PhaseFit cz_fidelity(const ComplexMatrix& u) {
    if (u.rows() != 4 || u.cols() != 4) throw PreconditionError("cz_fidelity: expected a 4x4 block");
    if (!u.all_finite()) throw PreconditionError("cz_fidelity: non-finite entries");

    double tr_mm = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) tr_mm += std::norm(u(i, j));

    // global phase reference: make the 000 diagonal entry real positive
    const cplx m00 = u(0, 0);
    const cplx gphase =
        (std::abs(m00) > 0.0) ? std::conj(m00) / std::abs(m00) : cplx(1.0, 0.0);

    PhaseObjective obj{gphase * u(0, 0), gphase * u(1, 1), gphase * u(2, 2), -gphase * u(3, 3)};

    // analytic seed, exact when the conditional phase is exactly pi
    auto safe_arg = [](const cplx& z) { return (std::abs(z) > 0.0) ? std::arg(z) : 0.0; };
    double b1 = safe_arg(obj.z0) - safe_arg(obj.z2);
    double b2 = safe_arg(obj.z0) - safe_arg(obj.z1);

    // The objective can carry several near-degenerate maxima; a grid start
    // alone may land in the wrong basin. Monotone alternating coordinate
    // ascent from every grid point (plus the analytic seed) is cheap and
    // finds the global basin reliably.
    auto alternate = [&](double s1, double s2) {
        for (int it = 0; it < 60; ++it) {
            const cplx e2 = std::polar(1.0, s2);
            const cplx w1 = obj.z0 + obj.z1 * e2, w2 = obj.z2 + obj.z3 * e2;
            if (std::abs(w1) > 0.0 && std::abs(w2) > 0.0) s1 = std::arg(w1 * std::conj(w2));
            const cplx e1 = std::polar(1.0, s1);
            const cplx u1 = obj.z0 + obj.z2 * e1, u2 = obj.z1 + obj.z3 * e1;
            if (std::abs(u1) > 0.0 && std::abs(u2) > 0.0) s2 = std::arg(u1 * std::conj(u2));
        }
        return std::pair<double, double>(s1, s2);
    };
    double best = -1.0;
    for (int i = 0; i <= 16; ++i) {
        for (int j = 0; j < 16; ++j) {
            double c1, c2;
            if (i == 16) {  // analytic seed rides along as one more start
                if (j > 0) break;
                c1 = b1;
                c2 = b2;
            } else {
                c1 = -kPi + (2.0 * kPi * i) / 16.0;
                c2 = -kPi + (2.0 * kPi * j) / 16.0;
            }
            const auto [s1, s2] = alternate(c1, c2);
            const double f = obj.value(s1, s2);
            if (f > best) {
                best = f;
                b1 = s1;
                b2 = s2;
            }
        }
    }

    nelder_mead(obj, b1, b2);

    // Newton polish to machine precision; the analytic pulse gradient relies
    // on the phase optimum being tight (envelope condition).
    for (int it = 0; it < 20; ++it) {
        double g[2], h[3];
        obj.grad_hess(b1, b2, g, h);
        const double det = h[0] * h[2] - h[1] * h[1];
        if (det <= 0.0) break;  // not a strict interior maximum; keep NM result
        const double s1 = (-g[0] * h[2] + g[1] * h[1]) / det;
        const double s2 = (-h[0] * g[1] + h[1] * g[0]) / det;
        if (std::hypot(s1, s2) > 0.5) break;
        b1 += s1;
        b2 += s2;
        if (std::hypot(g[0], g[1]) < 1e-13 * std::max(1.0, obj.value(b1, b2))) break;
    }

    PhaseFit fit;
    fit.beta1 = wrap_angle(b1);
    fit.beta2 = wrap_angle(b2);
    fit.fidelity = std::clamp((tr_mm + obj.value(b1, b2)) / 20.0, 0.0, 1.0);
    return fit;
}

double process_fidelity(const ComplexMatrix& u) {
    const PhaseFit fit = cz_fidelity(u);
    const cplx m00 = u(0, 0);
    const cplx gphase =
        (std::abs(m00) > 0.0) ? std::conj(m00) / std::abs(m00) : cplx(1.0, 0.0);
    const PhaseObjective obj{gphase * u(0, 0), gphase * u(1, 1), gphase * u(2, 2),
                             -gphase * u(3, 3)};
    return std::clamp(obj.value(fit.beta1, fit.beta2) / 16.0, 0.0, 1.0);
}

double leakage(const ComplexMatrix& u) {
    if (u.rows() != 4 || u.cols() != 4) throw PreconditionError("leakage: expected a 4x4 block");
    double tr = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) tr += std::norm(u(i, j));
    return 1.0 - tr / 4.0;
}

double reward(double fidelity) {
    if (fidelity < 0.0 || fidelity > 1.0)
        throw PreconditionError("reward: fidelity must lie in [0, 1]");
    const double infid = 1.0 - fidelity;
    if (infid < 1e-12) return 12.0;
    return std::min(12.0, -std::log10(infid));
}

}  // namespace czopt
