#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "czopt/circuit.hpp"
#include "czopt/numerics.hpp"

namespace czopt {

// Piecewise-constant coupler-frequency schedule: one value per step of
// length step_ns, gate_time_ns = steps * step_ns.
struct PulseSchedule {
    double gate_time_ns = 10.0;
    double step_ns = 1.0;
    std::vector<double> values_ghz;
    double lo_ghz = 4.2;
    double hi_ghz = 6.38;

    std::size_t steps() const { return values_ghz.size(); }
    void validate() const;

    // empty schedule carrying only the shape (used as an optimizer/RL template)
    static PulseSchedule shape(double gate_time_ns, double step_ns, double lo, double hi) {
        PulseSchedule s;
        s.gate_time_ns = gate_time_ns;
        s.step_ns = step_ns;
        s.lo_ghz = lo;
        s.hi_ghz = hi;
        return s;
    }
    std::size_t shape_steps() const;  // round(gate_time/step) with divisibility check
};

// Logistic rise/fall smoothing of a schedule: each step transition becomes a
// logistic edge of width width_ns; the waveform starts and ends at idle_ghz.
struct SmoothedPulse {
    PulseSchedule base;
    double width_ns = 0.1;
    double sub_step_ns = 0.05;
    double idle_ghz = 6.38;
    void validate() const;
};

struct PhaseFit {
    double fidelity = 0.0;
    double beta1 = 0.0;
    double beta2 = 0.0;
};

struct GateEvaluation {
    ComplexMatrix u_comp;  // 4x4 computational block, basis order 000,001,100,101
    double fidelity = 0.0;
    double beta1 = 0.0;
    double beta2 = 0.0;
    double leakage = 0.0;
    std::vector<LevelLabel> tracked;
    std::size_t recorded_steps = 0;
    // populations[step][initial comp state][tracked label], flattened
    std::vector<double> populations;

    double population(std::size_t step, std::size_t init, std::size_t label_idx) const {
        return populations[(step * 4 + init) * tracked.size() + label_idx];
    }
};

// Computational set plus the leakage states that matter for this gate.
const std::vector<LevelLabel>& default_tracked_labels();

// Incremental propagator for the four computational columns under
// piecewise-constant coupler drive; shared by propagate() and the RL
// environment so both score a pulse identically.
class StepPropagator {
public:
    // w1_gate defaults to the calibrated value w2 + a2 computed from p; pass
    // an explicit value when the circuit's idle parameters are perturbed but
    // the pulse program's qubit-1 setting stays at its nominal calibration.
    StepPropagator(const CircuitParams& p, double step_ns,
                   std::optional<double> w1_gate_ghz = std::nullopt);

    void reset();
    void apply(double wc_ghz);                    // one step of length step_ns
    void apply(double wc_ghz, double dt_ns);      // arbitrary-length sub-step

    std::size_t steps_taken() const { return steps_; }
    const LabeledBasis& basis() const { return idle_; }
    const CircuitParams& params() const { return params_; }
    double step_ns() const { return dt_; }

    // populations of the tracked labels for each of the four initial states
    std::vector<double> populations(const std::vector<LevelLabel>& tracked) const;
    ComplexMatrix comp_block() const;  // 4x4 in the labeled idle eigenbasis

private:
    CircuitParams params_;
    LabeledBasis idle_;
    double dt_;
    double w1_gate_;
    std::size_t steps_ = 0;
    ComplexMatrix cols_;       // dim x 4 propagated computational columns
    ComplexMatrix comp_init_;  // dim x 4 idle eigenvectors of 000,001,100,101
};

GateEvaluation propagate(const CircuitParams& p, const PulseSchedule& sched,
                         const std::vector<LevelLabel>& tracked = default_tracked_labels(),
                         std::optional<double> w1_gate_ghz = std::nullopt);

// Waveform value of the smoothed pulse at time t (ns).
double smoothed_value(const SmoothedPulse& sp, double t_ns);
// Samples (t, wc) at sub_step resolution, edges included.
std::vector<std::pair<double, double>> smooth_pulse(const SmoothedPulse& sp);

struct ResolutionError : std::runtime_error {
    ResolutionError(const std::string& what, double f_coarse, double f_fine)
        : std::runtime_error(what), fidelity_coarse(f_coarse), fidelity_fine(f_fine) {}
    double fidelity_coarse, fidelity_fine;
};

// Propagates the smoothed waveform at sub_step resolution and verifies the
// result is converged: halving the sub-step must change F by < 1e-8.
GateEvaluation propagate_smoothed(const CircuitParams& p, const SmoothedPulse& sp,
                                  const std::vector<LevelLabel>& tracked = default_tracked_labels());

// Average gate fidelity of the computational block against CZ after virtual-Z
// compensation: F = max_beta [Tr(M^dag M) + |Tr M|^2] / 20 with
// M = U_CZ^dag diag(1, e^{i b2}, e^{i b1}, e^{i(b1+b2)}) u_comp.
PhaseFit cz_fidelity(const ComplexMatrix& u_comp);

// Entanglement (process) fidelity for the same compensated block; related to
// the average gate fidelity by F_avg = (4 F_pro + Tr(M^dag M)/4) / 5.
double process_fidelity(const ComplexMatrix& u_comp);

double leakage(const ComplexMatrix& u_comp);

// R = -log10(1 - F), capped at 12.
double reward(double fidelity);

}  // namespace czopt
