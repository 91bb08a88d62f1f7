#pragma once

#include <functional>
#include <vector>

#include "czopt/circuit.hpp"
#include "czopt/control.hpp"
#include "czopt/rng.hpp"

namespace czopt {

struct GradResult {
    double infidelity = 0.0;
    std::vector<double> grad;  // dI/dwc per step, 1/GHz
};

enum class BoundMode { Clamp };

struct OptimizerConfig {
    int max_iters = 2000;
    double lr = 3e-3;  // GHz per step
    double beta1 = 0.9;
    double beta2 = 0.999;
    BoundMode bound_mode = BoundMode::Clamp;
    double tol = 1e-14;  // convergence tolerance on |dI| between iterations
    int patience = 200;  // consecutive small-|dI| iterations before stopping
    int restarts = 5;    // ansatz count for the naive multi-start experiment
    void validate() const;
};

// Analytic gradient of the CZ infidelity with respect to the per-step coupler
// frequencies: chain rule over the step propagators with the directional
// exponential derivative, phases held at their optimum (envelope condition).
GradResult infidelity_and_gradient(const CircuitParams& p, const PulseSchedule& sched);

struct RefineResult {
    PulseSchedule best;
    double best_infidelity = 1.0;
    std::vector<double> trace;  // evaluated infidelity per iteration (index 0 = initial)
};

using RefineObserver =
    std::function<void(int iter, const PulseSchedule& current, const GradResult& gr)>;

// Bound-clamped Adam on the schedule values; returns the best-ever schedule.
RefineResult refine(const CircuitParams& p, const PulseSchedule& init, const OptimizerConfig& cfg,
                    const RefineObserver& observer = {});

enum class AnsatzKind { Constant, Ramp, Random };

// constant = bound midpoint; ramp = idle -> lower bound -> idle V shape;
// random = uniform within bounds from the given stream.
PulseSchedule naive_ansatz(AnsatzKind kind, const PulseSchedule& shape, double idle_ghz, Rng& rng);

}  // namespace czopt
