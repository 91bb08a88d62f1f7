#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "czopt/config.hpp"
#include "czopt/control.hpp"
#include "czopt/sac.hpp"

namespace czopt {

inline constexpr const char* kArtifactVersion = "czopt 0.1.0";

struct RunManifest {
    std::string command;
    std::string config_json;  // effective configuration echo
    std::string version = kArtifactVersion;
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
    double final_fidelity = -1.0;          // average gate fidelity
    double final_process_fidelity = -1.0;  // entanglement fidelity of the same block
    double final_leakage = -1.0;
    double rl_stage_fidelity = -1.0;
    std::vector<std::string> files;  // paths relative to the run directory
    bool failed = false;
    std::string error;

    // written atomically (tmp + rename)
    void write(const std::string& path) const;
};

std::string run_config_json(const RunConfig& cfg);

void save_pulse(const std::string& path, const PulseSchedule& s);
PulseSchedule load_pulse(const std::string& path);

void save_checkpoint(const std::string& path, const SacAgent& agent);
// restores networks, config and RNG state; obs_dim comes from the file
SacAgent load_checkpoint(const std::string& path);

// Outcome of one optimization cell (one method at one gate time and seed).
struct OptimizeOutcome {
    PulseSchedule pulse;
    double fidelity = 0.0;
    double leakage = 0.0;
    double rl_stage_fidelity = -1.0;           // only for rl-backed methods
    std::vector<CurvePoint> curve;             // rl learning curve
    std::vector<double> refine_trace;          // infidelity per refine iteration
    std::vector<double> refine_grad_norms;     // matching gradient max-norms
};

// method in {grad, rl, rl+grad}; deterministic given the seed.
OptimizeOutcome run_method(const CircuitParams& p, const PulseSchedule& shape,
                           const std::string& method, const SacConfig& sac,
                           const OptimizerConfig& opt, std::uint64_t seed,
                           std::unique_ptr<SacAgent>* agent_out = nullptr);

int cmd_diagnose(const RunConfig& cfg);
int cmd_optimize(const RunConfig& cfg);
int cmd_sweep_gate_time(const RunConfig& cfg);
int cmd_robustness(const RunConfig& cfg);
int cmd_smoothing(const RunConfig& cfg);
int cmd_step_study(const RunConfig& cfg);

}  // namespace czopt
