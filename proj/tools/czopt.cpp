#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>

#include "czopt/config.hpp"
#include "czopt/runner.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> method;
    std::optional<int> levels;
    std::optional<int> workers;
    std::optional<std::string> pulse;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "TOML run configuration");
    cmd->add_option("--seed", f.seed, "base seed (overrides config)");
    cmd->add_option("--out", f.out, "output directory (overrides config)");
    cmd->add_option("--method", f.method, "grad | rl | rl+grad (overrides config)");
    cmd->add_option("--levels", f.levels, "Fock truncation per transmon (overrides config)");
    cmd->add_option("--workers", f.workers, "parallel sweep workers (overrides config)");
    cmd->add_option("--pulse", f.pulse, "pulse JSON file (robustness/smoothing input)");
}

czopt::RunConfig make_config(const CommonFlags& f) {
    czopt::RunConfig cfg = f.config_path.empty() ? czopt::RunConfig{}
                                                 : czopt::RunConfig::from_file(f.config_path);
    if (f.seed) cfg.seed = *f.seed;
    if (f.out) cfg.out_dir = *f.out;
    if (f.method) cfg.method = *f.method;
    if (f.levels) {
        cfg.circuit.q1.levels = *f.levels;
        cfg.circuit.coupler.levels = *f.levels;
        cfg.circuit.q2.levels = *f.levels;
    }
    if (f.workers) cfg.workers = *f.workers;
    if (f.pulse) cfg.pulse_file = *f.pulse;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tunable-coupler CZ gate pulse optimizer and experiment runner"};
    app.require_subcommand(1);

    CommonFlags flags[6];
    CLI::App* diagnose = app.add_subcommand("diagnose", "static ZZ/XX couplings vs coupler frequency");
    CLI::App* optimize = app.add_subcommand("optimize", "optimize a CZ pulse with grad, rl or rl+grad");
    CLI::App* sweep = app.add_subcommand("sweep-gate-time", "infidelity vs gate time per method");
    CLI::App* robustness = app.add_subcommand("robustness", "fixed pulse vs idle-frequency drift");
    CLI::App* smoothing = app.add_subcommand("smoothing", "fidelity vs logistic rise/fall width");
    CLI::App* step_study = app.add_subcommand("step-study", "infidelity vs control step length");
    CLI::App* cmds[6] = {diagnose, optimize, sweep, robustness, smoothing, step_study};
    for (int i = 0; i < 6; ++i) add_common(cmds[i], flags[i]);

    CLI11_PARSE(app, argc, argv);

    try {
        if (diagnose->parsed()) return czopt::cmd_diagnose(make_config(flags[0]));
        if (optimize->parsed()) return czopt::cmd_optimize(make_config(flags[1]));
        if (sweep->parsed()) return czopt::cmd_sweep_gate_time(make_config(flags[2]));
        if (robustness->parsed()) return czopt::cmd_robustness(make_config(flags[3]));
        if (smoothing->parsed()) return czopt::cmd_smoothing(make_config(flags[4]));
        if (step_study->parsed()) return czopt::cmd_step_study(make_config(flags[5]));
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
