#include "czopt/runner.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

namespace czopt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string csv_num(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& header) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open for writing: " + path);
        out_ << header << "\n";
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ",";
            out_ << cells[i];
        }
        out_ << "\n";
    }

private:
    std::ofstream out_;
};

void write_text_atomic(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
        out << text;
    }
    fs::rename(tmp, path);
}

json mlp_to_json(const Mlp& net) {
    json layers = json::array();
    for (const auto& l : net.layers()) {
        layers.push_back({{"out", l.w.rows},
                          {"in", l.w.cols},
                          {"act", l.act == Act::Relu ? "relu" : "linear"},
                          {"w", l.w.a},
                          {"b", l.b}});
    }
    return layers;
}

void mlp_from_json(const json& layers, Mlp& net) {
    if (layers.size() != net.layers().size())
        throw std::runtime_error("checkpoint: layer count mismatch");
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        auto& l = net.layers()[i];
        const json& jl = layers[i];
        if (jl.at("out").get<std::size_t>() != l.w.rows ||
            jl.at("in").get<std::size_t>() != l.w.cols)
            throw std::runtime_error("checkpoint: layer shape mismatch");
        jl.at("w").get_to(l.w.a);
        jl.at("b").get_to(l.b);
    }
}

json sac_config_to_json(const SacConfig& c) {
    return {{"gamma", c.gamma},
            {"alpha", c.alpha},
            {"polyak", c.polyak},
            {"actor_lr", c.actor_lr},
            {"critic_lr", c.critic_lr},
            {"batch_size", c.batch_size},
            {"buffer_capacity", c.buffer_capacity},
            {"warmup_steps", c.warmup_steps},
            {"updates_per_step", c.updates_per_step},
            {"episodes", c.episodes},
            {"eval_interval", c.eval_interval},
            {"hidden", c.hidden}};
}

SacConfig sac_config_from_json(const json& j) {
    SacConfig c;
    j.at("gamma").get_to(c.gamma);
    j.at("alpha").get_to(c.alpha);
    j.at("polyak").get_to(c.polyak);
    j.at("actor_lr").get_to(c.actor_lr);
    j.at("critic_lr").get_to(c.critic_lr);
    j.at("batch_size").get_to(c.batch_size);
    j.at("buffer_capacity").get_to(c.buffer_capacity);
    j.at("warmup_steps").get_to(c.warmup_steps);
    j.at("updates_per_step").get_to(c.updates_per_step);
    j.at("episodes").get_to(c.episodes);
    j.at("eval_interval").get_to(c.eval_interval);
    j.at("hidden").get_to(c.hidden);
    return c;
}

std::uint64_t double_bits(double v) { return std::bit_cast<std::uint64_t>(v); }

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

void write_population_csv(const std::string& path, const GateEvaluation& ev) {
    CsvWriter csv(path, "step,label,initial_state,population");
    const auto& comp = computational_labels();
    for (std::size_t step = 0; step < ev.recorded_steps; ++step)
        for (std::size_t init = 0; init < 4; ++init)
            for (std::size_t t = 0; t < ev.tracked.size(); ++t)
                csv.row({std::to_string(step + 1), ev.tracked[t].str(), comp[init].str(),
                         csv_num(ev.population(step, init, t))});
}

void write_learning_curve(const std::string& path, const std::vector<CurvePoint>& curve) {
    CsvWriter csv(path, "episode,reward,eval_fidelity");
    for (const CurvePoint& pt : curve)
        csv.row({std::to_string(pt.episode), csv_num(pt.episode_return),
                 pt.has_eval ? csv_num(pt.eval_metric) : std::string()});
}

void write_refine_trace(const std::string& path, const OptimizeOutcome& res) {
    CsvWriter csv(path, "iter,infidelity,grad_norm");
    for (std::size_t i = 0; i < res.refine_trace.size(); ++i)
        csv.row({std::to_string(i), csv_num(res.refine_trace[i]),
                 csv_num(res.refine_grad_norms[i])});
}

}  // namespace

void RunManifest::write(const std::string& path) const {
    json j;
    j["command"] = command;
    j["version"] = version;
    j["seed"] = seed;
    j["wall_seconds"] = wall_seconds;
    j["config"] = json::parse(config_json);
    if (final_fidelity >= 0.0) j["final_fidelity"] = final_fidelity;
    if (final_process_fidelity >= 0.0) j["final_process_fidelity"] = final_process_fidelity;
    if (final_leakage >= 0.0) j["final_leakage"] = final_leakage;
    if (rl_stage_fidelity >= 0.0) j["rl_stage_fidelity"] = rl_stage_fidelity;
    j["files"] = files;
    j["failed"] = failed;
    if (failed) j["error"] = error;
    write_text_atomic(path, j.dump(2) + "\n");
}

std::string run_config_json(const RunConfig& cfg) {
    json j;
    j["circuit"] = {{"w1", cfg.circuit.q1.freq},   {"w2", cfg.circuit.q2.freq},
                    {"wc", cfg.circuit.coupler.freq}, {"a1", cfg.circuit.q1.anharm},
                    {"ac", cfg.circuit.coupler.anharm}, {"a2", cfg.circuit.q2.anharm},
                    {"g12", cfg.circuit.g12},      {"g1c", cfg.circuit.g1c},
                    {"g2c", cfg.circuit.g2c},      {"levels", cfg.circuit.q1.levels}};
    j["schedule"] = {{"gate_time_ns", cfg.shape.gate_time_ns},
                     {"step_ns", cfg.shape.step_ns},
                     {"bounds_ghz", {cfg.shape.lo_ghz, cfg.shape.hi_ghz}}};
    j["run"] = {{"method", cfg.method}, {"seed", cfg.seed}, {"out", cfg.out_dir},
                {"workers", cfg.workers}};
    j["sac"] = sac_config_to_json(cfg.sac);
    j["opt"] = {{"max_iters", cfg.opt.max_iters}, {"lr", cfg.opt.lr},
                {"beta1", cfg.opt.beta1},         {"beta2", cfg.opt.beta2},
                {"tol", cfg.opt.tol},             {"patience", cfg.opt.patience},
                {"restarts", cfg.opt.restarts}};
    return j.dump();
}

void save_pulse(const std::string& path, const PulseSchedule& s) {
    json j;
    j["gate_time_ns"] = s.gate_time_ns;
    j["step_ns"] = s.step_ns;
    j["bounds_ghz"] = {s.lo_ghz, s.hi_ghz};
    j["values_ghz"] = s.values_ghz;
    write_text_atomic(path, j.dump(2) + "\n");
}

PulseSchedule load_pulse(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open pulse file: " + path);
    json j;
    in >> j;
    PulseSchedule s;
    j.at("gate_time_ns").get_to(s.gate_time_ns);
    j.at("step_ns").get_to(s.step_ns);
    s.lo_ghz = j.at("bounds_ghz").at(0).get<double>();
    s.hi_ghz = j.at("bounds_ghz").at(1).get<double>();
    j.at("values_ghz").get_to(s.values_ghz);
    s.validate();
    return s;
}

void save_checkpoint(const std::string& path, const SacAgent& agent) {
    json j;
    j["format"] = "czopt-checkpoint-v1";
    j["obs_dim"] = agent.obs_dim();
    j["config"] = sac_config_to_json(agent.config());
    const Rng::State st = agent.rng_state();
    j["rng"] = {{"s", {st.s[0], st.s[1], st.s[2], st.s[3]}},
                {"have_spare", st.have_spare},
                {"spare", st.spare}};
    j["policy"] = mlp_to_json(agent.policy_const());
    j["q1"] = mlp_to_json(agent.q1_const());
    j["q2"] = mlp_to_json(agent.q2_const());
    j["q1_target"] = mlp_to_json(agent.q1_target_const());
    j["q2_target"] = mlp_to_json(agent.q2_target_const());
    write_text_atomic(path, j.dump() + "\n");
}

SacAgent load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    json j;
    in >> j;
    if (j.at("format").get<std::string>() != "czopt-checkpoint-v1")
        throw std::runtime_error("checkpoint: unknown format tag");
    const SacConfig cfg = sac_config_from_json(j.at("config"));
    SacAgent agent(j.at("obs_dim").get<int>(), cfg, 0);
    mlp_from_json(j.at("policy"), agent.policy());
    mlp_from_json(j.at("q1"), agent.q1());
    mlp_from_json(j.at("q2"), agent.q2());
    mlp_from_json(j.at("q1_target"), agent.q1_target());
    mlp_from_json(j.at("q2_target"), agent.q2_target());
    Rng::State st{};
    for (int i = 0; i < 4; ++i) st.s[i] = j.at("rng").at("s").at(i).get<std::uint64_t>();
    st.have_spare = j.at("rng").at("have_spare").get<bool>();
    st.spare = j.at("rng").at("spare").get<double>();
    agent.rng().restore(st);
    return agent;
}

OptimizeOutcome run_method(const CircuitParams& p, const PulseSchedule& shape,
                           const std::string& method, const SacConfig& sac,
                           const OptimizerConfig& opt, std::uint64_t seed,
                           std::unique_ptr<SacAgent>* agent_out) {
    OptimizeOutcome out;

    auto run_refine = [&](const PulseSchedule& init) {
        std::vector<double> trace, norms;
        RefineResult r = refine(p, init, opt,
                                [&](int, const PulseSchedule&, const GradResult& gr) {
                                    trace.push_back(gr.infidelity);
                                    double gn = 0.0;
                                    for (double g : gr.grad) gn = std::max(gn, std::abs(g));
                                    norms.push_back(gn);
                                });
        return std::tuple<RefineResult, std::vector<double>, std::vector<double>>(
            std::move(r), std::move(trace), std::move(norms));
    };

    if (method == "grad") {
        Rng ansatz_rng(mix_seed(seed, {0x67726164ULL}));
        std::vector<PulseSchedule> starts;
        starts.push_back(naive_ansatz(AnsatzKind::Constant, shape, p.coupler.freq, ansatz_rng));
        if (opt.restarts >= 2)
            starts.push_back(naive_ansatz(AnsatzKind::Ramp, shape, p.coupler.freq, ansatz_rng));
        while (static_cast<int>(starts.size()) < opt.restarts)
            starts.push_back(naive_ansatz(AnsatzKind::Random, shape, p.coupler.freq, ansatz_rng));

        double best = 2.0;
        for (const PulseSchedule& init : starts) {
            auto [r, trace, norms] = run_refine(init);
            if (r.best_infidelity < best) {
                best = r.best_infidelity;
                out.pulse = r.best;
                out.refine_trace = std::move(trace);
                out.refine_grad_norms = std::move(norms);
            }
        }
    } else if (method == "rl" || method == "rl+grad") {
        GateEnv env(p, shape);
        auto agent = std::make_unique<SacAgent>(env.obs_dim(), sac, mix_seed(seed, {0x726cULL}));
        SacTrainResult r = sac_train(env, *agent, [&]() { return env.last_fidelity(); });
        const PulseSchedule rl_pulse = env.to_schedule(r.best_actions);
        out.curve = std::move(r.curve);
        out.rl_stage_fidelity = propagate(p, rl_pulse).fidelity;
        if (method == "rl") {
            out.pulse = rl_pulse;
        } else {
            auto [rr, trace, norms] = run_refine(rl_pulse);
            out.pulse = rr.best;
            out.refine_trace = std::move(trace);
            out.refine_grad_norms = std::move(norms);
        }
        if (agent_out) *agent_out = std::move(agent);
    } else {
        throw ConfigError("unknown method: " + method);
    }

    const GateEvaluation ev = propagate(p, out.pulse);
    out.fidelity = ev.fidelity;
    out.leakage = ev.leakage;
    return out;
}

int cmd_diagnose(const RunConfig& cfg) {
    Timer timer;
    fs::create_directories(cfg.out_dir);
    RunManifest man;
    man.command = "diagnose";
    man.seed = cfg.seed;
    man.config_json = run_config_json(cfg);
    try {
        CsvWriter csv(cfg.out_dir + "/diagnose.csv", "wc_ghz,zz_khz,xx_sw_mhz,status");
        const int n = cfg.diag_points;
        for (int i = 0; i < n; ++i) {
            const double wc = (i == n - 1 && n > 1)
                                  ? cfg.diag_wc_max
                                  : cfg.diag_wc_min +
                                        i * (cfg.diag_wc_max - cfg.diag_wc_min) / std::max(1, n - 1);
            std::string zz, xx, status = "ok";
            try {
                xx = csv_num(xx_coupling_sw_at(cfg.circuit, cfg.circuit.q1.freq,
                                               cfg.circuit.q2.freq, wc));
            } catch (const std::exception& e) {
                status = "singular-detuning";
            }
            try {
                CircuitParams q = cfg.circuit;
                q.coupler.freq = wc;
                zz = csv_num(zz_coupling(q));
            } catch (const LabelingError&) {
                status = "labeling-ambiguous";
            }
            csv.row({csv_num(wc), zz, xx, status});
        }
        man.files.push_back("diagnose.csv");
    } catch (const std::exception& e) {
        man.failed = true;
        man.error = e.what();
    }
    man.wall_seconds = timer.seconds();
    man.write(cfg.out_dir + "/manifest.json");
    return man.failed ? 1 : 0;
}

int cmd_optimize(const RunConfig& cfg) {
    Timer timer;
    fs::create_directories(cfg.out_dir);
    RunManifest man;
    man.command = "optimize";
    man.seed = cfg.seed;
    man.config_json = run_config_json(cfg);
    try {
        std::unique_ptr<SacAgent> agent;
        const OptimizeOutcome res =
            run_method(cfg.circuit, cfg.shape, cfg.method, cfg.sac, cfg.opt, cfg.seed, &agent);

        save_pulse(cfg.out_dir + "/pulse.json", res.pulse);
        man.files.push_back("pulse.json");

        const GateEvaluation ev = propagate(cfg.circuit, res.pulse);
        write_population_csv(cfg.out_dir + "/populations.csv", ev);
        man.files.push_back("populations.csv");

        if (!res.curve.empty()) {
            write_learning_curve(cfg.out_dir + "/learning_curve.csv", res.curve);
            man.files.push_back("learning_curve.csv");
        }
        if (!res.refine_trace.empty()) {
            write_refine_trace(cfg.out_dir + "/refine_trace.csv", res);
            man.files.push_back("refine_trace.csv");
        }
        if (agent) {
            save_checkpoint(cfg.out_dir + "/checkpoint.json", *agent);
            man.files.push_back("checkpoint.json");
        }
        man.final_fidelity = res.fidelity;
        man.final_process_fidelity = process_fidelity(ev.u_comp);
        man.final_leakage = res.leakage;
        man.rl_stage_fidelity = res.rl_stage_fidelity;
    } catch (const std::exception& e) {
        man.failed = true;
        man.error = e.what();
    }
    man.wall_seconds = timer.seconds();
    man.write(cfg.out_dir + "/manifest.json");
    return man.failed ? 1 : 0;
}

int cmd_sweep_gate_time(const RunConfig& cfg) {
    Timer timer;
    fs::create_directories(cfg.out_dir + "/cells");
    RunManifest man;
    man.command = "sweep-gate-time";
    man.seed = cfg.seed;
    man.config_json = run_config_json(cfg);

    struct Cell {
        double gate_time;
        std::string method;
        int seed_idx;
        std::string infidelity, leakage, status = "ok";
        std::string pulse_file;
    };
    std::vector<Cell> cells;
    try {
        for (double t : cfg.sweep_gate_times) {
            if (t < 5.0 || t > 50.0)
                throw ConfigError("sweep gate times must lie within [5, 50] ns");
            for (const std::string& m : cfg.sweep_methods)
                for (int s = 0; s < cfg.sweep_seeds; ++s) cells.push_back({t, m, s});
        }

#pragma omp parallel for schedule(dynamic) num_threads(cfg.workers) if (cfg.workers > 1)
        for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(cells.size()); ++ci) {
            Cell& cell = cells[ci];
            try {
                PulseSchedule shape = cfg.shape;
                shape.gate_time_ns = cell.gate_time;
                std::size_t mi =
                    std::find(cfg.sweep_methods.begin(), cfg.sweep_methods.end(), cell.method) -
                    cfg.sweep_methods.begin();
                const std::uint64_t cell_seed = mix_seed(
                    cfg.seed, {double_bits(cell.gate_time), mi, static_cast<std::uint64_t>(cell.seed_idx)});
                const OptimizeOutcome res =
                    run_method(cfg.circuit, shape, cell.method, cfg.sac, cfg.opt, cell_seed);
                cell.infidelity = csv_num(1.0 - res.fidelity);
                cell.leakage = csv_num(res.leakage);
                std::ostringstream name;
                name << "cells/gt" << cell.gate_time << "_" << cell.method << "_s" << cell.seed_idx
                     << ".pulse.json";
                cell.pulse_file = name.str();
                save_pulse(cfg.out_dir + "/" + cell.pulse_file, res.pulse);
            } catch (const std::exception& e) {
                cell.status = std::string("failed: ") + e.what();
            }
        }

        CsvWriter csv(cfg.out_dir + "/gate_time_sweep.csv",
                      "gate_time_ns,method,seed,infidelity,leakage,status");
        for (const Cell& cell : cells) {
            csv.row({csv_num(cell.gate_time), cell.method, std::to_string(cell.seed_idx),
                     cell.infidelity, cell.leakage, cell.status});
            if (!cell.pulse_file.empty()) man.files.push_back(cell.pulse_file);
        }
        man.files.push_back("gate_time_sweep.csv");
    } catch (const std::exception& e) {
        man.failed = true;
        man.error = e.what();
    }
    man.wall_seconds = timer.seconds();
    man.write(cfg.out_dir + "/manifest.json");
    return man.failed ? 1 : 0;
}

int cmd_robustness(const RunConfig& cfg) {
    Timer timer;
    fs::create_directories(cfg.out_dir);
    RunManifest man;
    man.command = "robustness";
    man.seed = cfg.seed;
    man.config_json = run_config_json(cfg);
    try {
        if (cfg.pulse_file.empty()) throw ConfigError("robustness requires a pulse file");
        const PulseSchedule pulse = load_pulse(cfg.pulse_file);
        if (cfg.robust_vary != "w1" && cfg.robust_vary != "w2" && cfg.robust_vary != "wc")
            throw ConfigError("robustness.vary must be one of w1, w2, wc");

        // gate-time qubit-1 frequency stays at its calibrated nominal value
        const double w1_gate_nominal = cfg.circuit.gate_w1();

        CsvWriter csv(cfg.out_dir + "/robustness.csv", "vary,value_ghz,fidelity,status");
        const int n = cfg.robust_points;
        for (int i = 0; i < n; ++i) {
            const double v = (i == n - 1 && n > 1)
                                 ? cfg.robust_max
                                 : cfg.robust_min +
                                       i * (cfg.robust_max - cfg.robust_min) / std::max(1, n - 1);
            CircuitParams q = cfg.circuit;
            if (cfg.robust_vary == "w1")
                q.q1.freq = v;
            else if (cfg.robust_vary == "w2")
                q.q2.freq = v;
            else
                q.coupler.freq = v;
            std::string fid, status = "ok";
            try {
                const GateEvaluation ev =
                    propagate(q, pulse, default_tracked_labels(), w1_gate_nominal);
                fid = csv_num(ev.fidelity);
            } catch (const std::exception& e) {
                status = std::string("failed: ") + e.what();
            }
            csv.row({cfg.robust_vary, csv_num(v), fid, status});
        }
        man.files.push_back("robustness.csv");
    } catch (const std::exception& e) {
        man.failed = true;
        man.error = e.what();
    }
    man.wall_seconds = timer.seconds();
    man.write(cfg.out_dir + "/manifest.json");
    return man.failed ? 1 : 0;
}

int cmd_smoothing(const RunConfig& cfg) {
    Timer timer;
    fs::create_directories(cfg.out_dir);
    RunManifest man;
    man.command = "smoothing";
    man.seed = cfg.seed;
    man.config_json = run_config_json(cfg);
    try {
        if (cfg.pulse_file.empty()) throw ConfigError("smoothing requires a pulse file");
        const PulseSchedule pulse = load_pulse(cfg.pulse_file);
        CsvWriter csv(cfg.out_dir + "/smoothing.csv", "w_ns,fidelity,status");
        for (double w : cfg.smoothing_widths) {
            if (w <= 0.0) throw ConfigError("smoothing widths must be positive");
            SmoothedPulse sp;
            sp.base = pulse;
            sp.width_ns = w;
            sp.sub_step_ns = pulse.step_ns / 20.0;
            sp.idle_ghz = cfg.circuit.coupler.freq;
            std::string fid, status = "ok";
            try {
                fid = csv_num(propagate_smoothed(cfg.circuit, sp).fidelity);
            } catch (const ResolutionError& e) {
                status = std::string("sub-step did not converge: ") + e.what();
            }
            csv.row({csv_num(w), fid, status});
        }
        man.files.push_back("smoothing.csv");
    } catch (const std::exception& e) {
        man.failed = true;
        man.error = e.what();
    }
    man.wall_seconds = timer.seconds();
    man.write(cfg.out_dir + "/manifest.json");
    return man.failed ? 1 : 0;
}

int cmd_step_study(const RunConfig& cfg) {
    Timer timer;
    fs::create_directories(cfg.out_dir);
    RunManifest man;
    man.command = "step-study";
    man.seed = cfg.seed;
    man.config_json = run_config_json(cfg);
    try {
        for (double t : cfg.step_lengths) {
            const double ratio = cfg.shape.gate_time_ns / t;
            if (std::abs(ratio - std::llround(ratio)) > 1e-9)
                throw ConfigError("step length " + std::to_string(t) +
                                  " does not divide the gate time");
        }
        CsvWriter csv(cfg.out_dir + "/step_study.csv", "step_ns,infidelity,status");
        for (double t : cfg.step_lengths) {
            PulseSchedule shape = cfg.shape;
            shape.step_ns = t;
            std::string infid, status = "ok";
            try {
                const OptimizeOutcome res =
                    run_method(cfg.circuit, shape, "rl+grad", cfg.sac, cfg.opt,
                               mix_seed(cfg.seed, {double_bits(t)}));
                infid = csv_num(1.0 - res.fidelity);
            } catch (const std::exception& e) {
                status = std::string("failed: ") + e.what();
            }
            csv.row({csv_num(t), infid, status});
        }
        man.files.push_back("step_study.csv");
    } catch (const std::exception& e) {
        man.failed = true;
        man.error = e.what();
    }
    man.wall_seconds = timer.seconds();
    man.write(cfg.out_dir + "/manifest.json");
    return man.failed ? 1 : 0;
}

}  // namespace czopt
