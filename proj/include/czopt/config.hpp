#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "czopt/circuit.hpp"
#include "czopt/control.hpp"
#include "czopt/gradopt.hpp"
#include "czopt/sac.hpp"

namespace czopt {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Minimal TOML subset: [section] headers, key = value with strings, booleans,
// integers, floats and flat arrays. Enough for run configurations; no
// nested tables or date types.
class TomlTable {
public:
    struct Value {
        enum class Kind { String, Bool, Int, Float, Array };
        Kind kind = Kind::String;
        std::string str;
        bool b = false;
        long long i = 0;
        double f = 0.0;
        std::vector<Value> arr;
    };

    static TomlTable parse(const std::string& text);
    static TomlTable parse_file(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    bool has_section(const std::string& section) const { return sections_.count(section) > 0; }

    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key) const;
    long long get_int(const std::string& key, long long fallback) const;
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_double_array(const std::string& key) const;
    std::vector<double> get_double_array(const std::string& key,
                                         const std::vector<double>& fallback) const;
    std::vector<std::string> get_string_array(const std::string& key,
                                              const std::vector<std::string>& fallback) const;

private:
    const Value& require(const std::string& key) const;
    std::map<std::string, Value> values_;  // "section.key" -> value
    std::map<std::string, bool> sections_;
};

CircuitParams circuit_from_toml(const TomlTable& t, const std::string& prefix = "circuit.");
std::string circuit_to_toml(const CircuitParams& p);

struct RunConfig {
    CircuitParams circuit = CircuitParams::defaults(3);
    PulseSchedule shape = PulseSchedule::shape(10.0, 1.0, 4.2, 6.38);
    std::string method = "rl+grad";  // grad | rl | rl+grad
    SacConfig sac;
    OptimizerConfig opt;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    int workers = 1;

    // diagnose
    double diag_wc_min = 4.5, diag_wc_max = 6.38;
    int diag_points = 100;
    // gate-time sweep
    std::vector<double> sweep_gate_times = {10.0, 15.0, 20.0};
    int sweep_seeds = 5;
    std::vector<std::string> sweep_methods = {"grad", "rl", "rl+grad"};
    // robustness
    std::string robust_vary = "wc";
    double robust_min = 6.0, robust_max = 6.6;
    int robust_points = 50;
    std::string pulse_file;
    // smoothing
    std::vector<double> smoothing_widths = {0.01, 0.05, 0.1, 0.25, 0.5};
    // step-size study
    std::vector<double> step_lengths = {1.0, 2.0, 2.5};

    static RunConfig from_toml(const TomlTable& t);
    static RunConfig from_file(const std::string& path);
    void validate() const;
};

}  // namespace czopt
