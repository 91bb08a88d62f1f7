#include "czopt/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace czopt {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

TomlTable::Value parse_scalar(const std::string& raw, int line_no);

TomlTable::Value parse_value(const std::string& raw, int line_no) {
    const std::string s = trim(raw);
    if (s.empty()) throw ConfigError("line " + std::to_string(line_no) + ": missing value");
    if (s.front() == '[') {
        if (s.back() != ']')
            throw ConfigError("line " + std::to_string(line_no) + ": unterminated array");
        TomlTable::Value v;
        v.kind = TomlTable::Value::Kind::Array;
        const std::string inner = s.substr(1, s.size() - 2);
        std::string item;
        bool in_string = false;
        for (char c : inner) {
            if (c == '"') in_string = !in_string;
            if (c == ',' && !in_string) {
                if (!trim(item).empty()) v.arr.push_back(parse_scalar(item, line_no));
                item.clear();
            } else {
                item += c;
            }
        }
        if (!trim(item).empty()) v.arr.push_back(parse_scalar(item, line_no));
        return v;
    }
    return parse_scalar(s, line_no);
}

TomlTable::Value parse_scalar(const std::string& raw, int line_no) {
    const std::string s = trim(raw);
    TomlTable::Value v;
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        v.kind = TomlTable::Value::Kind::String;
        v.str = s.substr(1, s.size() - 2);
        return v;
    }
    if (s == "true" || s == "false") {
        v.kind = TomlTable::Value::Kind::Bool;
        v.b = (s == "true");
        return v;
    }
    // integer first, then float
    {
        long long iv = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), iv);
        if (ec == std::errc() && p == s.data() + s.size()) {
            v.kind = TomlTable::Value::Kind::Int;
            v.i = iv;
            return v;
        }
    }
    try {
        std::size_t used = 0;
        const double fv = std::stod(s, &used);
        if (used == s.size()) {
            v.kind = TomlTable::Value::Kind::Float;
            v.f = fv;
            return v;
        }
    } catch (...) {
    }
    throw ConfigError("line " + std::to_string(line_no) + ": cannot parse value '" + s + "'");
}

}  // namespace

TomlTable TomlTable::parse(const std::string& text) {
    TomlTable t;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string s = trim(strip_comment(line));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
            section = trim(s.substr(1, s.size() - 2));
            if (section.empty())
                throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
            t.sections_[section] = true;
            continue;
        }
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(s.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        const std::string full = section.empty() ? key : section + "." + key;
        if (t.values_.count(full))
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + full + "'");
        t.values_[full] = parse_value(s.substr(eq + 1), line_no);
    }
    return t;
}

TomlTable TomlTable::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

const TomlTable::Value& TomlTable::require(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key: " + key);
    return it->second;
}

double TomlTable::get_double(const std::string& key) const {
    const Value& v = require(key);
    if (v.kind == Value::Kind::Float) return v.f;
    if (v.kind == Value::Kind::Int) return static_cast<double>(v.i);
    throw ConfigError("config key '" + key + "' is not a number");
}

double TomlTable::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

long long TomlTable::get_int(const std::string& key) const {
    const Value& v = require(key);
    if (v.kind != Value::Kind::Int) throw ConfigError("config key '" + key + "' is not an integer");
    return v.i;
}

long long TomlTable::get_int(const std::string& key, long long fallback) const {
    return has(key) ? get_int(key) : fallback;
}

std::string TomlTable::get_string(const std::string& key) const {
    const Value& v = require(key);
    if (v.kind != Value::Kind::String) throw ConfigError("config key '" + key + "' is not a string");
    return v.str;
}

std::string TomlTable::get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
}

bool TomlTable::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const Value& v = require(key);
    if (v.kind != Value::Kind::Bool) throw ConfigError("config key '" + key + "' is not a boolean");
    return v.b;
}

std::vector<double> TomlTable::get_double_array(const std::string& key) const {
    const Value& v = require(key);
    if (v.kind != Value::Kind::Array) throw ConfigError("config key '" + key + "' is not an array");
    std::vector<double> out;
    for (const Value& e : v.arr) {
        if (e.kind == Value::Kind::Float)
            out.push_back(e.f);
        else if (e.kind == Value::Kind::Int)
            out.push_back(static_cast<double>(e.i));
        else
            throw ConfigError("config key '" + key + "' has a non-numeric element");
    }
    return out;
}

std::vector<double> TomlTable::get_double_array(const std::string& key,
                                                const std::vector<double>& fallback) const {
    return has(key) ? get_double_array(key) : fallback;
}

std::vector<std::string> TomlTable::get_string_array(
    const std::string& key, const std::vector<std::string>& fallback) const {
    if (!has(key)) return fallback;
    const Value& v = require(key);
    if (v.kind != Value::Kind::Array) throw ConfigError("config key '" + key + "' is not an array");
    std::vector<std::string> out;
    for (const Value& e : v.arr) {
        if (e.kind != Value::Kind::String)
            throw ConfigError("config key '" + key + "' has a non-string element");
        out.push_back(e.str);
    }
    return out;
}

CircuitParams circuit_from_toml(const TomlTable& t, const std::string& prefix) {
    CircuitParams p = CircuitParams::defaults(3);
    p.q1.freq = t.get_double(prefix + "w1", p.q1.freq);
    p.q2.freq = t.get_double(prefix + "w2", p.q2.freq);
    p.coupler.freq = t.get_double(prefix + "wc", p.coupler.freq);
    p.q1.anharm = t.get_double(prefix + "a1", p.q1.anharm);
    p.coupler.anharm = t.get_double(prefix + "ac", p.coupler.anharm);
    p.q2.anharm = t.get_double(prefix + "a2", p.q2.anharm);
    p.g12 = t.get_double(prefix + "g12", p.g12);
    p.g1c = t.get_double(prefix + "g1c", p.g1c);
    p.g2c = t.get_double(prefix + "g2c", p.g2c);
    const int levels = static_cast<int>(t.get_int(prefix + "levels", 3));
    p.q1.levels = p.coupler.levels = p.q2.levels = levels;
    p.validate();
    return p;
}

namespace {

std::string fmt_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

}  // namespace

std::string circuit_to_toml(const CircuitParams& p) {
    std::ostringstream out;
    out << "[circuit]\n";
    out << "w1 = " << fmt_double(p.q1.freq) << "\n";
    out << "w2 = " << fmt_double(p.q2.freq) << "\n";
    out << "wc = " << fmt_double(p.coupler.freq) << "\n";
    out << "a1 = " << fmt_double(p.q1.anharm) << "\n";
    out << "ac = " << fmt_double(p.coupler.anharm) << "\n";
    out << "a2 = " << fmt_double(p.q2.anharm) << "\n";
    out << "g12 = " << fmt_double(p.g12) << "\n";
    out << "g1c = " << fmt_double(p.g1c) << "\n";
    out << "g2c = " << fmt_double(p.g2c) << "\n";
    out << "levels = " << p.q1.levels << "\n";
    return out.str();
}

RunConfig RunConfig::from_toml(const TomlTable& t) {
    RunConfig c;
    c.circuit = circuit_from_toml(t);

    c.shape.gate_time_ns = t.get_double("schedule.gate_time_ns", c.shape.gate_time_ns);
    c.shape.step_ns = t.get_double("schedule.step_ns", c.shape.step_ns);
    const std::vector<double> bounds =
        t.get_double_array("schedule.bounds_ghz", {c.shape.lo_ghz, c.shape.hi_ghz});
    if (bounds.size() != 2) throw ConfigError("schedule.bounds_ghz must have two entries");
    c.shape.lo_ghz = bounds[0];
    c.shape.hi_ghz = bounds[1];

    c.method = t.get_string("run.method", c.method);
    c.seed = static_cast<std::uint64_t>(t.get_int("run.seed", 1));
    c.out_dir = t.get_string("run.out", c.out_dir);
    c.workers = static_cast<int>(t.get_int("run.workers", 1));

    const bool wants_rl = (c.method == "rl" || c.method == "rl+grad");
    const bool wants_grad = (c.method == "grad" || c.method == "rl+grad");
    if (c.method != "grad" && c.method != "rl" && c.method != "rl+grad")
        throw ConfigError("run.method must be one of grad, rl, rl+grad");
    if (wants_rl && !t.has_section("sac"))
        throw ConfigError("method '" + c.method + "' requires a [sac] section");
    if (wants_grad && !t.has_section("opt"))
        throw ConfigError("method '" + c.method + "' requires an [opt] section");

    c.sac.gamma = t.get_double("sac.gamma", c.sac.gamma);
    c.sac.alpha = t.get_double("sac.alpha", c.sac.alpha);
    c.sac.polyak = t.get_double("sac.polyak", c.sac.polyak);
    c.sac.actor_lr = t.get_double("sac.actor_lr", c.sac.actor_lr);
    c.sac.critic_lr = t.get_double("sac.critic_lr", c.sac.critic_lr);
    c.sac.batch_size = static_cast<int>(t.get_int("sac.batch_size", c.sac.batch_size));
    c.sac.buffer_capacity =
        static_cast<std::size_t>(t.get_int("sac.buffer_capacity", static_cast<long long>(c.sac.buffer_capacity)));
    c.sac.warmup_steps = static_cast<int>(t.get_int("sac.warmup_steps", c.sac.warmup_steps));
    c.sac.updates_per_step = static_cast<int>(t.get_int("sac.updates_per_step", c.sac.updates_per_step));
    c.sac.episodes = static_cast<int>(t.get_int("sac.episodes", c.sac.episodes));
    c.sac.eval_interval = static_cast<int>(t.get_int("sac.eval_interval", c.sac.eval_interval));
    if (t.has("sac.hidden")) {
        c.sac.hidden.clear();
        for (double h : t.get_double_array("sac.hidden")) c.sac.hidden.push_back(static_cast<int>(h));
    }

    c.opt.max_iters = static_cast<int>(t.get_int("opt.max_iters", c.opt.max_iters));
    c.opt.lr = t.get_double("opt.lr", c.opt.lr);
    c.opt.beta1 = t.get_double("opt.beta1", c.opt.beta1);
    c.opt.beta2 = t.get_double("opt.beta2", c.opt.beta2);
    c.opt.tol = t.get_double("opt.tol", c.opt.tol);
    c.opt.patience = static_cast<int>(t.get_int("opt.patience", c.opt.patience));
    c.opt.restarts = static_cast<int>(t.get_int("opt.restarts", c.opt.restarts));

    c.diag_wc_min = t.get_double("diagnose.wc_min", c.diag_wc_min);
    c.diag_wc_max = t.get_double("diagnose.wc_max", c.diag_wc_max);
    c.diag_points = static_cast<int>(t.get_int("diagnose.points", c.diag_points));

    c.sweep_gate_times = t.get_double_array("sweep.gate_times", c.sweep_gate_times);
    c.sweep_seeds = static_cast<int>(t.get_int("sweep.seeds", c.sweep_seeds));
    c.sweep_methods = t.get_string_array("sweep.methods", c.sweep_methods);

    c.robust_vary = t.get_string("robustness.vary", c.robust_vary);
    c.robust_min = t.get_double("robustness.min", c.robust_min);
    c.robust_max = t.get_double("robustness.max", c.robust_max);
    c.robust_points = static_cast<int>(t.get_int("robustness.points", c.robust_points));
    c.pulse_file = t.get_string("robustness.pulse", c.pulse_file);
    c.pulse_file = t.get_string("smoothing.pulse", c.pulse_file);

    c.smoothing_widths = t.get_double_array("smoothing.widths", c.smoothing_widths);
    c.step_lengths = t.get_double_array("step_study.step_lengths", c.step_lengths);

    c.validate();
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    return from_toml(TomlTable::parse_file(path));
}

void RunConfig::validate() const {
    circuit.validate();
    sac.validate();
    opt.validate();
    if (workers < 1) throw ConfigError("run.workers must be at least 1");
    if (diag_points < 1 || robust_points < 1) throw ConfigError("grid point counts must be positive");
    if (shape.lo_ghz >= shape.hi_ghz) throw ConfigError("schedule bounds are empty");
    shape.shape_steps();  // divisibility check
}

}  // namespace czopt
