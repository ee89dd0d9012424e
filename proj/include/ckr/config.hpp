#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ckr/grid.hpp"
#include "ckr/schedule.hpp"

namespace ckr {

// One simulation run, as read from a config file. The file format is flat
// "key = value" lines, '#' comments, schema-versioned; see README for the
// documented schema. Unknown keys are rejected.
struct RunConfig {
    int schema = 1;

    // grid
    int n = 0;              // points per rotor axis (n1 = n2 = n)
    double hbar_s = 1.0;

    // dynamics
    double k1 = 0.0;
    double k2 = 0.0;
    double xi12 = 0.0;

    // initial product state, one packet per rotor
    CoherentStateSpec initial1;
    CoherentStateSpec initial2;

    // time grid
    std::int64_t t_max = 0;
    ScheduleKind schedule = ScheduleKind::Log;
    int samples = 200;

    ProbeSet probes;

    std::uint64_t seed = 12345;
    std::string output = "run";
    std::int64_t memory_cap_mb = 4096;
    double tb_slope_tol = 0.5; // break-time slope band, fraction of D_cl

    bool operator==(const RunConfig&) const = default;

    SampleSchedule make_sample_schedule() const {
        auto s = make_schedule(schedule, samples, t_max);
        s.validate(t_max);
        return s;
    }
};

namespace detail {

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

inline double parse_double(const std::string& key, const std::string& s) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw ConfigError("config: key '" + key + "': expected number, got '" + s + "'");
    return v;
}

inline std::int64_t parse_int(const std::string& key, const std::string& s) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw ConfigError("config: key '" + key + "': expected integer, got '" + s + "'");
    return v;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

} // namespace detail

inline std::string probes_to_string(const ProbeSet& p) {
    std::string s;
    auto add = [&s](bool on, const char* name) {
        if (!on) return;
        if (!s.empty()) s += ",";
        s += name;
    };
    add(p.svn, "svn");
    add(p.slin, "slin");
    add(p.energy, "energy");
    add(p.marginals, "marginals");
    add(p.decoherence, "decoherence");
    add(p.husimi, "husimi");
    return s;
}

inline std::string serialize_config(const RunConfig& c) {
    using detail::format_double;
    std::ostringstream out;
    out << "schema = " << c.schema << "\n";
    out << "n = " << c.n << "\n";
    out << "hbar_s = " << format_double(c.hbar_s) << "\n";
    out << "k1 = " << format_double(c.k1) << "\n";
    out << "k2 = " << format_double(c.k2) << "\n";
    out << "xi12 = " << format_double(c.xi12) << "\n";
    out << "x0_1 = " << format_double(c.initial1.x0) << "\n";
    out << "p0_1 = " << format_double(c.initial1.p0) << "\n";
    out << "sigma_1 = " << format_double(c.initial1.sigma) << "\n";
    out << "x0_2 = " << format_double(c.initial2.x0) << "\n";
    out << "p0_2 = " << format_double(c.initial2.p0) << "\n";
    out << "sigma_2 = " << format_double(c.initial2.sigma) << "\n";
    out << "t_max = " << c.t_max << "\n";
    out << "schedule = " << (c.schedule == ScheduleKind::Log ? "log" : "linear") << "\n";
    out << "samples = " << c.samples << "\n";
    out << "probes = " << probes_to_string(c.probes) << "\n";
    if (!c.probes.marginal_times.empty()) {
        out << "marginal_times = ";
        for (size_t i = 0; i < c.probes.marginal_times.size(); ++i)
            out << (i ? "," : "") << c.probes.marginal_times[i];
        out << "\n";
    }
    out << "seed = " << c.seed << "\n";
    out << "output = " << c.output << "\n";
    out << "memory_cap_mb = " << c.memory_cap_mb << "\n";
    out << "tb_slope_tol = " << format_double(c.tb_slope_tol) << "\n";
    return out.str();
}

// Parse and validate a config file. Missing keys with defaults are filled in
// (notably sigma_j = sqrt(hbar_s/2)); required keys are n, k1, k2, xi12,
// t_max. Errors name the offending key.
inline RunConfig parse_config(const std::string& text) {
    using detail::parse_double;
    using detail::parse_int;

    static const std::set<std::string> known = {
        "schema", "n", "hbar_s", "k1", "k2", "xi12",
        "x0_1", "p0_1", "sigma_1", "x0_2", "p0_2", "sigma_2",
        "t_max", "schedule", "samples", "probes", "marginal_times",
        "seed", "output", "memory_cap_mb", "tb_slope_tol"};

    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) +
                              ": expected 'key = value', got '" + line + "'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (!known.count(key))
            throw ConfigError("config: unknown key '" + key + "'");
        if (kv.count(key))
            throw ConfigError("config: duplicate key '" + key + "'");
        kv[key] = val;
    }

    for (const char* req : {"n", "k1", "k2", "xi12", "t_max"})
        if (!kv.count(req)) throw ConfigError(std::string("config: missing required key '") + req + "'");

    RunConfig c;
    auto take = [&kv](const char* key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        return it->second;
    };

    if (auto v = take("schema")) {
        c.schema = static_cast<int>(parse_int("schema", *v));
        if (c.schema != 1)
            throw ConfigError("config: key 'schema': unsupported version " + *v);
    }
    c.n = static_cast<int>(parse_int("n", *take("n")));
    if (!is_power_of_two(c.n) || c.n < 16)
        throw ConfigError("config: key 'n': must be a power of two >= 16");
    if (auto v = take("hbar_s")) c.hbar_s = parse_double("hbar_s", *v);
    if (!(c.hbar_s > 0)) throw ConfigError("config: key 'hbar_s': must be positive");
    c.k1 = parse_double("k1", *take("k1"));
    c.k2 = parse_double("k2", *take("k2"));
    c.xi12 = parse_double("xi12", *take("xi12"));
    if (!std::isfinite(c.k1)) throw ConfigError("config: key 'k1': must be finite");
    if (!std::isfinite(c.k2)) throw ConfigError("config: key 'k2': must be finite");
    if (!(c.xi12 >= 0) || !std::isfinite(c.xi12))
        throw ConfigError("config: key 'xi12': must be finite and >= 0");

    c.initial1 = CoherentStateSpec{std::numbers::pi + 0.1, 0.0, default_sigma(c.hbar_s)};
    c.initial2 = c.initial1;
    if (auto v = take("x0_1")) c.initial1.x0 = parse_double("x0_1", *v);
    if (auto v = take("p0_1")) c.initial1.p0 = parse_double("p0_1", *v);
    if (auto v = take("sigma_1")) c.initial1.sigma = parse_double("sigma_1", *v);
    if (auto v = take("x0_2")) c.initial2.x0 = parse_double("x0_2", *v);
    if (auto v = take("p0_2")) c.initial2.p0 = parse_double("p0_2", *v);
    if (auto v = take("sigma_2")) c.initial2.sigma = parse_double("sigma_2", *v);
    if (!(c.initial1.sigma > 0)) throw ConfigError("config: key 'sigma_1': must be positive");
    if (!(c.initial2.sigma > 0)) throw ConfigError("config: key 'sigma_2': must be positive");

    c.t_max = parse_int("t_max", *take("t_max"));
    if (c.t_max < 0) throw ConfigError("config: key 't_max': must be >= 0");
    if (auto v = take("schedule")) {
        if (*v == "log") c.schedule = ScheduleKind::Log;
        else if (*v == "linear") c.schedule = ScheduleKind::Linear;
        else throw ConfigError("config: key 'schedule': expected log|linear, got '" + *v + "'");
    }
    if (auto v = take("samples")) {
        c.samples = static_cast<int>(parse_int("samples", *v));
        if (c.samples < 1) throw ConfigError("config: key 'samples': must be >= 1");
    }
    if (auto v = take("probes")) {
        c.probes.svn = c.probes.slin = c.probes.energy = false;
        for (const auto& name : detail::split_list(*v)) {
            if (name == "svn") c.probes.svn = true;
            else if (name == "slin") c.probes.slin = true;
            else if (name == "energy") c.probes.energy = true;
            else if (name == "marginals") c.probes.marginals = true;
            else if (name == "decoherence") c.probes.decoherence = true;
            else if (name == "husimi") c.probes.husimi = true;
            else throw ConfigError("config: key 'probes': unknown probe '" + name + "'");
        }
    }
    if (auto v = take("marginal_times")) {
        for (const auto& s : detail::split_list(*v))
            c.probes.marginal_times.push_back(parse_int("marginal_times", s));
        std::sort(c.probes.marginal_times.begin(), c.probes.marginal_times.end());
        for (auto t : c.probes.marginal_times)
            if (t < 0 || t > c.t_max)
                throw ConfigError("config: key 'marginal_times': time " + std::to_string(t) +
                                  " outside [0, t_max]");
    }
    if (auto v = take("seed")) c.seed = static_cast<std::uint64_t>(parse_int("seed", *v));
    if (auto v = take("output")) c.output = *v;
    if (auto v = take("memory_cap_mb")) {
        c.memory_cap_mb = parse_int("memory_cap_mb", *v);
        if (c.memory_cap_mb <= 0) throw ConfigError("config: key 'memory_cap_mb': must be positive");
    }
    if (auto v = take("tb_slope_tol")) {
        c.tb_slope_tol = parse_double("tb_slope_tol", *v);
        if (!(c.tb_slope_tol > 0)) throw ConfigError("config: key 'tb_slope_tol': must be positive");
    }
    return c;
}

} // namespace ckr
