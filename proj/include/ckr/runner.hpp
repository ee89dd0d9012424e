#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ckr/classical.hpp"
#include "ckr/config.hpp"
#include "ckr/evolution.hpp"
#include "ckr/record.hpp"
#include "ckr/theory.hpp"

namespace ckr {

struct RunOptions {
    std::int64_t checkpoint_every = 0; // kicks between checkpoints, 0 = never
    std::string checkpoint_path;       // default <output>.ckpt
    std::string resume_from;
    std::int64_t stop_after = 0;       // halt after this kick (testing aid), 0 = none
    bool persist = true;
};

namespace detail {

// --- checkpoint serialization (versioned binary dump) ------------------------

constexpr char kCkptMagic[8] = {'C', 'K', 'R', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("checkpoint: truncated file");
    return v;
}

inline void put_string(std::ostream& out, const std::string& s) {
    put<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in) {
    const auto n = get<std::uint64_t>(in);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw IoError("checkpoint: truncated string");
    return s;
}

inline void write_checkpoint(const std::string& path, const RunConfig& cfg, std::int64_t t,
                             const WaveFunction2D& psi, const RunRecord& rec) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("checkpoint: cannot open " + tmp);
        out.write(kCkptMagic, sizeof(kCkptMagic));
        put<std::uint32_t>(out, 1); // schema tag
        put_string(out, serialize_config(cfg));
        put<std::int64_t>(out, t);

        put<std::int32_t>(out, psi.grid().n1);
        put<std::int32_t>(out, psi.grid().n2);
        put<std::uint8_t>(out, psi.basis(1) == Basis::Momentum);
        put<std::uint8_t>(out, psi.basis(2) == Basis::Momentum);
        const auto amps = psi.amplitudes();
        out.write(reinterpret_cast<const char*>(amps.data()),
                  static_cast<std::streamsize>(amps.size() * sizeof(cplx)));

        put<std::int64_t>(out, rec.first_breach_t);
        put<std::uint8_t>(out, rec.dcoh0_defined);
        put<double>(out, rec.dcoh0);
        put<std::uint64_t>(out, rec.rows.size());
        for (const auto& r : rec.rows) {
            put<std::int64_t>(out, r.t);
            put<double>(out, r.svn);
            put<double>(out, r.slin);
            put<double>(out, r.e1);
            put<double>(out, r.e2);
            put<double>(out, r.dcoh);
            put<std::uint8_t>(out, r.valid);
        }
        put<std::uint64_t>(out, rec.energy_e1.size());
        out.write(reinterpret_cast<const char*>(rec.energy_e1.data()),
                  static_cast<std::streamsize>(rec.energy_e1.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(rec.energy_e2.data()),
                  static_cast<std::streamsize>(rec.energy_e2.size() * sizeof(double)));
        put<std::uint64_t>(out, rec.marginals.size());
        for (const auto& m : rec.marginals) {
            put<std::int64_t>(out, m.time);
            put<std::int32_t>(out, m.axis);
            put<std::uint8_t>(out, m.basis == Basis::Momentum);
            put<std::uint64_t>(out, m.values.size());
            out.write(reinterpret_cast<const char*>(m.samples.data()),
                      static_cast<std::streamsize>(m.samples.size() * sizeof(double)));
            out.write(reinterpret_cast<const char*>(m.values.data()),
                      static_cast<std::streamsize>(m.values.size() * sizeof(double)));
        }
        put<std::uint64_t>(out, rec.husimi_slin.size());
        for (const auto& h : rec.husimi_slin) {
            put<std::int64_t>(out, h.t);
            put<double>(out, h.slin);
        }
        if (!out) throw IoError("checkpoint: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

struct CheckpointData {
    RunConfig config;
    std::int64_t t = 0;
    std::optional<WaveFunction2D> psi;
    RunRecord rec;
};

inline CheckpointData read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCkptMagic, 8) != 0)
        throw IoError("checkpoint: bad magic in " + path);
    if (get<std::uint32_t>(in) != 1) throw IoError("checkpoint: unsupported schema");

    CheckpointData data;
    data.config = parse_config(get_string(in));
    data.t = get<std::int64_t>(in);

    const auto n1 = get<std::int32_t>(in);
    const auto n2 = get<std::int32_t>(in);
    const Basis b1 = get<std::uint8_t>(in) ? Basis::Momentum : Basis::Position;
    const Basis b2 = get<std::uint8_t>(in) ? Basis::Momentum : Basis::Position;
    std::vector<cplx> amps(static_cast<size_t>(n1) * n2);
    in.read(reinterpret_cast<char*>(amps.data()),
            static_cast<std::streamsize>(amps.size() * sizeof(cplx)));
    if (!in) throw IoError("checkpoint: truncated state");
    data.psi.emplace(make_grid(n1, n2, data.config.hbar_s), b1, b2, std::move(amps));

    auto& rec = data.rec;
    rec.first_breach_t = get<std::int64_t>(in);
    rec.dcoh0_defined = get<std::uint8_t>(in);
    rec.dcoh0 = get<double>(in);
    const auto nrows = get<std::uint64_t>(in);
    rec.rows.resize(nrows);
    for (auto& r : rec.rows) {
        r.t = get<std::int64_t>(in);
        r.svn = get<double>(in);
        r.slin = get<double>(in);
        r.e1 = get<double>(in);
        r.e2 = get<double>(in);
        r.dcoh = get<double>(in);
        r.valid = get<std::uint8_t>(in);
    }
    const auto nen = get<std::uint64_t>(in);
    rec.energy_e1.resize(nen);
    rec.energy_e2.resize(nen);
    in.read(reinterpret_cast<char*>(rec.energy_e1.data()),
            static_cast<std::streamsize>(nen * sizeof(double)));
    in.read(reinterpret_cast<char*>(rec.energy_e2.data()),
            static_cast<std::streamsize>(nen * sizeof(double)));
    const auto nmarg = get<std::uint64_t>(in);
    rec.marginals.resize(nmarg);
    for (auto& m : rec.marginals) {
        m.time = get<std::int64_t>(in);
        m.axis = get<std::int32_t>(in);
        m.basis = get<std::uint8_t>(in) ? Basis::Momentum : Basis::Position;
        const auto len = get<std::uint64_t>(in);
        m.samples.resize(len);
        m.values.resize(len);
        in.read(reinterpret_cast<char*>(m.samples.data()),
                static_cast<std::streamsize>(len * sizeof(double)));
        in.read(reinterpret_cast<char*>(m.values.data()),
                static_cast<std::streamsize>(len * sizeof(double)));
    }
    const auto nhus = get<std::uint64_t>(in);
    rec.husimi_slin.resize(nhus);
    for (auto& h : rec.husimi_slin) {
        h.t = get<std::int64_t>(in);
        h.slin = get<double>(in);
    }
    if (!in) throw IoError("checkpoint: truncated record");
    return data;
}

} // namespace detail

// Rough peak allocation for a run: state, Schmidt workspace, reduced density
// matrix, transform copies. Refusal happens before anything is allocated.
inline std::int64_t estimate_run_bytes(const RunConfig& cfg) {
    const std::int64_t n2 = static_cast<std::int64_t>(cfg.n) * cfg.n;
    return 16 * n2 * 6;
}

// Execute one configured run and persist CSV + JSON sidecar (plus marginal
// snapshot files) under cfg.output.
inline RunRecord run(const RunConfig& cfg, const RunOptions& opt = {}) {
    const auto t0 = std::chrono::steady_clock::now();

    const std::int64_t cap = cfg.memory_cap_mb * 1024 * 1024;
    if (estimate_run_bytes(cfg) > cap)
        throw ConfigError("run: estimated memory " + std::to_string(estimate_run_bytes(cfg)) +
                          " bytes exceeds cap " + std::to_string(cap) +
                          " (raise memory_cap_mb or lower n)");

    const SystemParams params{cfg.k1, cfg.k2, cfg.xi12, cfg.hbar_s};
    params.validate();
    const SampleSchedule schedule = cfg.make_sample_schedule();

    RunRecord rec;
    std::optional<WaveFunction2D> psi;
    std::int64_t t_start = 0;

    if (!opt.resume_from.empty()) {
        auto data = detail::read_checkpoint(opt.resume_from);
        if (serialize_config(data.config) != serialize_config(cfg))
            throw ConfigError("run: checkpoint was produced by a different config");
        psi = std::move(data.psi);
        rec = std::move(data.rec);
        t_start = data.t;
    } else {
        const GridSpec grid = make_grid(cfg.n, cfg.n, cfg.hbar_s);
        const auto psi1 = coherent_state(grid, 1, cfg.initial1);
        const auto psi2 = coherent_state(grid, 2, cfg.initial2);
        psi = product_state(grid, psi1, psi2);
    }

    const std::string ckpt_path =
        opt.checkpoint_path.empty() ? cfg.output + ".ckpt" : opt.checkpoint_path;
    EvolveHooks hooks;
    if (opt.checkpoint_every > 0 || opt.stop_after > 0) {
        hooks.after_step = [&](std::int64_t t, const WaveFunction2D& state, RunRecord& r) {
            if (opt.checkpoint_every > 0 && t % opt.checkpoint_every == 0)
                detail::write_checkpoint(ckpt_path, cfg, t, state, r);
            if (opt.stop_after > 0 && t >= opt.stop_after) {
                detail::write_checkpoint(ckpt_path, cfg, t, state, r);
                return false;
            }
            return true;
        };
    }

    rec.config = cfg;
    try {
        evolve_loop(*psi, params, t_start, cfg.t_max, schedule, cfg.probes, rec, hooks);
    } catch (const Error&) {
        rec.complete = false;
        rec.provenance.platform = platform_string();
        rec.provenance.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (opt.persist) export_record(rec, cfg.output);
        throw;
    }

    rec.provenance.platform = platform_string();
    rec.provenance.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (opt.persist) export_record(rec, cfg.output);
    return rec;
}

// --- parameter sweeps ---------------------------------------------------------

enum class SweepAxis { Xi12, HbarS, K1K2 };

inline const char* to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::Xi12: return "xi12";
        case SweepAxis::HbarS: return "hbar_s";
        case SweepAxis::K1K2: return "k1k2";
    }
    return "?";
}

struct SweepValueSummary {
    double value = 0.0;
    bool ok = false;
    std::string error;
    std::string output_stem;
    std::optional<double> gamma_svn;      // early linear rate of S_vN
    std::optional<double> gamma_slin;     // early linear rate of S_lin
    std::optional<std::int64_t> t_b;
    std::optional<double> t_star_numeric;
    std::optional<double> t_star_predicted;
    std::optional<double> d_q;
    std::optional<double> idl_length;
};

struct SweepReport {
    SweepAxis axis = SweepAxis::Xi12;
    std::vector<SweepValueSummary> values; // sorted by value
    std::optional<double> beta;            // log-log slope of gamma_svn vs xi12
    double d_cl = 0.0;                     // classical slope for the base (k1, k2)
};

inline RunConfig apply_sweep_value(const RunConfig& base, SweepAxis axis, double value) {
    RunConfig c = base;
    switch (axis) {
        case SweepAxis::Xi12:
            c.xi12 = value;
            break;
        case SweepAxis::HbarS:
            c.hbar_s = value;
            c.initial1.sigma = default_sigma(value);
            c.initial2.sigma = default_sigma(value);
            break;
        case SweepAxis::K1K2:
            c.k2 = value + (base.k2 - base.k1);
            c.k1 = value;
            break;
    }
    c.output = base.output + "_" + to_string(axis) + "=" + detail::format_double(value);
    return c;
}

// Classical diffusion slope for the break-time detector, one ensemble per
// (k1, k2) pair.
inline double classical_dcl(const SystemParams& params, std::uint64_t seed) {
    SystemParams uncoupled = params;
    uncoupled.xi12 = 0.0;
    const auto ens = make_uniform_ensemble(4000, seed);
    return ensemble_energy(ens, uncoupled, 200).d_cl;
}

inline SweepValueSummary summarize_run(const RunRecord& rec, double d_cl) {
    SweepValueSummary s;
    s.value = 0.0;
    s.ok = true;
    s.output_stem = rec.config.output;

    std::vector<double> ts, svns;
    for (const auto& r : rec.rows)
        if (r.t >= 1 && std::isfinite(r.svn)) {
            ts.push_back(static_cast<double>(r.t));
            svns.push_back(r.svn);
        }
    if (auto rate = early_linear_rate(ts, svns)) s.gamma_svn = rate->first;

    const auto regimes = detect_regimes(rec, d_cl, rec.config.tb_slope_tol);
    s.t_b = regimes.t_b;
    s.t_star_numeric = regimes.t_star_numeric;
    s.gamma_slin = regimes.gamma;
    if (regimes.idl_interval)
        s.idl_length = regimes.idl_interval->second - regimes.idl_interval->first;

    if (regimes.t_star_numeric) {
        const auto tstar = static_cast<std::int64_t>(*regimes.t_star_numeric);
        if (tstar < rec.config.t_max) {
            try {
                s.d_q = estimate_dq(rec, {tstar, rec.config.t_max});
                s.t_star_predicted =
                    crossover_time({rec.config.xi12, rec.config.hbar_s, *s.d_q, 1.0});
            } catch (const Error&) {
                // no diffusive window; leave predictions absent
            }
        }
    }
    return s;
}

// Run the base config at each value of the swept axis, up to `workers` at a
// time, and aggregate growth rates and crossover times. Individual failures
// are recorded and do not stop the sweep.
inline SweepReport sweep(const RunConfig& base, SweepAxis axis, std::vector<double> values,
                         int workers) {
    if (values.empty()) throw ConfigError("sweep: no values");
    std::sort(values.begin(), values.end());
    for (size_t i = 1; i < values.size(); ++i)
        if (values[i] == values[i - 1]) throw ConfigError("sweep: duplicate value");
    if (workers < 1) workers = 1;

    SweepReport report;
    report.axis = axis;
    report.values.resize(values.size());

    std::map<std::pair<double, double>, double> dcl_cache;
    std::mutex dcl_mutex;
    auto dcl_for = [&](const RunConfig& cfg) {
        std::lock_guard<std::mutex> lock(dcl_mutex);
        const auto key = std::make_pair(cfg.k1, cfg.k2);
        auto it = dcl_cache.find(key);
        if (it != dcl_cache.end()) return it->second;
        const double d = classical_dcl({cfg.k1, cfg.k2, 0.0, cfg.hbar_s}, base.seed);
        dcl_cache.emplace(key, d);
        return d;
    };

    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= values.size()) return;
            auto& slot = report.values[i];
            slot.value = values[i];
            const RunConfig cfg = apply_sweep_value(base, axis, values[i]);
            slot.output_stem = cfg.output;
            try {
                const RunRecord rec = run(cfg);
                const double d_cl = dcl_for(cfg);
                auto s = summarize_run(rec, d_cl);
                s.value = values[i];
                slot = s;
            } catch (const Error& e) {
                slot.ok = false;
                slot.error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min<int>(workers, static_cast<int>(values.size())); ++w)
        pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    report.d_cl = dcl_cache.empty() ? 0.0 : dcl_cache.begin()->second;

    size_t ok_count = 0;
    for (const auto& s : report.values) ok_count += s.ok;
    if (ok_count == 0) throw Error("sweep: all runs failed");

    if (axis == SweepAxis::Xi12) {
        std::vector<double> lx, ly;
        for (const auto& s : report.values)
            if (s.ok && s.gamma_svn && *s.gamma_svn > 0 && s.value > 0) {
                lx.push_back(std::log(s.value));
                ly.push_back(std::log(*s.gamma_svn));
            }
        if (lx.size() >= 3) report.beta = linear_fit(lx, ly).slope;
    }
    return report;
}

inline void export_sweep(const SweepReport& report, const std::string& stem) {
    std::ostringstream csv;
    csv << "value,ok,gamma_svn,gamma_slin,t_b,t_star_numeric,t_star_predicted,d_q,idl_length\n";
    auto cell = [](const auto& opt) {
        return opt ? detail::format_double(static_cast<double>(*opt)) : std::string("nan");
    };
    for (const auto& s : report.values)
        csv << detail::format_double(s.value) << "," << (s.ok ? 1 : 0) << ","
            << cell(s.gamma_svn) << "," << cell(s.gamma_slin) << "," << cell(s.t_b) << ","
            << cell(s.t_star_numeric) << "," << cell(s.t_star_predicted) << "," << cell(s.d_q)
            << "," << cell(s.idl_length) << "\n";
    detail::write_text_file(stem + ".sweep.csv", csv.str());

    nlohmann::json j;
    j["schema"] = 1;
    j["axis"] = to_string(report.axis);
    j["d_cl"] = report.d_cl;
    if (report.beta) j["beta"] = *report.beta;
    auto arr = nlohmann::json::array();
    for (const auto& s : report.values) {
        nlohmann::json v;
        v["value"] = s.value;
        v["ok"] = s.ok;
        if (!s.error.empty()) v["error"] = s.error;
        v["output"] = s.output_stem;
        if (s.gamma_svn) v["gamma_svn"] = *s.gamma_svn;
        if (s.gamma_slin) v["gamma_slin"] = *s.gamma_slin;
        if (s.t_b) v["t_b"] = *s.t_b;
        if (s.t_star_numeric) v["t_star_numeric"] = *s.t_star_numeric;
        if (s.t_star_predicted) v["t_star_predicted"] = *s.t_star_predicted;
        if (s.d_q) v["d_q"] = *s.d_q;
        if (s.idl_length) v["idl_length"] = *s.idl_length;
        arr.push_back(v);
    }
    j["values"] = arr;
    detail::write_text_file(stem + ".sweep.json", j.dump(2) + "\n");
}

} // namespace ckr
