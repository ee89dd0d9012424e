#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ckr/config.hpp"
#include "ckr/marginal.hpp"
#include "ckr/version.hpp"

namespace ckr {

constexpr const char* kCsvHeader = "t,svn,slin,e1,e2,dcoh,valid";

// One scheduled probe sample. Disabled probes hold NaN.
struct SampleRow {
    std::int64_t t = 0;
    double svn = std::numeric_limits<double>::quiet_NaN();
    double slin = std::numeric_limits<double>::quiet_NaN();
    double e1 = std::numeric_limits<double>::quiet_NaN();
    double e2 = std::numeric_limits<double>::quiet_NaN();
    double dcoh = std::numeric_limits<double>::quiet_NaN();
    bool valid = true;
};

struct HusimiSample {
    std::int64_t t = 0;
    double slin = 0.0; // Husimi-route linear entropy
};

struct Provenance {
    std::string version = kVersion;
    std::string platform;
    double wall_seconds = 0.0;
};

inline std::string platform_string() {
    std::string s;
#if defined(__clang__)
    s = "clang-" + std::to_string(__clang_major__);
#elif defined(__GNUC__)
    s = "gcc-" + std::to_string(__GNUC__) + "." + std::to_string(__GNUC_MINOR__);
#else
    s = "unknown-compiler";
#endif
#if defined(__x86_64__)
    s += "/x86_64";
#elif defined(__aarch64__)
    s += "/aarch64";
#endif
    return s;
}

// Full output of one run: scheduled probe rows, the dense per-kick energy
// series, optional marginal snapshots, and validity bookkeeping.
struct RunRecord {
    RunConfig config;
    std::vector<SampleRow> rows;

    // dense energies, index = kick count (present when the energy probe is on)
    std::vector<double> energy_e1;
    std::vector<double> energy_e2;

    std::vector<MarginalDistribution> marginals;
    std::vector<HusimiSample> husimi_slin;

    std::int64_t first_breach_t = -1; // -1: momentum edge never breached
    double dcoh0 = std::numeric_limits<double>::quiet_NaN();
    bool dcoh0_defined = false;
    bool complete = true;

    Provenance provenance;

    bool valid_at(std::int64_t t) const {
        return first_breach_t < 0 || t < first_breach_t;
    }

    std::vector<std::int64_t> sample_times() const {
        std::vector<std::int64_t> t;
        t.reserve(rows.size());
        for (const auto& r : rows) t.push_back(r.t);
        return t;
    }

    std::vector<double> column(double SampleRow::* field) const {
        std::vector<double> v;
        v.reserve(rows.size());
        for (const auto& r : rows) v.push_back(r.*field);
        return v;
    }
};

// Everything except provenance (wall time differs between identical runs).
inline bool same_data(const RunRecord& a, const RunRecord& b) {
    auto row_eq = [](const SampleRow& x, const SampleRow& y) {
        auto feq = [](double u, double v) {
            return (std::isnan(u) && std::isnan(v)) || u == v;
        };
        return x.t == y.t && feq(x.svn, y.svn) && feq(x.slin, y.slin) && feq(x.e1, y.e1) &&
               feq(x.e2, y.e2) && feq(x.dcoh, y.dcoh) && x.valid == y.valid;
    };
    if (a.rows.size() != b.rows.size()) return false;
    for (size_t i = 0; i < a.rows.size(); ++i)
        if (!row_eq(a.rows[i], b.rows[i])) return false;
    return a.config == b.config && a.energy_e1 == b.energy_e1 && a.energy_e2 == b.energy_e2 &&
           a.marginals == b.marginals && a.first_breach_t == b.first_breach_t &&
           a.complete == b.complete;
}

namespace detail {

inline double parse_cell(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw IoError("csv: bad numeric cell '" + s + "'");
    return v;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace detail

inline std::string marginal_file_name(const std::string& stem, std::int64_t t, int axis,
                                      Basis basis) {
    return stem + ".marginal.t" + std::to_string(t) + "." +
           (basis == Basis::Position ? "x" : "p") + std::to_string(axis) + ".txt";
}

inline nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["schema"] = c.schema;
    j["n"] = c.n;
    j["hbar_s"] = c.hbar_s;
    j["k1"] = c.k1;
    j["k2"] = c.k2;
    j["xi12"] = c.xi12;
    j["x0_1"] = c.initial1.x0;
    j["p0_1"] = c.initial1.p0;
    j["sigma_1"] = c.initial1.sigma;
    j["x0_2"] = c.initial2.x0;
    j["p0_2"] = c.initial2.p0;
    j["sigma_2"] = c.initial2.sigma;
    j["t_max"] = c.t_max;
    j["schedule"] = c.schedule == ScheduleKind::Log ? "log" : "linear";
    j["samples"] = c.samples;
    j["probes"] = probes_to_string(c.probes);
    j["marginal_times"] = c.probes.marginal_times;
    j["seed"] = c.seed;
    j["output"] = c.output;
    j["memory_cap_mb"] = c.memory_cap_mb;
    j["tb_slope_tol"] = c.tb_slope_tol;
    return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    // reuse the text parser so validation lives in one place
    std::ostringstream text;
    text << "schema = " << j.at("schema").get<int>() << "\n";
    text << "n = " << j.at("n").get<int>() << "\n";
    text << "hbar_s = " << detail::format_double(j.at("hbar_s").get<double>()) << "\n";
    text << "k1 = " << detail::format_double(j.at("k1").get<double>()) << "\n";
    text << "k2 = " << detail::format_double(j.at("k2").get<double>()) << "\n";
    text << "xi12 = " << detail::format_double(j.at("xi12").get<double>()) << "\n";
    text << "x0_1 = " << detail::format_double(j.at("x0_1").get<double>()) << "\n";
    text << "p0_1 = " << detail::format_double(j.at("p0_1").get<double>()) << "\n";
    text << "sigma_1 = " << detail::format_double(j.at("sigma_1").get<double>()) << "\n";
    text << "x0_2 = " << detail::format_double(j.at("x0_2").get<double>()) << "\n";
    text << "p0_2 = " << detail::format_double(j.at("p0_2").get<double>()) << "\n";
    text << "sigma_2 = " << detail::format_double(j.at("sigma_2").get<double>()) << "\n";
    text << "t_max = " << j.at("t_max").get<std::int64_t>() << "\n";
    text << "schedule = " << j.at("schedule").get<std::string>() << "\n";
    text << "samples = " << j.at("samples").get<int>() << "\n";
    text << "probes = " << j.at("probes").get<std::string>() << "\n";
    const auto mt = j.at("marginal_times").get<std::vector<std::int64_t>>();
    if (!mt.empty()) {
        text << "marginal_times = ";
        for (size_t i = 0; i < mt.size(); ++i) text << (i ? "," : "") << mt[i];
        text << "\n";
    }
    text << "seed = " << j.at("seed").get<std::uint64_t>() << "\n";
    text << "output = " << j.at("output").get<std::string>() << "\n";
    text << "memory_cap_mb = " << j.at("memory_cap_mb").get<std::int64_t>() << "\n";
    text << "tb_slope_tol = " << detail::format_double(j.at("tb_slope_tol").get<double>()) << "\n";
    return parse_config(text.str());
}

// Writes <stem>.csv (scheduled rows), <stem>.energy.csv (dense energies, if
// recorded), <stem>.json (config + provenance sidecar) and one file per
// marginal snapshot. Floats are shortest round-trip decimals, so identical
// records produce identical bytes.
inline void export_record(const RunRecord& rec, const std::string& stem) {
    using detail::format_double;
    namespace fs = std::filesystem;

    const fs::path base(stem);
    if (base.has_parent_path()) fs::create_directories(base.parent_path());

    std::ostringstream csv;
    csv << kCsvHeader << "\n";
    for (const auto& r : rec.rows) {
        csv << r.t << "," << format_double(r.svn) << "," << format_double(r.slin) << ","
            << format_double(r.e1) << "," << format_double(r.e2) << "," << format_double(r.dcoh)
            << "," << (r.valid ? 1 : 0) << "\n";
    }
    detail::write_text_file(stem + ".csv", csv.str());

    if (!rec.energy_e1.empty()) {
        std::ostringstream ecsv;
        ecsv << "t,e1,e2\n";
        for (size_t t = 0; t < rec.energy_e1.size(); ++t)
            ecsv << t << "," << format_double(rec.energy_e1[t]) << ","
                 << format_double(rec.energy_e2[t]) << "\n";
        detail::write_text_file(stem + ".energy.csv", ecsv.str());
    }

    for (const auto& m : rec.marginals) {
        std::ostringstream mss;
        for (double v : m.values) mss << format_double(v) << "\n";
        detail::write_text_file(marginal_file_name(stem, m.time, m.axis, m.basis), mss.str());
    }

    nlohmann::json j;
    j["schema"] = 1;
    j["config"] = config_to_json(rec.config);
    j["provenance"] = {{"version", rec.provenance.version},
                       {"platform", rec.provenance.platform},
                       {"wall_seconds", rec.provenance.wall_seconds}};
    j["first_breach_t"] = rec.first_breach_t;
    j["complete"] = rec.complete;
    j["dcoh0_defined"] = rec.dcoh0_defined;
    if (rec.dcoh0_defined) j["dcoh0"] = rec.dcoh0;
    if (!rec.husimi_slin.empty()) {
        auto arr = nlohmann::json::array();
        for (const auto& h : rec.husimi_slin) arr.push_back({{"t", h.t}, {"slin", h.slin}});
        j["husimi_slin"] = arr;
    }
    auto marg = nlohmann::json::array();
    for (const auto& m : rec.marginals)
        marg.push_back({{"t", m.time},
                        {"axis", m.axis},
                        {"basis", m.basis == Basis::Position ? "x" : "p"}});
    j["marginal_snapshots"] = marg;
    detail::write_text_file(stem + ".json", j.dump(2) + "\n");
}

// Inverse of export_record, for the report tool and round-trip checks.
inline RunRecord read_record(const std::string& stem) {
    RunRecord rec;

    const auto j = nlohmann::json::parse(detail::read_text_file(stem + ".json"));
    rec.config = config_from_json(j.at("config"));
    rec.first_breach_t = j.at("first_breach_t").get<std::int64_t>();
    rec.complete = j.at("complete").get<bool>();
    rec.dcoh0_defined = j.at("dcoh0_defined").get<bool>();
    if (rec.dcoh0_defined) rec.dcoh0 = j.at("dcoh0").get<double>();
    rec.provenance.version = j.at("provenance").at("version").get<std::string>();
    rec.provenance.platform = j.at("provenance").at("platform").get<std::string>();
    rec.provenance.wall_seconds = j.at("provenance").at("wall_seconds").get<double>();
    if (j.contains("husimi_slin"))
        for (const auto& h : j.at("husimi_slin"))
            rec.husimi_slin.push_back({h.at("t").get<std::int64_t>(), h.at("slin").get<double>()});

    std::istringstream csv(detail::read_text_file(stem + ".csv"));
    std::string line;
    if (!std::getline(csv, line) || line != kCsvHeader)
        throw IoError(stem + ".csv: bad header '" + line + "'");
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        SampleRow r;
        auto next = [&]() {
            if (!std::getline(ls, cell, ',')) throw IoError(stem + ".csv: short row '" + line + "'");
            return cell;
        };
        r.t = static_cast<std::int64_t>(detail::parse_cell(next()));
        r.svn = detail::parse_cell(next());
        r.slin = detail::parse_cell(next());
        r.e1 = detail::parse_cell(next());
        r.e2 = detail::parse_cell(next());
        r.dcoh = detail::parse_cell(next());
        r.valid = detail::parse_cell(next()) != 0.0;
        rec.rows.push_back(r);
    }

    if (std::filesystem::exists(stem + ".energy.csv")) {
        std::istringstream ecsv(detail::read_text_file(stem + ".energy.csv"));
        if (!std::getline(ecsv, line) || line != "t,e1,e2")
            throw IoError(stem + ".energy.csv: bad header");
        while (std::getline(ecsv, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::string cell;
            std::getline(ls, cell, ',');
            std::getline(ls, cell, ',');
            rec.energy_e1.push_back(detail::parse_cell(cell));
            std::getline(ls, cell, ',');
            rec.energy_e2.push_back(detail::parse_cell(cell));
        }
    }

    // marginal snapshots: values from the named files, lattices from the grid
    const GridSpec grid = make_grid(rec.config.n, rec.config.n, rec.config.hbar_s);
    for (const auto& m : j.at("marginal_snapshots")) {
        MarginalDistribution dist;
        dist.time = m.at("t").get<std::int64_t>();
        dist.axis = m.at("axis").get<int>();
        dist.basis = m.at("basis").get<std::string>() == "x" ? Basis::Position : Basis::Momentum;
        const int n = grid.size(dist.axis);
        std::istringstream ms(detail::read_text_file(
            marginal_file_name(stem, dist.time, dist.axis, dist.basis)));
        while (std::getline(ms, line))
            if (!line.empty()) dist.values.push_back(detail::parse_cell(line));
        if (static_cast<int>(dist.values.size()) != n)
            throw IoError("marginal snapshot size mismatch for t=" + std::to_string(dist.time));
        dist.samples.resize(n);
        for (int i = 0; i < n; ++i)
            dist.samples[i] = dist.basis == Basis::Position
                                  ? grid.position(dist.axis, i)
                                  : grid.hbar_s * (i - n / 2);
        rec.marginals.push_back(std::move(dist));
    }

    return rec;
}

} // namespace ckr
