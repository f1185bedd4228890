#pragma once

// Comma-separated tables (17 significant digits, one header line), flat JSON reports
// and the run manifest.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlwave/errors.hpp"
#include "nlwave/field.hpp"
#include "nlwave/gauge.hpp"
#include "nlwave/testfn.hpp"
#include "nlwave/wavesim.hpp"

namespace nlwave {

inline constexpr const char* kToolVersion = "0.1.0";

using Json = nlohmann::ordered_json;

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw MissingArtifact("table has no column '" + name + "'");
    }
};

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_csv(const std::filesystem::path& path, const CsvTable& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
    out << "\n";
    std::string line;
    for (const auto& r : t.rows) {
        if (r.size() != t.header.size()) throw std::logic_error("csv row width does not match header");
        line.clear();
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) line += ',';
            line += format_number(r[i]);
        }
        out << line << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// Numeric table with a header row; empty cells read as NaN.
inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact("missing input file " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw MissingArtifact("empty table " + path.string());
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cell;
        std::istringstream ss(s);
        while (std::getline(ss, cell, ',')) {
            if (!cell.empty() && cell.back() == '\r') cell.pop_back();
            out.push_back(cell);
        }
        if (!s.empty() && s.back() == ',') out.emplace_back();
        return out;
    };
    t.header = split(line);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line);
        if (cells.size() != t.header.size())
            throw MissingArtifact(path.string() + ":" + std::to_string(lineno) + ": wrong number of columns");
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) {
            if (c.empty() || c == "nan") {
                row.push_back(std::nan(""));
                continue;
            }
            std::size_t pos = 0;
            double v = 0;
            try {
                v = std::stod(c, &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            if (pos != c.size())
                throw MissingArtifact(path.string() + ":" + std::to_string(lineno) + ": not a number '" + c + "'");
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

inline Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact("missing input file " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw MissingArtifact("unreadable " + path.string() + ": " + e.what());
    }
}

/// Non-finite values become null.
inline Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
inline Json json_number(const std::optional<double>& v) { return v ? json_number(*v) : Json(nullptr); }

// ---- gauge ----

inline CsvTable gauge_csv(const AuxTriple& V, const GaugeField& G) {
    const auto& grid = V.grid;
    CsvTable t{{"t", "x", "h", "v1", "v2", "dh_dx", "g", "g_t", "g_x"}, {}};
    t.rows.reserve(grid.nt * grid.nx);
    for (std::size_t l = 0; l < grid.nt; ++l)
        for (std::size_t c = 0; c < grid.nx; ++c) {
            const std::size_t col = grid.output_col0() + c;
            const std::size_t i = grid.index(l, col);
            t.rows.push_back({grid.t(l), grid.x_min + static_cast<double>(c) * grid.step, V.h[i], V.v1[i], V.v2[i], V.dh[i], G.g[i], G.g_t[i], G.g_x[i]});
        }
    return t;
}

inline Json convergence_json(const ConvergenceReport& r, const Variant variant, const CharacteristicGrid& grid) {
    Json j;
    j["variant"] = to_string(variant);
    j["iterations"] = r.iterations;
    j["final_update_norm"] = json_number(r.final_update_norm);
    j["contraction_r"] = json_number(r.contraction_r);
    j["tail_bound"] = json_number(r.tail_bound);
    j["in_K_theta"] = r.in_K_theta;
    j["lambda"] = r.lambda;
    j["theta"] = r.theta;
    j["theta_prime"] = r.theta_prime;
    j["s_max"] = r.s_max;
    j["t_max"] = grid.t_max;
    j["x_min"] = grid.x_min;
    j["x_max"] = grid.x_max;
    j["step"] = grid.step;
    j["margin_v1"] = json_number(r.margins.v1);
    j["margin_v2"] = json_number(r.margins.v2);
    j["margin_h"] = json_number(r.margins.h);
    return j;
}

/// Gauge values back from a table written by gauge_csv.
inline GaugeTable read_gauge_table(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    const std::size_t ct = t.column("t"), cx = t.column("x"), cg = t.column("g"), cgt = t.column("g_t"),
                      cgx = t.column("g_x");
    if (t.rows.size() < 2) throw MissingArtifact(path.string() + ": too few rows");
    GaugeTable G;
    G.x_min = t.rows[0][cx];
    std::size_t nx = 0;
    while (nx < t.rows.size() && t.rows[nx][ct] == t.rows[0][ct]) ++nx;
    if (nx < 2 || t.rows.size() % nx != 0) throw MissingArtifact(path.string() + ": not a rectangular lattice");
    G.nx = nx;
    G.nt = t.rows.size() / nx;
    G.step = t.rows[1][cx] - t.rows[0][cx];
    if (!(G.step > 0.0)) throw MissingArtifact(path.string() + ": x not increasing");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const double tx = static_cast<double>(r / nx) * G.step, xx = G.x_min + static_cast<double>(r % nx) * G.step;
        if (std::abs(row[ct] - tx) > 1e-7 * G.step || std::abs(row[cx] - xx) > 1e-7 * G.step)
            throw MissingArtifact(path.string() + ": row " + std::to_string(r + 2) + " is off the lattice");
        G.g.push_back(row[cg]);
        G.g_t.push_back(row[cgt]);
        G.g_x.push_back(row[cgx]);
    }
    return G;
}

// ---- simulation ----

inline CsvTable norm_history_csv(const SimSolution& s) {
    CsvTable t{{"t", "sup_u", "h1l2_norm"}, {}};
    for (const auto& r : s.norm_history) t.rows.push_back({r.t, r.sup_u, r.h1l2_norm});
    return t;
}

/// Stored levels restricted to |x| <= x_max (x_max <= 0 keeps every column).
inline CsvTable solution_csv(const SpaceTimeField& f, double x_max) {
    CsvTable t{{"t", "x", "u", "u_t"}, {}};
    for (std::size_t m = 0; m < f.nt; ++m)
        for (std::size_t j = 0; j < f.nx; ++j) {
            const double x = f.x(j);
            if (x_max > 0.0 && std::abs(x) > x_max + 1e-9 * f.dx) continue;
            t.rows.push_back({f.t(m), x, f.at(m, j), f.dt_at(m, j)});
        }
    return t;
}

inline SpaceTimeField read_solution(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    const std::size_t ct = t.column("t"), cx = t.column("x"), cu = t.column("u"), cut = t.column("u_t");
    if (t.rows.empty()) throw MissingArtifact(path.string() + ": no rows");
    std::size_t nx = 0;
    while (nx < t.rows.size() && t.rows[nx][ct] == t.rows[0][ct]) ++nx;
    if (t.rows.size() % nx != 0) throw MissingArtifact(path.string() + ": not a rectangular grid");
    const std::size_t nt = t.rows.size() / nx;
    const double dx = nx > 1 ? t.rows[1][cx] - t.rows[0][cx] : 0.0;
    const double dt = nt > 1 ? t.rows[nx][ct] - t.rows[0][ct] : 0.0;
    SpaceTimeField f(t.rows[0][ct], dt, t.rows[0][cx], dx, nt, nx);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::size_t m = r / nx, j = r % nx;
        const auto& row = t.rows[r];
        if (std::abs(row[ct] - f.t(m)) > 1e-7 * std::max(dt, 1e-300) ||
            std::abs(row[cx] - f.x(j)) > 1e-7 * std::max(dx, 1e-300))
            throw MissingArtifact(path.string() + ": row " + std::to_string(r + 2) + " is off the grid");
        f.at(m, j) = row[cu];
        f.dt_at(m, j) = row[cut];
    }
    return f;
}

// ---- functionals ----

struct FunctionalRow {
    FunctionalReport report;
    BlowupCheck check;
};

inline CsvTable functionals_csv(const std::vector<FunctionalRow>& rows) {
    CsvTable t{{"tau", "R", "I", "J", "K1", "K2", "K3", "K4", "I_prime", "I_double_prime", "D", "C_fit", "defect"}, {}};
    for (const auto& fr : rows) {
        const auto& r = fr.report;
        t.rows.push_back({r.tau, r.R, r.I, r.J, r.K1, r.K2, r.K3, r.K4, r.I_prime, r.I_double_prime, r.D,
                          fr.check.C_fit, r.defect});
    }
    return t;
}

// ---- sweep ----

inline double opt_or_nan(const std::optional<double>& v) { return v ? *v : std::nan(""); }

inline CsvTable sweep_csv(const std::vector<LifespanRecord>& recs) {
    CsvTable t{{"epsilon", "T_eps", "dx", "T_eps_refined", "rel_diff", "confirmed"}, {}};
    for (const auto& r : recs)
        t.rows.push_back({r.epsilon, opt_or_nan(r.T_eps), r.dx, opt_or_nan(r.T_eps_refined), r.rel_diff,
                          r.confirmed ? 1.0 : 0.0});
    return t;
}

/// Records from a replay table: epsilon and T_eps are required; missing refinement
/// columns mark the records as confirmed.
inline std::vector<LifespanRecord> read_replay(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    const std::size_t ce = t.column("epsilon"), cT = t.column("T_eps");
    auto optional_col = [&](const std::string& name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < t.header.size(); ++i)
            if (t.header[i] == name) return i;
        return std::nullopt;
    };
    const auto cdx = optional_col("dx"), cref = optional_col("T_eps_refined"), crel = optional_col("rel_diff"),
               cconf = optional_col("confirmed");
    std::vector<LifespanRecord> out;
    for (const auto& row : t.rows) {
        LifespanRecord r;
        r.epsilon = row[ce];
        if (std::isfinite(row[cT])) r.T_eps = row[cT];
        r.dx = cdx ? row[*cdx] : 0.0;
        if (cref && std::isfinite(row[*cref])) r.T_eps_refined = row[*cref];
        r.rel_diff = crel ? row[*crel] : 0.0;
        r.confirmed = cconf ? row[*cconf] != 0.0 : r.T_eps.has_value();
        out.push_back(r);
    }
    return out;
}

// ---- manifest ----

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Merges one stage entry into dir/manifest.json. The file list is the union over stages.
inline void update_manifest(const std::filesystem::path& dir, const std::string& config_hash, const std::string& stage,
                            Json stage_entry, const std::vector<std::string>& files, const std::string& started) {
    const auto path = dir / "manifest.json";
    Json m;
    if (std::filesystem::exists(path)) {
        try {
            m = read_json(path);
        } catch (const MissingArtifact&) {
            m = Json::object();
        }
    }
    if (!m.is_object()) m = Json::object();
    m["tool"] = "nlwave";
    m["version"] = kToolVersion;
    m["config_hash"] = config_hash;
    stage_entry["config_hash"] = config_hash;
    stage_entry["started"] = started;
    stage_entry["finished"] = utc_timestamp();
    stage_entry["files"] = files;
    m["stages"][stage] = stage_entry;
    std::set<std::string> all;
    for (const auto& [name, entry] : m["stages"].items())
        if (entry.contains("files"))
            for (const auto& f : entry["files"]) all.insert(f.get<std::string>());
    all.insert("manifest.json");
    m["files"] = std::vector<std::string>(all.begin(), all.end());
    write_json(path, m);
}

}  // namespace nlwave
