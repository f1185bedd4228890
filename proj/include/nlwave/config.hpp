#pragma once

// INI experiment configuration: [damping], [gauge], [sim], [functionals], [output].

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "nlwave/damping.hpp"
#include "nlwave/errors.hpp"
#include "nlwave/gauge.hpp"
#include "nlwave/testfn.hpp"
#include "nlwave/wavesim.hpp"

namespace nlwave {

struct GaugeConfig {
    bool present = false;
    ConstructOptions construct;
    std::optional<double> s_max;  ///< empty = automatic
    double t_max = 0.0, x_min = 0.0, x_max = 0.0, step = 0.0;
    double tail_tol = 0.0;
    std::size_t max_nodes = 10'000'000;
};

struct SimConfig {
    bool present = false;
    double p = 2.0;
    std::optional<double> epsilon;
    std::vector<double> eps_list;
    InitialData data;
    double dx = 0.0;
    SimOptions opts;
    bool confirm_refinement = true;
    std::optional<std::filesystem::path> replay;
    double store_t_max = 0.0;  ///< 0 stores no solution table
    double store_x_max = 0.0;
};

enum class RPolicy { EqualTau, Fixed, AlphaPower };

inline std::string to_string(RPolicy r) {
    switch (r) {
        case RPolicy::EqualTau: return "equal_tau";
        case RPolicy::Fixed: return "fixed";
        case RPolicy::AlphaPower: return "alpha_power";
    }
    return "?";
}

struct FunctionalsConfig {
    bool present = false;
    std::vector<double> tau_list;
    RPolicy policy = RPolicy::EqualTau;
    double R_fixed = 0.0;
    EnvelopeVariant variant = EnvelopeVariant::Thm1;
    std::size_t scan_doublings = 4;

    double R_of(double tau, double p) const {
        switch (policy) {
            case RPolicy::EqualTau: return tau;
            case RPolicy::Fixed: return R_fixed;
            case RPolicy::AlphaPower: return std::pow(tau, 1.0 + 1.0 / p);
        }
        return tau;
    }
};

struct OutputConfig {
    std::string dir;
    bool csv = true, json = true;
};

struct ExperimentConfig {
    std::filesystem::path source;
    DampingSpec damping;
    GaugeConfig gauge;
    SimConfig sim;
    FunctionalsConfig functionals;
    OutputConfig output;
    std::string canonical;  ///< sorted section.key=value lines
    std::uint64_t hash = 0;
};

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
}

namespace detail {

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

class Section {
public:
    Section(std::string name, const boost::property_tree::ptree* tree) : name_(std::move(name)), tree_(tree) {}

    bool present() const { return tree_ != nullptr; }
    std::string key_name(const std::string& key) const { return "[" + name_ + "] " + key; }

    bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }

    std::string raw(const std::string& key) const {
        used_.insert(key);
        if (!has(key)) throw ConfigError("missing key " + key_name(key));
        return trim(tree_->get<std::string>(key));
    }

    double number(const std::string& key) const { return parse_number(key, raw(key)); }
    double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

    std::optional<double> number_or_auto(const std::string& key) const {
        if (!has(key)) return std::nullopt;
        const std::string v = lower(raw(key));
        if (v == "auto") return std::nullopt;
        return parse_number(key, v);
    }

    std::size_t count(const std::string& key, std::size_t fallback) const {
        if (!has(key)) return fallback;
        const double v = number(key);
        if (!(v >= 0.0) || v != std::floor(v) || v > 1e15)
            throw ConfigError(key_name(key) + " must be a non-negative integer");
        return static_cast<std::size_t>(v);
    }

    std::string word(const std::string& key) const { return lower(raw(key)); }
    std::string word(const std::string& key, const std::string& fallback) const {
        return has(key) ? word(key) : fallback;
    }

    bool flag(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string v = word(key);
        if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
        if (v == "false" || v == "no" || v == "0" || v == "off") return false;
        throw ConfigError(key_name(key) + " must be true or false, got '" + v + "'");
    }

    std::vector<double> list(const std::string& key) const {
        std::string v = raw(key);
        std::replace(v.begin(), v.end(), ',', ' ');
        std::istringstream in(v);
        std::vector<double> out;
        for (std::string tok; in >> tok;) out.push_back(parse_number(key, tok));
        if (out.empty()) throw ConfigError(key_name(key) + " is empty");
        return out;
    }

    std::vector<std::string> words(const std::string& key) const {
        std::string v = lower(raw(key));
        std::replace(v.begin(), v.end(), ',', ' ');
        std::istringstream in(v);
        std::vector<std::string> out;
        for (std::string tok; in >> tok;) out.push_back(tok);
        return out;
    }

    void reject_unknown() const {
        if (!tree_) return;
        for (const auto& kv : *tree_)
            if (!used_.count(kv.first)) throw ConfigError("unknown key " + key_name(kv.first));
    }

private:
    double parse_number(const std::string& key, const std::string& v) const {
        std::size_t pos = 0;
        double d = 0.0;
        try {
            d = std::stod(v, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || trim(v.substr(pos)) != "" || !std::isfinite(d))
            throw ConfigError(key_name(key) + " must be a finite number, got '" + v + "'");
        return d;
    }

    std::string name_;
    const boost::property_tree::ptree* tree_;
    mutable std::set<std::string> used_;
};

template <class E>
E choose(const Section& s, const std::string& key, const std::string& value, const std::map<std::string, E>& options) {
    const auto it = options.find(value);
    if (it != options.end()) return it->second;
    std::string names;
    for (const auto& kv : options) names += (names.empty() ? "" : ", ") + kv.first;
    throw ConfigError(s.key_name(key) + " must be one of {" + names + "}, got '" + value + "'");
}

inline void parse_damping(const Section& s, ExperimentConfig& c) {
    if (!s.present()) throw ConfigError("missing section [damping]");
    const Family family = choose<Family>(s, "family", s.word("family"),
                                         {{"perturbation", Family::Perturbation},
                                          {"scaleinv2", Family::ScaleInv2},
                                          {"scaleinvmu", Family::ScaleInvMu}});
    const double delta = s.number("delta");
    const double k = s.number("k");
    const double mu = family == Family::ScaleInvMu ? s.number("mu") : s.number("mu", 2.0);
    const std::string prof = s.word("profile");
    PerturbationProfile profile;
    if (prof == "zero") {
        profile = PerturbationProfile::zero();
    } else if (prof == "timeonly") {
        profile = PerturbationProfile::time_only();
    } else if (prof == "cosine") {
        profile = PerturbationProfile::cosine(s.number("omega"));
    } else if (prof == "custom") {
        throw ConfigError(s.key_name("profile") + " = custom is only available from code");
    } else {
        throw ConfigError(s.key_name("profile") + " must be one of {zero, timeonly, cosine}, got '" + prof + "'");
    }
    if (prof != "cosine" && s.has("omega")) s.raw("omega");  // accepted, unused
    c.damping = make_damping(family, delta, k, profile, mu);
}

inline void parse_gauge(const Section& s, ExperimentConfig& c) {
    auto& g = c.gauge;
    g.present = s.present();
    if (!g.present) return;
    auto& o = g.construct;
    o.theta = s.number("theta", 0.5);
    const auto lam = s.number_or_auto("lambda");
    o.lambda = lam.value_or(0.0);
    if (lam && !(*lam > 0.0)) throw ConfigError(s.key_name("lambda") + " must be > 0 or auto");
    o.tol = s.number("tol", 1e-8);
    o.max_iter = s.count("max_iter", 200);
    o.step.closure = choose<Closure>(s, "closure", s.word("closure", "farfield"),
                                     {{"farfield", Closure::FarField}, {"zero", Closure::Zero}});
    o.step.rule = choose<QuadratureRule>(s, "quadrature", s.word("quadrature", "cubic"),
                                         {{"cubic", QuadratureRule::Cubic}, {"trapezoid", QuadratureRule::Trapezoid}});
    g.s_max = s.number_or_auto("s_max");
    g.t_max = s.number("t_max");
    g.x_min = s.number("x_min");
    g.x_max = s.number("x_max");
    g.step = s.number("step");
    g.tail_tol = s.number("tail_tol", 0.1 * o.tol);
    g.max_nodes = s.count("max_nodes", 10'000'000);
    if (!(o.theta > 0.0 && o.theta < 1.0)) throw ConfigError(s.key_name("theta") + " must lie in (0,1)");
    if (!(o.tol > 0.0)) throw ConfigError(s.key_name("tol") + " must be > 0");
    if (o.max_iter == 0) throw ConfigError(s.key_name("max_iter") + " must be >= 1");
    if (!(g.step > 0.0)) throw ConfigError(s.key_name("step") + " must be > 0");
    if (!(g.t_max > 0.0)) throw ConfigError(s.key_name("t_max") + " must be > 0");
    if (!(g.x_max > g.x_min)) throw ConfigError(s.key_name("x_max") + " must exceed x_min");
    if (!(g.tail_tol > 0.0)) throw ConfigError(s.key_name("tail_tol") + " must be > 0");
    if (g.s_max && *g.s_max < g.t_max) throw ConfigError(s.key_name("s_max") + " must be >= t_max");
}

inline void parse_sim(const Section& s, ExperimentConfig& c) {
    auto& m = c.sim;
    m.present = s.present();
    if (!m.present) return;
    m.p = s.number("p");
    if (s.has("epsilon")) m.epsilon = s.number("epsilon");
    if (s.has("eps_list")) m.eps_list = s.list("eps_list");
    auto& d = m.data;
    const std::string kind = s.word("data");
    if (kind == "bump") {
        d.kind = DataKind::Bump;
    } else if (kind == "plateau") {
        d.kind = DataKind::Plateau;
    } else if (kind == "odd_bump") {
        d.kind = DataKind::Custom;
    } else {
        throw ConfigError(s.key_name("data") + " must be one of {bump, plateau, odd_bump}, got '" + kind + "'");
    }
    d.u0_amplitude = s.number("u0_amplitude", 0.0);
    d.u1_amplitude = s.number("u1_amplitude", 0.0);
    d.L = s.number("L");
    d.ramp = s.number("ramp", 1.0);
    if (d.kind == DataKind::Custom) {
        // odd data x/L phi(x/L): J_R vanishes for every R when a and g are even in x
        const double a0 = d.u0_amplitude, a1 = d.u1_amplitude, L = d.L;
        d.custom_u0 = [a0, L](double x) { return a0 * (x / L) * phi(x / L); };
        d.custom_u1 = [a1, L](double x) { return a1 * (x / L) * phi(x / L); };
    }
    d.epsilon = m.epsilon.value_or(1.0);
    m.dx = s.number("dx");
    m.opts.blowup_threshold = s.number("blowup_threshold", 1e8);
    m.opts.t_cap = s.number("t_cap");
    m.confirm_refinement = s.flag("confirm_refinement", true);
    if (s.has("replay")) {
        std::filesystem::path r = s.raw("replay");
        if (r.is_relative()) r = c.source.parent_path() / r;
        m.replay = r;
    }
    m.store_t_max = s.number("store_t_max", 0.0);
    m.store_x_max = s.number("store_x_max", 0.0);
    if (!(m.p > 1.0)) throw ConfigError(s.key_name("p") + " must be > 1");
    if (!(m.dx > 0.0)) throw ConfigError(s.key_name("dx") + " must be > 0");
    if (!(m.opts.t_cap > 0.0)) throw ConfigError(s.key_name("t_cap") + " must be > 0");
    if (!(m.opts.blowup_threshold > 0.0)) throw ConfigError(s.key_name("blowup_threshold") + " must be > 0");
    if (m.epsilon && !(*m.epsilon >= 0.0)) throw ConfigError(s.key_name("epsilon") + " must be >= 0");
    for (double e : m.eps_list)
        if (!(e > 0.0)) throw ConfigError(s.key_name("eps_list") + " entries must be > 0");
    if (m.store_t_max < 0.0 || m.store_x_max < 0.0) throw ConfigError("[sim] store_t_max/store_x_max must be >= 0");
    d.validate();
}

inline void parse_functionals(const Section& s, ExperimentConfig& c) {
    auto& f = c.functionals;
    f.present = s.present();
    if (!f.present) return;
    f.tau_list = s.list("tau_list");
    for (double t : f.tau_list)
        if (!(t > 0.0)) throw ConfigError(s.key_name("tau_list") + " entries must be > 0");
    f.policy = choose<RPolicy>(s, "R_policy", s.word("R_policy", "equal_tau"),
                               {{"equal_tau", RPolicy::EqualTau}, {"fixed", RPolicy::Fixed},
                                {"alpha_power", RPolicy::AlphaPower}});
    if (f.policy == RPolicy::Fixed) {
        f.R_fixed = s.number("R");
        if (!(f.R_fixed > 0.0)) throw ConfigError(s.key_name("R") + " must be > 0");
    } else if (s.has("R")) {
        s.raw("R");  // accepted, unused
    }
    const EnvelopeVariant expected = envelope_for(c.damping.family);
    const std::string v = s.word("variant", "auto");
    f.variant = v == "auto" ? expected
                            : choose<EnvelopeVariant>(s, "variant", v,
                                                      {{"thm1", EnvelopeVariant::Thm1},
                                                       {"thm2", EnvelopeVariant::Thm2},
                                                       {"thm3", EnvelopeVariant::Thm3}});
    if (f.variant != expected)
        throw ConfigError(s.key_name("variant") + " = " + to_string(f.variant) + " does not match family " +
                          to_string(c.damping.family) + " (expects " + to_string(expected) + ")");
    f.scan_doublings = s.count("scan_doublings", 4);
}

inline void parse_output(const Section& s, ExperimentConfig& c) {
    if (!s.present()) return;
    if (s.has("dir")) {
        std::filesystem::path d = s.raw("dir");
        if (d.is_relative()) d = c.source.parent_path() / d;
        c.output.dir = d.string();
    }
    if (s.has("formats")) {
        c.output.csv = c.output.json = false;
        for (const auto& w : s.words("formats")) {
            if (w == "csv") c.output.csv = true;
            else if (w == "json") c.output.json = true;
            else throw ConfigError(s.key_name("formats") + " entries must be csv or json, got '" + w + "'");
        }
    }
}

inline std::string canonical_form(const boost::property_tree::ptree& tree) {
    std::vector<std::string> lines;
    for (const auto& sec : tree)
        for (const auto& kv : sec.second) lines.push_back(sec.first + "." + kv.first + "=" + trim(kv.second.data()));
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
}

}  // namespace detail

/// Parses and validates an experiment file. Any problem is a ConfigError naming the key.
inline ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& source = {}) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config: " + std::string(e.message()) + " at line " + std::to_string(e.line()));
    }
    static const std::set<std::string> known{"damping", "gauge", "sim", "functionals", "output"};
    for (const auto& sec : tree) {
        if (sec.second.empty() && !sec.second.data().empty())
            throw ConfigError("config: key '" + sec.first + "' outside a section");
        if (!known.count(sec.first)) throw ConfigError("config: unknown section [" + sec.first + "]");
    }
    auto section = [&](const std::string& name) {
        const auto it = tree.find(name);
        return detail::Section(name, it == tree.not_found() ? nullptr : &it->second);
    };
    ExperimentConfig c;
    c.source = source;
    const auto damping = section("damping"), gauge = section("gauge"), sim = section("sim"),
               functionals = section("functionals"), output = section("output");
    detail::parse_damping(damping, c);
    detail::parse_gauge(gauge, c);
    detail::parse_sim(sim, c);
    detail::parse_functionals(functionals, c);
    detail::parse_output(output, c);
    for (const auto* s : {&damping, &gauge, &sim, &functionals, &output}) s->reject_unknown();
    c.canonical = detail::canonical_form(tree);
    c.hash = fnv1a64(c.canonical);
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

/// Requirements of each subcommand beyond the per-block checks.
inline void require_gauge(const ExperimentConfig& c) {
    if (!c.gauge.present) throw ConfigError("missing section [gauge]");
}

inline void require_simulation(const ExperimentConfig& c) {
    if (!c.sim.present) throw ConfigError("missing section [sim]");
    if (!c.sim.epsilon) throw ConfigError("missing key [sim] epsilon");
}

inline void require_sweep(const ExperimentConfig& c) {
    if (!c.sim.present) throw ConfigError("missing section [sim]");
    if (c.sim.replay) return;
    if (c.sim.eps_list.empty()) throw ConfigError("missing key [sim] eps_list");
    if (c.sim.eps_list.size() < 4)
        throw ConfigError("[sim] eps_list has " + std::to_string(c.sim.eps_list.size()) +
                          " values; the lifespan fit needs at least 4");
}

/// Functionals sample the stored solution against the gauge table node by node, so both
/// must live on one lattice and cover [0, max tau] x [-max R, max R].
inline void require_functionals(const ExperimentConfig& c) {
    if (!c.functionals.present) throw ConfigError("missing section [functionals]");
    require_simulation(c);
    require_gauge(c);
    const auto& g = c.gauge;
    const double dx = c.sim.dx;
    if (std::abs(g.step - dx) > 1e-12 * dx)
        throw ConfigError("[gauge] step must equal [sim] dx for functional evaluation");
    const double offs = g.x_min / dx;
    if (std::abs(offs - std::round(offs)) > 1e-8)
        throw ConfigError("[gauge] x_min must be a multiple of [sim] dx");
    double tau_max = 0.0, R_max = 0.0;
    for (double tau : c.functionals.tau_list) {
        tau_max = std::max(tau_max, tau);
        R_max = std::max(R_max, c.functionals.R_of(tau, c.sim.p));
    }
    if (g.t_max < tau_max - 1e-9) throw ConfigError("[gauge] t_max must cover the largest tau");
    if (g.x_min > -R_max + 1e-9 || g.x_max < R_max - 1e-9)
        throw ConfigError("[gauge] x range must cover [-R, R] for the largest R = " + std::to_string(R_max));
    if (c.sim.opts.t_cap < tau_max) throw ConfigError("[sim] t_cap must cover the largest tau");
    if (c.sim.store_t_max > 0.0 && c.sim.store_t_max < tau_max - 1e-9)
        throw ConfigError("[sim] store_t_max must cover the largest tau");
    if (c.sim.store_x_max > 0.0 && c.sim.store_x_max < R_max - 1e-9)
        throw ConfigError("[sim] store_x_max must cover the largest R");
}

/// Stored solution window: explicit keys, else what the functionals need.
inline std::pair<double, double> solution_window(const ExperimentConfig& c) {
    double t = c.sim.store_t_max, x = c.sim.store_x_max;
    if (c.functionals.present) {
        for (double tau : c.functionals.tau_list) {
            if (c.sim.store_t_max == 0.0) t = std::max(t, tau);
            if (c.sim.store_x_max == 0.0) x = std::max(x, c.functionals.R_of(tau, c.sim.p));
        }
    }
    return {t, x};
}

}  // namespace nlwave
