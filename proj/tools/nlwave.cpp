// nlwave: gauge construction, simulation, functional evaluation and lifespan sweeps.
//
// Exit codes: 0 success, 2 gauge failure or unstable run, 3 invalid configuration,
// 4 missing upstream artifact, 5 inconsistent lifespan fit, 1 anything else.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "nlwave/nlwave.hpp"

namespace fs = std::filesystem;
using namespace nlwave;

namespace {

enum Exit { kOk = 0, kOther = 1, kFailure = 2, kConfig = 3, kMissing = 4, kInconsistent = 5 };

struct Context {
    ExperimentConfig cfg;
    fs::path out;
    unsigned threads = 1;
    std::string started;
    std::string hash;
    std::vector<std::string> files;

    void csv(const std::string& name, const CsvTable& t) {
        if (!cfg.output.csv) return;
        write_csv(out / name, t);
        files.push_back(name);
    }
    void json(const std::string& name, const Json& j) {
        if (!cfg.output.json) return;
        write_json(out / name, j);
        files.push_back(name);
    }
    void manifest(const std::string& stage, Json entry) { update_manifest(out, hash, stage, std::move(entry), files, started); }
};

// ---- data condition ----

// J_R on a doubling sequence from the data support. J counts as positive only above
// roundoff relative to the size of the integrand.
Json data_condition(const ExperimentConfig& cfg, const GaugeLookup& gauge, double R_limit, double dx,
                    std::size_t doublings) {
    const InitialData& d = cfg.sim.data;
    const DampingSpec& spec = cfg.damping;
    auto u0 = [&](double x) { return d.u0(x); };
    auto u1 = [&](double x) { return d.u1(x); };
    bool truncated = false;
    auto J_of_R = [&](double R) {
        if (R > R_limit + 1e-9) {
            truncated = true;
            return std::nan("");
        }
        const double J = data_functional(u0, u1, gauge, spec, R, dx);
        double scale = 0.0;
        const auto n = static_cast<long long>(std::floor(R / dx));
        for (long long j = -n; j <= n; ++j) {
            const double x = static_cast<double>(j) * dx;
            if (std::abs(x) >= R) continue;
            const auto G = gauge.at(0.0, x);
            const double a = eval_damping(spec, 0.0, x).a;
            scale += (std::abs(G.g_t) + std::abs(G.g * a)) * std::abs(u0(x)) + std::abs(G.g * u1(x));
        }
        scale *= dx;
        return std::abs(J) <= 1e-12 * scale ? 0.0 : J;
    };
    const auto scan = data_condition_scan(J_of_R, d.support_radius(), doublings);
    Json j;
    std::vector<Json> Jv;
    for (double v : scan.J) Jv.push_back(json_number(v));
    j["R"] = scan.R;
    j["J"] = Jv;
    j["R0"] = json_number(scan.R0);
    std::size_t evaluated = 0;
    bool any_positive = false;
    for (double v : scan.J)
        if (std::isfinite(v)) {
            ++evaluated;
            any_positive = any_positive || v > 0.0;
        }
    std::string status = scan.R0 ? "met" : "not met";
    if (!scan.R0 && (truncated || evaluated < 3) && any_positive) status = "unknown";
    j["status"] = status;
    return j;
}

std::optional<GaugeLookup> closed_form_gauge(const DampingSpec& spec) {
    if (spec.delta == 0.0 || spec.profile.kind == ProfileKind::Zero) return GaugeLookup::unperturbed(spec);
    if (is_x_independent(spec)) return GaugeLookup::x_independent(spec);
    return std::nullopt;
}

// ---- construct-gauge ----

int cmd_construct_gauge(Context& ctx) {
    const auto& cfg = ctx.cfg;
    require_gauge(cfg);
    const auto& gc = cfg.gauge;
    const auto& spec = cfg.damping;
    const double s_max = gc.s_max ? *gc.s_max
                                  : auto_s_max(spec, gc.t_max, gc.x_max - gc.x_min, gc.step, gc.construct.theta,
                                               gc.tail_tol, gc.max_nodes);
    const auto grid = build_grid(gc.t_max, gc.x_min, gc.x_max, gc.step, s_max);
    const Variant variant = variant_for(spec.family);
    Json entry;
    try {
        const auto res = construct_h(spec, grid, gc.construct);
        Json rep = convergence_json(res.report, variant, grid);
        rep["status"] = "converged";
        const auto resid = residual(res.triple, spec, variant);
        rep["residual_sup"] = json_number(resid.sup);
        rep["residual_t"] = resid.t_at;
        rep["residual_x"] = resid.x_at;
        std::optional<double> theta_v;
        if (spec.family == Family::ScaleInvMu) theta_v = res.report.theta_prime;
        const auto decay = verify_decay(res.triple, gc.construct.theta, spec.k, theta_v);
        rep["decay_h_weighted_sup"] = json_number(decay.h_weighted_sup);
        rep["decay_derivative_C"] = json_number(decay.derivative_C);
        rep["decay_v_weighted_sup"] = json_number(decay.v_weighted_sup);
        rep["decay_pass"] = decay.pass && decay.v_pass;
        ctx.csv("gauge.csv", gauge_csv(res.triple, res.gauge));
        ctx.json("convergence.json", rep);
        entry["status"] = "converged";
        entry["exit_code"] = kOk;
        entry["iterations"] = res.report.iterations;
        entry["contraction_r"] = json_number(res.report.contraction_r);
        ctx.manifest("construct-gauge", entry);
        std::cout << "gauge converged in " << res.report.iterations << " iterations, r = " << res.report.contraction_r
                  << "\n";
        return kOk;
    } catch (const GaugeFailure& e) {
        const bool nc = dynamic_cast<const NoContraction*>(&e) != nullptr;
        Json rep = convergence_json(e.report, variant, grid);
        rep["status"] = nc ? "NoContraction" : "NotInK";
        rep["message"] = e.what();
        ctx.json("convergence.json", rep);
        entry["status"] = rep["status"];
        entry["exit_code"] = kFailure;
        ctx.manifest("construct-gauge", entry);
        std::cerr << (nc ? "NoContraction: " : "NotInK: ") << e.what() << "\n";
        return kFailure;
    }
}

// ---- simulate ----

int cmd_simulate(Context& ctx) {
    const auto& cfg = ctx.cfg;
    require_simulation(cfg);
    const auto& sc = cfg.sim;
    InitialData data = sc.data;
    data.epsilon = *sc.epsilon;
    SimOptions opts = sc.opts;
    const auto [store_t, store_x] = solution_window(cfg);
    if (store_t > 0.0) {
        opts.store_stride = 1;
        opts.store_t_max = store_t;
    }
    SimSolution sol;
    std::optional<double> T_fine;
    double rel_diff = std::nan("");
    std::string unstable_reason;
    if (sc.confirm_refinement) {
        auto rc = check_resolution(cfg.damping, data, sc.p, sc.dx, opts);
        sol = std::move(rc.coarse);
        T_fine = rc.T_fine;
        rel_diff = rc.rel_diff;
        if (sol.status == SimStatus::Unstable) {
            unstable_reason = "grid-scale oscillation";
        } else if (!rc.resolved) {
            sol.status = SimStatus::Unstable;
            unstable_reason = "dx and dx/2 disagree by more than 5%";
        }
    } else {
        sol = run_until_blowup(cfg.damping, data, sc.p, sc.dx, opts);
        if (sol.status == SimStatus::Unstable) unstable_reason = "grid-scale oscillation";
    }
    ctx.csv("norm_history.csv", norm_history_csv(sol));
    if (store_t > 0.0) ctx.csv("solution.csv", solution_csv(sol.stored, store_x));
    Json rep;
    rep["status"] = to_string(sol.status);
    rep["T_detected"] = json_number(sol.T_detected);
    rep["T_detected_2x"] = json_number(sol.T_detected_2x);
    rep["threshold_stable"] = detail::threshold_stable(sol);
    rep["refinement_checked"] = sc.confirm_refinement;
    rep["T_refined"] = json_number(T_fine);
    rep["rel_diff"] = json_number(rel_diff);
    rep["unstable_reason"] = unstable_reason.empty() ? Json(nullptr) : Json(unstable_reason);
    rep["unstable_at"] = json_number(sol.unstable_at);
    rep["t_end"] = sol.t_end;
    rep["steps"] = sol.steps;
    rep["dx"] = sol.dx;
    rep["epsilon"] = data.epsilon;
    rep["p"] = sc.p;
    ctx.json("simulation.json", rep);
    const int code = sol.status == SimStatus::Unstable ? kFailure : kOk;
    Json entry;
    entry["status"] = to_string(sol.status);
    entry["T_detected"] = json_number(sol.T_detected);
    entry["exit_code"] = code;
    ctx.manifest("simulate", entry);
    std::cout << "status " << to_string(sol.status);
    if (sol.T_detected) std::cout << ", T_detected = " << format_number(*sol.T_detected);
    if (!unstable_reason.empty()) std::cout << " (" << unstable_reason << "; rerun at dx/2)";
    std::cout << "\n";
    return code;
}

// ---- functionals ----

int cmd_functionals(Context& ctx) {
    const auto& cfg = ctx.cfg;
    require_functionals(cfg);
    const auto gauge_path = ctx.out / "gauge.csv", sol_path = ctx.out / "solution.csv";
    if (!fs::exists(gauge_path)) throw MissingArtifact("missing gauge table " + gauge_path.string() + " (run construct-gauge)");
    if (!fs::exists(sol_path)) throw MissingArtifact("missing solution table " + sol_path.string() + " (run simulate)");
    auto table = std::make_shared<const GaugeTable>(read_gauge_table(gauge_path));
    const SpaceTimeField sol = read_solution(sol_path);
    if (std::abs(table->step - sol.dx) > 1e-9 * sol.dx || std::abs(sol.dt - sol.dx) > 1e-9 * sol.dx)
        throw MissingArtifact("gauge table and solution table are on different lattices");
    const GaugeLookup gauge(table);
    const auto& fc = cfg.functionals;
    const double p = cfg.sim.p;
    const EnvelopeSpec es{fc.variant, cfg.damping.k, cfg.damping.mu};

    std::vector<FunctionalRow> rows;
    std::vector<double> skipped;
    for (double tau : fc.tau_list) {
        if (tau > sol.t_last() + 1e-9 * sol.dt) {
            skipped.push_back(tau);  // beyond the stored (pre-blow-up) window
            continue;
        }
        const auto bp = make_bump_params(p, tau, fc.R_of(tau, p));
        FunctionalRow r;
        try {
            r.report = compute_functionals(sol, gauge, cfg.damping, bp, es);
        } catch (const DomainError& e) {
            throw MissingArtifact(std::string("upstream tables do not cover the functional: ") + e.what());
        }
        r.check = check_blowup_inequality(r.report, bp);
        rows.push_back(r);
    }
    ctx.csv("functionals.csv", functionals_csv(rows));

    Json s;
    s["rows"] = rows.size();
    s["skipped_tau"] = skipped;
    s["R_policy"] = to_string(fc.policy);
    s["variant"] = to_string(fc.variant);
    bool active = false, all_pass = true;
    double cmin = std::numeric_limits<double>::infinity(), cmax = 0.0;
    for (const auto& r : rows) {
        active = active || r.check.data_condition_active;
        all_pass = all_pass && r.check.pass;
        if (!r.check.data_condition_active) {
            cmin = std::min(cmin, r.check.C_fit);
            cmax = std::max(cmax, r.check.C_fit);
        }
    }
    s["data_condition_active"] = active;
    s["inequality_pass"] = all_pass;
    s["C_fit_min"] = json_number(cmax > 0.0 ? cmin : std::nan(""));
    s["C_fit_max"] = json_number(cmax > 0.0 ? cmax : std::nan(""));
    s["C_fit_spread"] = json_number(cmax > 0.0 && cmin > 0.0 ? cmax / cmin : std::nan(""));

    // decay of I along the diagonal R = tau
    std::vector<double> taus, Is;
    bool decreasing = true;
    for (const auto& r : rows)
        if (std::abs(r.report.R - r.report.tau) <= 1e-12 * r.report.tau && r.report.I > 0.0) {
            if (!Is.empty() && !(r.report.I < Is.back())) decreasing = false;
            taus.push_back(r.report.tau);
            Is.push_back(r.report.I);
        }
    const double q = p / (p - 1.0);
    const double reference = -std::min(q - 1.0, (q - 1.0) / q);
    if (taus.size() >= 2) {
        const double slope = log_log_slope(taus, Is);
        s["I_tau_tau_exponent"] = slope;
        s["I_tau_tau_decreasing"] = decreasing;
        s["I_tau_tau_below_reference"] = slope <= reference;
    } else {
        s["I_tau_tau_exponent"] = nullptr;
        s["I_tau_tau_decreasing"] = nullptr;
        s["I_tau_tau_below_reference"] = nullptr;
    }
    s["I_tau_tau_reference_exponent"] = reference;
    if (auto exact = closed_form_gauge(cfg.damping))
        s["data_condition"] = data_condition(cfg, *exact, std::numeric_limits<double>::infinity(), table->step,
                                             fc.scan_doublings);
    else
        s["data_condition"] = data_condition(cfg, gauge, std::min(-table->x_min, table->x_max()), table->step,
                                             fc.scan_doublings);
    ctx.json("functionals_summary.json", s);
    Json entry;
    entry["status"] = "ok";
    entry["rows"] = rows.size();
    entry["exit_code"] = kOk;
    ctx.manifest("functionals", entry);
    std::cout << rows.size() << " functional rows";
    if (!skipped.empty()) std::cout << ", " << skipped.size() << " tau beyond the solution window";
    std::cout << "\n";
    return kOk;
}

// ---- sweep ----

int cmd_sweep(Context& ctx) {
    const auto& cfg = ctx.cfg;
    require_sweep(cfg);
    const auto& sc = cfg.sim;
    std::vector<LifespanRecord> recs;
    if (sc.replay) {
        recs = read_replay(*sc.replay);
    } else {
        try {
            recs = lifespan_sweep(cfg.damping, sc.data, sc.p, sc.eps_list, sc.dx, sc.opts, ctx.threads);
        } catch (const UnstableRun& e) {
            Json entry;
            entry["status"] = "Unstable";
            entry["epsilon"] = e.epsilon;
            entry["dx"] = e.dx;
            entry["exit_code"] = kFailure;
            ctx.manifest("sweep", entry);
            std::cerr << e.what() << "\n";
            return kFailure;
        }
    }
    ctx.csv("sweep.csv", sweep_csv(recs));

    std::string condition = "unknown";
    if (sc.replay) {
        condition = "not evaluated (replayed records)";
    } else if (auto g = closed_form_gauge(cfg.damping)) {
        condition = data_condition(cfg, *g, std::numeric_limits<double>::infinity(), sc.dx, 4)["status"];
    } else if (fs::exists(ctx.out / "gauge.csv")) {
        auto table = std::make_shared<const GaugeTable>(read_gauge_table(ctx.out / "gauge.csv"));
        condition = data_condition(cfg, GaugeLookup(table), std::min(-table->x_min, table->x_max()), table->step,
                                   4)["status"];
    }

    Json f;
    KappaFit fit;
    try {
        fit = fit_kappa(recs, sc.p);
    } catch (const ConfigError& e) {
        f["slope"] = nullptr;
        f["kappa_theory"] = kappa_theory(sc.p);
        f["consistent"] = nullptr;
        f["fit_error"] = e.what();
        f["data_condition"] = condition;
        f["blowup_claimed"] = false;
        ctx.json("fit.json", f);
        Json entry;
        entry["status"] = "fit_unavailable";
        entry["exit_code"] = kConfig;
        ctx.manifest("sweep", entry);
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    }
    f["slope"] = fit.slope;
    f["kappa_theory"] = fit.kappa_theory;
    f["consistent"] = fit.consistent;
    f["bound_slope"] = fit.bound_slope;
    f["slope_limit"] = fit.bound_slope * 1.15;
    f["intercept"] = fit.intercept;
    f["n_used"] = fit.n_used;
    double emin = std::numeric_limits<double>::infinity(), emax = 0.0;
    for (const auto& r : recs)
        if (r.epsilon > 0.0) {
            emin = std::min(emin, r.epsilon);
            emax = std::max(emax, r.epsilon);
        }
    f["eps_span_decades"] = std::log10(emax / emin);
    f["one_sided"] =
        "T_eps <= C eps^(-1/kappa) is an upper bound: the fit only requires slope >= slope_limit and does not "
        "claim the bound is attained";
    f["data_condition"] = condition;
    f["blowup_claimed"] = fit.consistent && condition == "met";
    ctx.json("fit.json", f);
    const int code = fit.consistent ? kOk : kInconsistent;
    Json entry;
    entry["status"] = fit.consistent ? "consistent" : "inconsistent";
    entry["slope"] = fit.slope;
    entry["exit_code"] = code;
    ctx.manifest("sweep", entry);
    std::cout << "slope " << format_number(fit.slope) << " vs limit " << format_number(fit.bound_slope * 1.15) << ": "
              << (fit.consistent ? "consistent" : "inconsistent") << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gauge construction, blow-up simulation and lifespan sweeps for u_tt - u_xx + a u_t = |u|^p"};
    app.require_subcommand(1);
    std::string config, out;
    unsigned threads = 1;
    struct Cmd {
        const char* name;
        const char* help;
        int (*fn)(Context&);
    };
    const Cmd cmds[] = {
        {"construct-gauge", "build the gauge lattice and its convergence report", cmd_construct_gauge},
        {"simulate", "run one simulation and write its norm history", cmd_simulate},
        {"functionals", "evaluate the test-function functionals on a stored solution", cmd_functionals},
        {"sweep", "lifespan sweep over eps_list and the kappa fit", cmd_sweep},
    };
    std::vector<CLI::App*> subs;
    for (const auto& c : cmds) {
        auto* s = app.add_subcommand(c.name, c.help);
        s->add_option("--config", config, "experiment file (INI)")->required();
        s->add_option("--out", out, "output directory (overrides [output] dir)");
        s->add_option("--threads", threads, "sweep worker threads")->check(CLI::PositiveNumber);
        subs.push_back(s);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    Context ctx;
    ctx.threads = threads;
    ctx.started = utc_timestamp();
    try {
        ctx.cfg = load_config(config);
        ctx.hash = hex64(ctx.cfg.hash);
        ctx.out = !out.empty() ? fs::path(out) : fs::path(ctx.cfg.output.dir);
        if (ctx.out.empty()) throw ConfigError("no output directory: pass --out or set [output] dir");
        fs::create_directories(ctx.out);
        for (std::size_t i = 0; i < subs.size(); ++i)
            if (subs[i]->parsed()) return cmds[i].fn(ctx);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const MissingArtifact& e) {
        std::cerr << "missing input: " << e.what() << "\n";
        if (!ctx.out.empty() && fs::exists(ctx.out)) {
            try {
                Json entry;
                entry["status"] = "missing_input";
                entry["message"] = e.what();
                entry["exit_code"] = kMissing;
                for (std::size_t i = 0; i < subs.size(); ++i)
                    if (subs[i]->parsed()) ctx.manifest(cmds[i].name, entry);
            } catch (const std::exception&) {
            }
        }
        return kMissing;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kOther;
    }
    return kOther;
}
