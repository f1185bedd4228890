#pragma once

// Leapfrog solver for u_tt - u_xx + a(t,x) u_t = |u|^p at dt = dx.
//
//   u^{m+1} = [2u^m - (1 - a dt/2) u^{m-1} + (u^m_{j+1} - 2u^m_j + u^m_{j-1}) + dt^2 |u^m|^p] / (1 + a dt/2)
//
// At CFL 1 the support grows by exactly one node per step, so only the light-cone
// band of the data is updated and the rest of the row stays exactly zero.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "nlwave/damping.hpp"
#include "nlwave/errors.hpp"
#include "nlwave/field.hpp"
#include "nlwave/testfn.hpp"

namespace nlwave {

enum class DataKind { Bump, Plateau, Custom };

inline std::string to_string(DataKind k) {
    switch (k) {
        case DataKind::Bump: return "bump";
        case DataKind::Plateau: return "plateau";
        case DataKind::Custom: return "custom";
    }
    return "?";
}

/// Data eps (u0, u1).
///
/// Bump:    u0 = A0 phi(x/L), u1 = A1 phi(x/L), support [-L, L].
/// Plateau: A0, A1 on [-L, L], falling to 0 across [L, L + ramp] with the bump profile.
/// Custom:  callables supported in [-L, L].
struct InitialData {
    DataKind kind = DataKind::Bump;
    double u0_amplitude = 0.0;
    double u1_amplitude = 1.0;
    double L = 1.0;
    double epsilon = 1.0;
    double ramp = 1.0;
    std::function<double(double)> custom_u0, custom_u1;

    double support_radius() const { return kind == DataKind::Plateau ? L + ramp : L; }

    double shape(double x) const {
        switch (kind) {
            case DataKind::Bump: return phi(x / L);
            case DataKind::Plateau: {
                const double over = std::abs(x) - L;
                return over <= 0.0 ? 1.0 : phi(0.5 + 0.5 * over / ramp);
            }
            case DataKind::Custom: return 0.0;
        }
        return 0.0;
    }
    double u0(double x) const {
        if (kind == DataKind::Custom) return custom_u0 ? epsilon * custom_u0(x) : 0.0;
        return epsilon * u0_amplitude * shape(x);
    }
    double u1(double x) const {
        if (kind == DataKind::Custom) return custom_u1 ? epsilon * custom_u1(x) : 0.0;
        return epsilon * u1_amplitude * shape(x);
    }

    void validate() const {
        if (!(L > 0.0)) throw ConfigError("initial data: L must be > 0");
        if (!(epsilon >= 0.0)) throw ConfigError("initial data: epsilon must be >= 0");
        if (kind == DataKind::Plateau && !(ramp > 0.0)) throw ConfigError("initial data: ramp must be > 0");
    }
};

enum class SimStatus { Completed, BlewUp, Unstable };

inline std::string to_string(SimStatus s) {
    switch (s) {
        case SimStatus::Completed: return "Completed";
        case SimStatus::BlewUp: return "BlewUp";
        case SimStatus::Unstable: return "Unstable";
    }
    return "?";
}

struct NormRecord {
    double t = 0.0;
    double sup_u = 0.0;
    double h1l2_norm = 0.0;  ///< (|u|^2 + |u_x|^2 + |u_t|^2)^{1/2} in L^2
};

struct SimOptions {
    double blowup_threshold = 1e8;
    double t_cap = 10.0;
    /// Store every `store_stride`-th level with t <= store_t_max (0 stores nothing).
    std::size_t store_stride = 0;
    double store_t_max = std::numeric_limits<double>::infinity();
    bool detect_unstable = true;
    bool nonlinear = true;  ///< false drops |u|^p (linear damped wave)
};

struct SimSolution {
    double dx = 0.0, dt = 0.0, x_min = 0.0;
    std::size_t nx = 0;
    SpaceTimeField stored;  ///< empty unless storage was requested
    std::vector<NormRecord> norm_history;
    SimStatus status = SimStatus::Completed;
    std::optional<double> T_detected;     ///< first crossing of the threshold
    std::optional<double> T_detected_2x;  ///< first crossing of twice the threshold
    std::optional<double> unstable_at;
    std::size_t steps = 0;
    double t_end = 0.0;
};

/// One scheme update on columns [lo, hi]; prev = u^{m-1}, cur = u^m.
inline void leapfrog_step(const std::vector<double>& prev, const std::vector<double>& cur, std::vector<double>& next,
                          const DampingSpec& spec, double p, double t, double x_min, double dx, std::size_t lo,
                          std::size_t hi, bool nonlinear = true) {
    const double dt = dx, dt2 = dx * dx;
    for (std::size_t j = lo; j <= hi; ++j) {
        const double x = x_min + static_cast<double>(j) * dx;
        const double a = eval_damping(spec, t, x).a;
        const double c = 0.5 * a * dt;
        const double lap = cur[j + 1] - 2.0 * cur[j] + cur[j - 1];
        const double nl = nonlinear ? dt2 * abs_pow(cur[j], p) : 0.0;
        next[j] = (2.0 * cur[j] - (1.0 - c) * prev[j] + lap + nl) / (1.0 + c);
    }
}

namespace detail {

inline double sup_abs(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) s = std::max(s, std::abs(v[j]));
    return s;
}

inline double h1l2(const std::vector<double>& u, const std::vector<double>& ut, double dx, std::size_t lo, std::size_t hi) {
    long double acc = 0;
    for (std::size_t j = lo; j <= hi; ++j) {
        const double ux = (u[j + 1] - u[j]) / dx;
        acc += static_cast<long double>(u[j]) * u[j] + static_cast<long double>(ux) * ux +
               static_cast<long double>(ut[j]) * ut[j];
    }
    return std::sqrt(static_cast<double>(acc * dx));
}

// Grid-scale sawtooth: at least 5 consecutive nodes whose second differences alternate
// in sign, each comparable to the local amplitude. A single sharp peak produces at most 3.
// Nodes below 1e-8 of the band maximum are roundoff and never count.
inline bool sawtooth(const std::vector<double>& u, std::size_t lo, std::size_t hi) {
    const double floor = 1e-8 * sup_abs(u, lo - 1, hi + 1);
    int run = 0;
    double prev_sign = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) {
        const double d2 = u[j + 1] - 2.0 * u[j] + u[j - 1];
        const double local = std::max({std::abs(u[j - 1]), std::abs(u[j]), std::abs(u[j + 1])});
        const bool strong = local > floor && std::abs(d2) > 0.5 * local;
        const double sg = d2 > 0 ? 1.0 : -1.0;
        if (strong && run > 0 && sg == -prev_sign) ++run;
        else run = strong ? 1 : 0;
        prev_sign = sg;
        if (run >= 5) return true;
    }
    return false;
}

inline double crossing_time(double t0, double s0, double s1, double dt, double level) {
    // log-linear interpolation of the sup-norm between two levels
    if (!(s0 > 0.0) || !std::isfinite(s1) || s1 <= s0) return t0 + dt;
    const double f = (std::log(level) - std::log(s0)) / (std::log(s1) - std::log(s0));
    return t0 + dt * std::clamp(f, 0.0, 1.0);
}

}  // namespace detail

/// Integrates until sup|u| exceeds twice the threshold, the sawtooth indicator fires, or t_cap.
inline SimSolution run_until_blowup(const DampingSpec& spec, const InitialData& data, double p, double dx,
                                    const SimOptions& opts) {
    spec.validate();
    data.validate();
    if (!(p > 1.0)) throw ConfigError("simulation: p must be > 1");
    if (!(dx > 0.0)) throw ConfigError("simulation: dx must be > 0");
    if (!(opts.t_cap > 0.0)) throw ConfigError("simulation: t_cap must be > 0");
    if (!(opts.blowup_threshold > 0.0)) throw ConfigError("simulation: blowup_threshold must be > 0");

    const double dt = dx;
    const double support = data.support_radius();
    const auto half = static_cast<std::size_t>(std::ceil((support + opts.t_cap) / dx - 1e-9)) + 2;
    const std::size_t nx = 2 * half + 1;
    const double x_min = -static_cast<double>(half) * dx;
    const auto n_steps = static_cast<std::size_t>(std::floor(opts.t_cap / dt + 1e-9));

    SimSolution sol;
    sol.dx = dx;
    sol.dt = dt;
    sol.x_min = x_min;
    sol.nx = nx;
    const bool storing = opts.store_stride > 0;
    if (storing) sol.stored = SpaceTimeField(0.0, dt * static_cast<double>(opts.store_stride), x_min, dx, 0, nx);

    std::vector<double> prev(nx, 0.0), cur(nx, 0.0), next(nx, 0.0), ut(nx, 0.0), u1(nx, 0.0);
    // data support in columns
    std::size_t lo = nx, hi = 0;
    for (std::size_t j = 0; j < nx; ++j) {
        const double x = x_min + static_cast<double>(j) * dx;
        cur[j] = data.u0(x);
        u1[j] = data.u1(x);
        if (cur[j] != 0.0 || u1[j] != 0.0) {
            lo = std::min(lo, j);
            hi = std::max(hi, j);
        }
    }
    if (lo > hi) {  // zero data: the solution stays zero
        lo = half;
        hi = half;
    }
    // band of possibly nonzero columns, kept one node inside the row ends
    auto band = [&](std::size_t m, std::size_t& a, std::size_t& b) {
        a = lo > m + 1 ? lo - m : 1;
        b = std::min(hi + m, nx - 2);
    };

    const double thr = opts.blowup_threshold, thr2 = 2.0 * thr;
    auto store = [&](std::size_t m, const std::vector<double>& u, const std::vector<double>& v) {
        if (storing && m % opts.store_stride == 0 && static_cast<double>(m) * dt <= opts.store_t_max + 1e-12)
            sol.stored.push_level(u, v);
    };

    // u^1 by Taylor expansion with the centered average of u0
    std::size_t a0, b0;
    band(1, a0, b0);
    next.assign(nx, 0.0);
    for (std::size_t j = a0; j <= b0; ++j) {
        const double x = x_min + static_cast<double>(j) * dx;
        const double a = eval_damping(spec, 0.0, x).a;
        const double nl = opts.nonlinear ? abs_pow(cur[j], p) : 0.0;
        next[j] = 0.5 * (cur[j + 1] + cur[j - 1]) + dt * u1[j] + 0.5 * dt * dt * (nl - a * u1[j]);
    }
    // level 0 bookkeeping
    {
        std::size_t a, b;
        band(0, a, b);
        const double s = detail::sup_abs(cur, a, b);
        sol.norm_history.push_back({0.0, s, detail::h1l2(cur, u1, dx, a - 1, b)});
        store(0, cur, u1);
    }
    prev.swap(cur);   // prev = u^0
    cur.swap(next);   // cur = u^1
    double last_sup = sol.norm_history.back().sup_u;
    std::size_t m = 1;
    auto finish_level = [&](std::size_t level, const std::vector<double>& u, const std::vector<double>& u_t) {
        std::size_t a, b;
        band(level, a, b);
        const double t = static_cast<double>(level) * dt;
        const double s = detail::sup_abs(u, a, b);
        sol.norm_history.push_back({t, s, detail::h1l2(u, u_t, dx, a - 1, b)});
        store(level, u, u_t);
        if (!sol.T_detected && s > thr) sol.T_detected = detail::crossing_time(t - dt, last_sup, s, dt, thr);
        if (!sol.T_detected_2x && s > thr2) sol.T_detected_2x = detail::crossing_time(t - dt, last_sup, s, dt, thr2);
        last_sup = s;
        return s;
    };

    for (;; ++m) {
        const double t = static_cast<double>(m) * dt;
        std::size_t a, b;
        band(m + 1, a, b);
        if (opts.detect_unstable && !sol.T_detected) {
            std::size_t ca, cb;
            band(m, ca, cb);
            if (detail::sawtooth(cur, ca, cb)) {
                sol.status = SimStatus::Unstable;
                sol.unstable_at = t;
                break;
            }
        }
        if (m >= n_steps || (sol.T_detected_2x && sol.T_detected)) {
            // last level: backward difference for u_t
            for (std::size_t j = 0; j < nx; ++j) ut[j] = (cur[j] - prev[j]) / dt;
            finish_level(m, cur, ut);
            break;
        }
        std::fill(next.begin() + static_cast<std::ptrdiff_t>(a), next.begin() + static_cast<std::ptrdiff_t>(b) + 1, 0.0);
        leapfrog_step(prev, cur, next, spec, p, t, x_min, dx, a, b, opts.nonlinear);
        for (std::size_t j = a - 1; j <= b + 1; ++j) ut[j] = (next[j] - prev[j]) / (2.0 * dt);
        const double s = finish_level(m, cur, ut);
        if (!std::isfinite(s)) break;
        prev.swap(cur);
        cur.swap(next);
    }
    sol.steps = m;
    sol.t_end = static_cast<double>(m) * dt;
    if (sol.status != SimStatus::Unstable && sol.T_detected) sol.status = SimStatus::BlewUp;
    return sol;
}

/// Discrete energy 1/2 sum (u_t^2 + u_x^2) dx of a stored level (centered u_x).
inline double energy(const SpaceTimeField& f, std::size_t level) {
    long double e = 0;
    for (std::size_t j = 1; j + 1 < f.nx; ++j) {
        const double ux = (f.at(level, j + 1) - f.at(level, j - 1)) / (2.0 * f.dx);
        const double v = f.dt_at(level, j);
        e += 0.5L * (static_cast<long double>(v) * v + static_cast<long double>(ux) * ux);
    }
    return static_cast<double>(e * f.dx);
}

/// Energy between levels m and m+1 that the linear leapfrog conserves exactly.
inline double staggered_energy(const SpaceTimeField& f, std::size_t level) {
    if (level + 1 >= f.nt) throw ConfigError("staggered energy: need the next level");
    long double e = 0;
    const double dt = f.dt;
    for (std::size_t j = 0; j + 1 < f.nx; ++j) {
        const double v = (f.at(level + 1, j) - f.at(level, j)) / dt;
        const double w0 = (f.at(level, j + 1) - f.at(level, j)) / f.dx;
        const double w1 = (f.at(level + 1, j + 1) - f.at(level + 1, j)) / f.dx;
        e += 0.5L * (static_cast<long double>(v) * v + static_cast<long double>(w0) * w1);
    }
    return static_cast<double>(e * f.dx);
}

/// Blow-up time of w'' = w^p, w(0) = w0 > 0, w'(0) = 0:
///   T = int_{w0}^inf dw / sqrt(2 (w^{p+1} - w0^{p+1}) / (p+1)).
inline double ode_blowup_time(double p, double w0) {
    if (!(p > 1.0) || !(w0 > 0.0)) throw ConfigError("ode blow-up time: need p > 1 and w0 > 0");
    // w = w0 (1 + y) scales out w0
    auto f = [&](double y) {
        const double d = std::expm1((p + 1.0) * std::log1p(y));
        return 1.0 / std::sqrt(2.0 * d / (p + 1.0));
    };
    boost::math::quadrature::tanh_sinh<double> ts;
    const double scale = std::pow(w0, -(p - 1.0) / 2.0);
    return scale * ts.integrate(f, 0.0, std::numeric_limits<double>::infinity());
}

struct LifespanRecord {
    double epsilon = 0.0;
    std::optional<double> T_eps;
    double dx = 0.0;
    std::optional<double> T_eps_refined;
    double rel_diff = std::numeric_limits<double>::infinity();
    bool confirmed = false;
    bool threshold_stable = false;  ///< doubling the threshold moved T by < 1%
};

/// Raised when a sweep member oscillates at the grid scale.
class UnstableRun : public std::runtime_error {
public:
    UnstableRun(double eps, double at_dx) : std::runtime_error("simulation unstable at epsilon = " + std::to_string(eps) +
                                                                ", dx = " + std::to_string(at_dx)),
                                            epsilon(eps), dx(at_dx) {}
    double epsilon, dx;
};

namespace detail {
inline bool threshold_stable(const SimSolution& s) {
    return s.T_detected && s.T_detected_2x && std::abs(*s.T_detected_2x - *s.T_detected) < 0.01 * *s.T_detected;
}
}  // namespace detail

inline LifespanRecord lifespan_record(const DampingSpec& spec, InitialData data, double p, double eps, double dx,
                                      const SimOptions& opts) {
    data.epsilon = eps;
    SimOptions o = opts;
    o.store_stride = 0;
    LifespanRecord r;
    r.epsilon = eps;
    r.dx = dx;
    const auto coarse = run_until_blowup(spec, data, p, dx, o);
    if (coarse.status == SimStatus::Unstable) throw UnstableRun(eps, dx);
    const auto fine = run_until_blowup(spec, data, p, dx / 2.0, o);
    if (fine.status == SimStatus::Unstable) throw UnstableRun(eps, dx / 2.0);
    r.T_eps = coarse.T_detected;
    r.T_eps_refined = fine.T_detected;
    if (r.T_eps && r.T_eps_refined) {
        r.rel_diff = std::abs(*r.T_eps - *r.T_eps_refined) / *r.T_eps;
        r.confirmed = r.rel_diff <= 0.05;
        r.threshold_stable = detail::threshold_stable(coarse) && detail::threshold_stable(fine);
    }
    return r;
}

/// Runs every epsilon at dx and dx/2 on up to `threads` workers; output order follows eps_list.
inline std::vector<LifespanRecord> lifespan_sweep(const DampingSpec& spec, const InitialData& data, double p,
                                                  const std::vector<double>& eps_list, double dx, const SimOptions& opts,
                                                  unsigned threads = 1) {
    if (eps_list.empty()) throw ConfigError("sweep: eps_list is empty");
    std::vector<LifespanRecord> out(eps_list.size());
    std::vector<std::exception_ptr> errors(eps_list.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < eps_list.size();) {
            try {
                out[i] = lifespan_record(spec, data, p, eps_list[i], dx, opts);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(eps_list.size())));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

/// Single-run mesh check: the same run at dx and dx/2.
struct ResolutionCheck {
    SimSolution coarse;
    std::optional<double> T_fine;
    double rel_diff = std::numeric_limits<double>::infinity();
    bool resolved = false;  ///< both blew up and agree to 5%, or neither blew up
};

inline ResolutionCheck check_resolution(const DampingSpec& spec, const InitialData& data, double p, double dx,
                                        const SimOptions& opts) {
    ResolutionCheck r;
    r.coarse = run_until_blowup(spec, data, p, dx, opts);
    if (r.coarse.status == SimStatus::Unstable) return r;
    SimOptions o = opts;
    o.store_stride = 0;
    const auto fine = run_until_blowup(spec, data, p, dx / 2.0, o);
    r.T_fine = fine.T_detected;
    if (fine.status == SimStatus::Unstable) return r;
    if (r.coarse.T_detected && r.T_fine) {
        r.rel_diff = std::abs(*r.coarse.T_detected - *r.T_fine) / *r.coarse.T_detected;
        r.resolved = r.rel_diff <= 0.05;
    } else {
        r.resolved = !r.coarse.T_detected && !r.T_fine;
        if (r.resolved) r.rel_diff = 0.0;
    }
    return r;
}

struct KappaFit {
    double slope = 0.0;
    double intercept = 0.0;
    double kappa_theory = 0.0;
    double bound_slope = 0.0;  ///< -1/kappa
    bool consistent = false;
    std::size_t n_used = 0;
};

inline double kappa_theory(double p) { return (1.0 / (p - 1.0)) * (1.0 + 1.0 / p); }

/// Least-squares fit of ln T against ln eps over confirmed records.
/// The lifespan estimate is an upper bound, so only slope >= -(1/kappa)(1 + 0.15) is required.
inline KappaFit fit_kappa(const std::vector<LifespanRecord>& records, double p) {
    if (!(p > 1.0)) throw ConfigError("fit: p must be > 1");
    std::vector<double> e, T;
    for (const auto& r : records)
        if (r.confirmed && r.T_eps && r.epsilon > 0) {
            e.push_back(r.epsilon);
            T.push_back(*r.T_eps);
        }
    if (e.size() < 4) throw ConfigError("fit: need at least 4 confirmed records, have " + std::to_string(e.size()));
    KappaFit f;
    f.n_used = e.size();
    f.slope = log_log_slope(e, T);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        mx += std::log(e[i]);
        my += std::log(T[i]);
    }
    const double n = static_cast<double>(e.size());
    f.intercept = my / n - f.slope * mx / n;
    f.kappa_theory = kappa_theory(p);
    f.bound_slope = -1.0 / f.kappa_theory;
    f.consistent = f.slope >= f.bound_slope * 1.15;
    return f;
}

}  // namespace nlwave
