#pragma once

// Bump test functions, the blow-up functionals and their envelopes.
//
// psi(t,x) = eta(t/tau) phi(x/R). Multiplying the equation by g psi and
// integrating by parts gives I + J = K1 + K2 + K3 + K4 whenever g solves the
// gauge equation g_tt - g_xx - (a g)_t = 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nlwave/damping.hpp"
#include "nlwave/errors.hpp"
#include "nlwave/field.hpp"

namespace nlwave {

/// Value and first two derivatives of a bump.
struct BumpSample {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

namespace detail {

// On 1/2 < |x| < 1 the bump is 1/(1 + e^A), A = 1/(1-x^2) - 1/(x^2-1/4).
struct BumpExponent {
    double A, A1, A2;
};

inline BumpExponent bump_exponent(double x) {
    const double u = 1.0 - x * x, w = x * x - 0.25;
    BumpExponent e;
    e.A = 1.0 / u - 1.0 / w;
    e.A1 = 2.0 * x / (u * u) + 2.0 * x / (w * w);
    e.A2 = 2.0 / (u * u) + 8.0 * x * x / (u * u * u) + 2.0 / (w * w) - 8.0 * x * x / (w * w * w);
    return e;
}

// log(1/(1+e^A)) and log(e^A/(1+e^A)) without overflow
inline double log_logistic_neg(double A) { return A > 0 ? -A - std::log1p(std::exp(-A)) : -std::log1p(std::exp(A)); }
inline double log_logistic_pos(double A) { return log_logistic_neg(-A); }

inline BumpSample bump(double x) {
    const double ax = std::abs(x);
    if (ax <= 0.5) return {1.0, 0.0, 0.0};
    if (ax >= 1.0) return {0.0, 0.0, 0.0};
    const auto e = bump_exponent(ax);
    const double lphi = log_logistic_neg(e.A), lrest = log_logistic_pos(e.A);
    const double phi = std::exp(lphi), rest = std::exp(lrest);
    const double pr = std::exp(lphi + lrest);  // phi (1 - phi)
    BumpSample s;
    s.value = phi;
    s.d1 = -pr * e.A1;
    s.d2 = pr * ((rest - phi) * e.A1 * e.A1 - e.A2);
    if (!std::isfinite(s.d1)) s.d1 = 0.0;
    if (!std::isfinite(s.d2)) s.d2 = 0.0;
    if (x < 0) s.d1 = -s.d1;
    return s;
}

}  // namespace detail

/// 1 on |x| <= 1/2, 0 on |x| >= 1, smooth in between.
inline double phi(double x) { return detail::bump(x).value; }
inline BumpSample phi_derivs(double x) { return detail::bump(x); }

/// The same profile on t >= 0.
inline double eta(double t) {
    if (t < 0) throw ConfigError("eta: t must be >= 0");
    return detail::bump(t).value;
}
inline BumpSample eta_derivs(double t) {
    if (t < 0) throw ConfigError("eta: t must be >= 0");
    return detail::bump(t);
}

struct BumpParams {
    double p = 2.0;
    double q = 2.0;
    double tau = 1.0;
    double R = 1.0;
};

inline BumpParams make_bump_params(double p, double tau, double R) {
    if (!(p > 1.0)) throw ConfigError("bump params: p must be > 1");
    if (!(tau > 0.0) || !(R > 0.0)) throw ConfigError("bump params: tau and R must be > 0");
    return {p, p / (p - 1.0), tau, R};
}

struct BumpConstants {
    double C_phi1 = 0.0, C_phi2 = 0.0, C_eta1 = 0.0, C_eta2 = 0.0;
};

/// Smallest constants with |f'| <= C f^{1/p}, |f''| <= C f^{1/p} over n midpoints of (1/2, 1).
/// Ratios are formed in log space so the exponentially small tails stay resolved.
inline BumpConstants bump_inequality_constant(double p, std::size_t n_samples) {
    if (!(p > 1.0)) throw ConfigError("bump constants: p must be > 1");
    if (n_samples == 0) throw ConfigError("bump constants: need samples");
    double c1 = 0.0, c2 = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double x = 0.5 + 0.5 * (static_cast<double>(i) + 0.5) / static_cast<double>(n_samples);
        const auto e = detail::bump_exponent(x);
        const double lphi = detail::log_logistic_neg(e.A), lrest = detail::log_logistic_pos(e.A);
        const double base = lphi * (1.0 - 1.0 / p) + lrest;  // log(phi(1-phi) / phi^{1/p})
        const double bracket = (std::exp(lrest) - std::exp(lphi)) * e.A1 * e.A1 - e.A2;
        const double r1 = std::exp(base + std::log(std::abs(e.A1)));
        const double r2 = bracket == 0.0 ? 0.0 : std::exp(base + std::log(std::abs(bracket)));
        if (std::isfinite(r1)) c1 = std::max(c1, r1);
        if (std::isfinite(r2)) c2 = std::max(c2, r2);
    }
    // eta is the same profile restricted to t >= 0
    return {c1, c2, c1, c2};
}

enum class EnvelopeVariant { Thm1, Thm2, Thm3 };

inline std::string to_string(EnvelopeVariant v) {
    switch (v) {
        case EnvelopeVariant::Thm1: return "thm1";
        case EnvelopeVariant::Thm2: return "thm2";
        case EnvelopeVariant::Thm3: return "thm3";
    }
    return "?";
}

inline EnvelopeVariant envelope_for(Family f) {
    switch (f) {
        case Family::Perturbation: return EnvelopeVariant::Thm1;
        case Family::ScaleInv2: return EnvelopeVariant::Thm2;
        case Family::ScaleInvMu: return EnvelopeVariant::Thm3;
    }
    return EnvelopeVariant::Thm1;
}

struct EnvelopeSpec {
    EnvelopeVariant variant = EnvelopeVariant::Thm1;
    double k = 2.0;
    double mu = 1.0;
};

/// Which branch of the logarithmic correction applies.
enum class CorrectionCase { Constant, Log, Power };

struct Correction {
    CorrectionCase which = CorrectionCase::Constant;
    double power = 0.0;  ///< exponent of tau in the Power branch
};

inline Correction correction_factor_case(const BumpParams& bp, const EnvelopeSpec& es) {
    const double q = bp.q, k = es.k;
    double sel = 0.0, power = 0.0;
    switch (es.variant) {
        case EnvelopeVariant::Thm1: return {};
        case EnvelopeVariant::Thm2:
            sel = -q * (1.0 / bp.p + k - 1.0);
            power = -(1.0 / bp.p + k - 1.0) + 1.0 / q;
            break;
        case EnvelopeVariant::Thm3:
            if (!(k > es.mu)) throw ConfigError("envelope: thm3 requires k > mu");
            sel = es.mu - k * q;
            power = -k + (es.mu + 1.0) / q;
            break;
    }
    if (std::abs(sel + 1.0) <= 1e-12) return {CorrectionCase::Log, 0.0};
    if (sel < -1.0) return {CorrectionCase::Constant, 0.0};
    return {CorrectionCase::Power, power};
}

/// F(tau) for Thm2, G(tau) for Thm3, 1 for Thm1.
inline double correction_factor(const BumpParams& bp, const EnvelopeSpec& es) {
    const auto c = correction_factor_case(bp, es);
    switch (c.which) {
        case CorrectionCase::Constant: return 1.0;
        case CorrectionCase::Log: return std::pow(std::log(bp.tau), 1.0 / bp.q);
        case CorrectionCase::Power: return std::pow(bp.tau, c.power);
    }
    return 1.0;
}

/// The additive envelope D(tau, R).
inline double envelope_D(const BumpParams& bp, const EnvelopeSpec& es) {
    const double q = bp.q, t = bp.tau, R = bp.R;
    const double F = correction_factor(bp, es);
    switch (es.variant) {
        case EnvelopeVariant::Thm1:
            return std::pow(t, -2.0 + 1.0 / q) * std::pow(R, 1.0 / q) + std::pow(t, 1.0 / q) * std::pow(R, -2.0 + 1.0 / q) +
                   std::pow(R, -1.0 + 1.0 / q);
        case EnvelopeVariant::Thm2:
            return std::pow(t, -2.0 + 2.0 / q) * std::pow(R, 1.0 / q) + std::pow(t, 2.0 / q) * std::pow(R, -2.0 + 1.0 / q) +
                   F * std::pow(R, -1.0 + 1.0 / q);
        case EnvelopeVariant::Thm3: {
            const double m = (es.mu + 1.0) / q;
            return std::pow(t, -2.0 + m) * std::pow(R, 1.0 / q) + std::pow(t, m) * std::pow(R, -2.0 + 1.0 / q) +
                   F * std::pow(R, -1.0 + 1.0 / q);
        }
    }
    return 0.0;
}

/// Powers of tau in the three terms of D(tau, tau); a log branch contributes power 0.
inline std::array<double, 3> envelope_diagonal_exponents(const BumpParams& bp, const EnvelopeSpec& es) {
    const double q = bp.q;
    const auto c = correction_factor_case(bp, es);
    const double third = -1.0 + 1.0 / q + (c.which == CorrectionCase::Power ? c.power : 0.0);
    switch (es.variant) {
        case EnvelopeVariant::Thm1: return {-2.0 + 2.0 / q, -2.0 + 2.0 / q, third};
        case EnvelopeVariant::Thm2: return {-2.0 + 3.0 / q, -2.0 + 3.0 / q, third};
        case EnvelopeVariant::Thm3: {
            const double m = (es.mu + 1.0) / q;
            return {-2.0 + m + 1.0 / q, -2.0 + m + 1.0 / q, third};
        }
    }
    return {};
}

struct FunctionalReport {
    double tau = 0.0, R = 0.0;
    double I = 0.0, J = 0.0;
    double K1 = 0.0, K2 = 0.0, K3 = 0.0, K4 = 0.0;
    double I_prime = 0.0, I_double_prime = 0.0;
    double D = 0.0;
    EnvelopeVariant variant = EnvelopeVariant::Thm1;
    double defect = 0.0;  ///< |I + J - (K1 + K2 + K3 + K4)|
};

/// Replaces |u|^p when checking the identity on manufactured solutions.
using Forcing = std::function<double(double t, double x, double u)>;

inline double abs_pow(double u, double p) {
    if (u == 0.0) return 0.0;
    const double a = std::abs(u);
    if (p == 2.0) return a * a;
    if (p == 3.0) return a * a * a;
    if (p == 4.0) { const double s = a * a; return s * s; }
    return std::exp(p * std::log(a));
}

/// Tensor-product trapezoid evaluation of I, J, K1..K4 and the refined masses.
///
/// The t-weight is halved only at t = 0: psi and its derivatives vanish at t = tau and |x| = R.
inline FunctionalReport compute_functionals(const SpaceTimeField& u, const GaugeLookup& gauge, const DampingSpec& spec,
                                            const BumpParams& bp, const EnvelopeSpec& es,
                                            const Forcing& forcing = {}) {
    const double tol_t = 1e-9 * u.dt, tol_x = 1e-9 * u.dx;
    if (u.nt < 2 || u.nx < 2) throw DomainError("functionals: empty solution field");
    if (std::abs(u.t0) > tol_t || u.t_last() < bp.tau - tol_t)
        throw DomainError("functionals: solution does not cover [0, tau]");
    if (u.x0 > -bp.R + tol_x || u.x_last() < bp.R - tol_x)
        throw DomainError("functionals: solution does not cover [-R, R]");
    FunctionalReport rep;
    rep.tau = bp.tau;
    rep.R = bp.R;
    rep.variant = es.variant;
    rep.D = envelope_D(bp, es);

    std::vector<std::size_t> cols;
    std::vector<BumpSample> ph;
    for (std::size_t j = 0; j < u.nx; ++j) {
        const double x = u.x(j);
        if (std::abs(x) < bp.R) {
            cols.push_back(j);
            ph.push_back(phi_derivs(x / bp.R));
        }
    }
    const double iR = 1.0 / bp.R, it = 1.0 / bp.tau;
    long double I = 0, Ip = 0, Ipp = 0, K1 = 0, K2 = 0, K3 = 0, K4 = 0, J = 0;
    for (std::size_t m = 0; m < u.nt; ++m) {
        const double t = u.t(m);
        if (t >= bp.tau) break;
        const double wt = (m == 0 ? 0.5 : 1.0) * u.dt * u.dx;
        const auto et = eta_derivs(std::max(0.0, t) * it);
        const bool upper_half = t >= 0.5 * bp.tau;
        for (std::size_t c = 0; c < cols.size(); ++c) {
            const std::size_t j = cols[c];
            const double x = u.x(j);
            const double uv = u.at(m, j);
            const auto G = gauge.at(t, x);
            const auto d = eval_damping(spec, t, x);
            const double psi = et.value * ph[c].value;
            const double psi_t = et.d1 * it * ph[c].value;
            const double psi_tt = et.d2 * it * it * ph[c].value;
            const double psi_x = et.value * ph[c].d1 * iR;
            const double psi_xx = et.value * ph[c].d2 * iR * iR;
            const double nl = forcing ? forcing(t, x, uv) : abs_pow(uv, bp.p);
            const double dens = G.g * nl * psi * wt;
            I += dens;
            if (upper_half) Ip += dens;
            if (std::abs(x) > 0.5 * bp.R) Ipp += dens;
            K1 += G.g * uv * psi_tt * wt;
            K2 -= G.g * uv * psi_xx * wt;
            K3 -= 2.0 * G.g_x * uv * psi_x * wt;
            K4 -= (-2.0 * G.g_t + G.g * d.a) * uv * psi_t * wt;
            if (m == 0) J += ((-G.g_t + G.g * d.a) * uv + G.g * u.dt_at(0, j)) * ph[c].value * u.dx;
        }
    }
    rep.I = static_cast<double>(I);
    rep.I_prime = static_cast<double>(Ip);
    rep.I_double_prime = static_cast<double>(Ipp);
    rep.K1 = static_cast<double>(K1);
    rep.K2 = static_cast<double>(K2);
    rep.K3 = static_cast<double>(K3);
    rep.K4 = static_cast<double>(K4);
    rep.J = static_cast<double>(J);
    rep.defect = std::abs(static_cast<double>((I + J) - (K1 + K2 + K3 + K4)));
    return rep;
}

/// J_R for data given as callables, integrated by the trapezoid rule with step dx.
inline double data_functional(const std::function<double(double)>& u0, const std::function<double(double)>& u1,
                              const GaugeLookup& gauge, const DampingSpec& spec, double R, double dx) {
    if (!(R > 0.0) || !(dx > 0.0)) throw ConfigError("data functional: R and dx must be > 0");
    const auto n = static_cast<long long>(std::floor(R / dx));
    long double J = 0;
    for (long long j = -n; j <= n; ++j) {
        const double x = static_cast<double>(j) * dx;
        if (std::abs(x) >= R) continue;
        const auto G = gauge.at(0.0, x);
        const double a = eval_damping(spec, 0.0, x).a;
        J += ((-G.g_t + G.g * a) * u0(x) + G.g * u1(x)) * phi(x / R) * dx;
    }
    return static_cast<double>(J);
}

struct DataConditionScan {
    std::vector<double> R;
    std::vector<double> J;
    std::optional<double> R0;  ///< first R from which J stays positive for 3 consecutive doublings
};

inline DataConditionScan data_condition_scan(const std::function<double(double R)>& J_of_R, double R_base,
                                             std::size_t doublings) {
    if (!(R_base > 0.0)) throw ConfigError("data condition scan: R_base must be > 0");
    DataConditionScan s;
    double R = R_base;
    for (std::size_t i = 0; i < doublings; ++i, R *= 2.0) {
        s.R.push_back(R);
        s.J.push_back(J_of_R(R));
    }
    for (std::size_t i = 0; i + 2 < s.J.size(); ++i)
        if (s.J[i] > 0 && s.J[i + 1] > 0 && s.J[i + 2] > 0) {
            s.R0 = s.R[i];
            break;
        }
    return s;
}

/// (1-b) b^{b/(1-b)} d^{1/(1-b)}, the maximum over c >= 0 of d c^b - c.
inline double young_gap(double d, double b) {
    if (!(d > 0.0)) throw ConfigError("young gap: d must be > 0");
    if (!(b > 0.0 && b < 1.0)) throw ConfigError("young gap: b must lie in (0,1)");
    return (1.0 - b) * std::pow(b, b / (1.0 - b)) * std::pow(d, 1.0 / (1.0 - b));
}

struct YoungCheck {
    double lhs = 0.0;    ///< d c^b - c
    double bound = 0.0;
    bool holds = true;
};

inline YoungCheck young_gap_inequality(double d, double b, double c) {
    if (!(c >= 0.0)) throw ConfigError("young gap: c must be >= 0");
    YoungCheck y;
    y.bound = young_gap(d, b);
    y.lhs = d * std::pow(c, b) - c;
    y.holds = y.lhs <= y.bound * (1.0 + 1e-12) + 1e-300;
    return y;
}

struct BlowupCheck {
    double C_fit = 0.0;
    bool pass = true;
    bool data_condition_active = false;  ///< I = 0: C_fit is undefined and reported as 0
    bool J_positive = false;
};

/// C_fit makes I + J <= C D I^{1/p} an equality; for J > 0 the consequences
/// I <= (C_fit D)^q and J <= young_gap(C_fit D, 1/p) are then re-checked.
inline BlowupCheck check_blowup_inequality(const FunctionalReport& r, const BumpParams& bp) {
    BlowupCheck c;
    c.J_positive = r.J > 0.0;
    if (r.I == 0.0) {
        // no finite constant exists; C_fit stays 0 and the flag carries the information
        c.data_condition_active = true;
        c.pass = !(r.J > 0.0);
        return c;
    }
    if (!(r.D > 0.0)) throw ConfigError("blow-up check: envelope must be > 0");
    c.C_fit = (r.I + r.J) / (r.D * std::pow(r.I, 1.0 / bp.p));
    if (r.J > 0.0) {
        const double cd = c.C_fit * r.D;
        const bool mass = r.I <= std::pow(cd, bp.q) * (1.0 + 1e-10);
        const bool young = r.J <= young_gap(cd, 1.0 / bp.p) * (1.0 + 1e-10);
        c.pass = mass && young;
    }
    return c;
}

/// Least-squares slope of log(value) against log(tau).
inline double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError("log-log fit: need at least two points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0) || !(y[i] > 0)) throw ConfigError("log-log fit: values must be > 0");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double den = n * sxx - sx * sx;
    if (den == 0.0) throw ConfigError("log-log fit: abscissae must differ");
    return (n * sxy - sx * sy) / den;
}

}  // namespace nlwave
