#pragma once

// Construction of the gauge g that puts the damped equation in divergence form.
//
// With g = 1 + h, (1+t)(1+h) or (1+t)^mu (1+h) depending on the damping family,
// h solves a linear wave equation with decaying coefficients. Writing
// v1 = h_t + h_x, v2 = h_t - h_x, every variant has the characteristic form
//
//   v1(t,x) = v1(S, x + t - S) - int_t^S F(s, x + t - s) ds
//   v2(t,x) = v2(S, x - t + S) - int_t^S F(s, x - t + s) ds
//   h(t,x)  = h(S, x) - 1/2 int_t^S (v1 + v2)(s, x) ds
//   F = c_v (v1 + v2)/2 + c_f (1 + h)
//
// and the x-derivatives obey the differentiated system. The Picard iteration
// evaluates F on the previous iterate and integrates along lattice lines.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "nlwave/damping.hpp"
#include "nlwave/errors.hpp"
#include "nlwave/lattice.hpp"

namespace nlwave {

/// Which characteristic system is iterated; one per damping family.
enum class Variant { Lemma11, Lemma12, Lemma13 };

inline Variant variant_for(Family f) {
    switch (f) {
        case Family::Perturbation: return Variant::Lemma11;
        case Family::ScaleInv2: return Variant::Lemma12;
        case Family::ScaleInvMu: return Variant::Lemma13;
    }
    return Variant::Lemma11;
}

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::Lemma11: return "perturbation";
        case Variant::Lemma12: return "scaleinv2";
        case Variant::Lemma13: return "scaleinvmu";
    }
    return "?";
}

inline void check_variant(const DampingSpec& spec, Variant variant) {
    if (variant_for(spec.family) != variant)
        throw ConfigError("gauge: variant " + to_string(variant) + " does not match damping family " +
                          to_string(spec.family));
}

/// Coefficients of the iteration integrand at one node.
struct IntegrandCoefficients {
    double c_v = 0.0;   ///< multiplies (v1 + v2)/2
    double c_f = 0.0;   ///< multiplies (1 + h)
    double c_vx = 0.0;  ///< d/dx c_v
    double c_fx = 0.0;  ///< d/dx c_f
};

inline IntegrandCoefficients integrand_coefficients(const DampingSpec& spec, Variant variant, double t, double x) {
    const ProfileSample b = eval_perturbation(spec, t, x);
    const double s = 1.0 / (1.0 + t);
    IntegrandCoefficients c;
    switch (variant) {
        case Variant::Lemma11:
            c = {b.value, b.dt, b.dx, b.dtx};
            break;
        case Variant::Lemma12:
            c = {b.value, b.value * s + b.dt, b.dx, b.dx * s + b.dtx};
            break;
        case Variant::Lemma13: {
            const double m = spec.mu;
            c = {b.value - m * s, m * s * b.value + b.dt, b.dx, m * s * b.dx + b.dtx};
            break;
        }
    }
    return c;
}

/// Upper bound for the dropped part of the iteration integrand beyond s_max.
///
/// Integrates the majorant
///   delta theta (1+s)^{-2k} + c delta (1+s)^{-(k+1)} (1+theta)   [+ mu theta' (1+s)^{-(k+1)}]
/// from s_max to infinity, with c = 2 for ScaleInv2 and the bracketed term for ScaleInvMu.
inline double tail_bound(const DampingSpec& spec, double s_max, double theta) {
    if (!(s_max > 0.0)) throw ConfigError("tail_bound: s_max must be > 0");
    if (spec.delta == 0.0 || spec.profile.kind == ProfileKind::Zero) return 0.0;
    const double k = spec.k, d = spec.delta, w = 1.0 + s_max;
    const double forcing = spec.family == Family::ScaleInv2 ? 2.0 : 1.0;
    double bound = d * theta / ((2.0 * k - 1.0) * std::pow(w, 2.0 * k - 1.0)) +
                   forcing * d * (1.0 + theta) / (k * std::pow(w, k));
    if (spec.family == Family::ScaleInvMu) {
        const double theta_v = theta * std::min(k - 1.0, 1.0);
        bound += spec.mu * theta_v / (k * std::pow(w, k));
    }
    return bound;
}

/// tail_bound restricted to the part of the perturbation the far-field closure does not capture.
inline double uncaptured_tail_bound(const DampingSpec& spec, double s_max, double theta) {
    return is_x_independent(spec) ? 0.0 : tail_bound(spec, s_max, theta);
}

enum class Closure { Zero, FarField };

/// State imposed at s = s_max. x-independent, so the derivative components vanish.
struct FarFieldState {
    double h = 0.0;
    double v = 0.0;  ///< v1 = v2 = h_t
};

/// Exact solution at time s for the x-independent part bbar of the perturbation.
///
/// Perturbation and ScaleInvMu: h = exp(-int_s^inf bbar) - 1, h_t = bbar (1+h).
/// ScaleInv2: g = (1+t)(1+h) has g_t - a g = -1, giving
///   1 + h(s) = int_0^1 exp(-int_s^{sigma(u)} bbar) du,  sigma(u) = (1+s)/u - 1,
///   h_t = bbar (1+h) + h/(1+s).
inline FarFieldState far_field_state(const DampingSpec& spec, double s) {
    const MeanComponent mean = mean_component(spec);
    if (!mean.value) return {};
    const auto& bbar = mean.value;
    boost::math::quadrature::exp_sinh<double> tail_integrator;
    auto tail = [&](double from) { return tail_integrator.integrate(bbar, from, std::numeric_limits<double>::infinity()); };
    const double tail_s = tail(s);
    FarFieldState st;
    if (spec.family == Family::ScaleInv2) {
        auto integrand = [&](double u) {
            if (u <= 0.0) return std::expm1(-tail_s);
            const double sigma = (1.0 + s) / u - 1.0;
            return std::expm1(-(tail_s - tail(sigma)));
        };
        boost::math::quadrature::tanh_sinh<double> outer;
        st.h = outer.integrate(integrand, 0.0, 1.0);
        st.v = bbar(s) * (1.0 + st.h) + st.h / (1.0 + s);
    } else {
        st.h = std::expm1(-tail_s);
        st.v = bbar(s) * (1.0 + st.h);
    }
    return st;
}

/// Iterate V = (v1, v2, h) with x-derivatives, plus the Y-norm bookkeeping.
struct AuxTriple {
    CharacteristicGrid grid;
    LatticeField v1, v2, h, dv1, dv2, dh;
    double theta = 0.5;
    double theta_prime = 0.5;
    double lambda = 1.0;
    std::size_t iter_count = 0;
    double contraction_r = 0.0;

    AuxTriple() = default;
    explicit AuxTriple(const CharacteristicGrid& g)
        : grid(g), v1(g), v2(g), h(g), dv1(g), dv2(g), dh(g) {}
};

/// Y-norm of the difference of two iterates:
///   sup_t { lambda (1+t)^k (|v1|_B + |v2|_B) + (1+t)^{k-1} |h|_B },  |f|_B = sup|f| + sup|f_x|.
inline double y_norm_diff(const AuxTriple& a, const AuxTriple& b, double k, double lambda) {
    const auto& g = a.grid;
    double norm = 0.0;
    for (std::size_t l = 0; l <= g.top(); ++l) {
        double m_v1 = 0, m_dv1 = 0, m_v2 = 0, m_dv2 = 0, m_h = 0, m_dh = 0;
        const std::size_t off = g.offset(l), w = g.width(l);
        for (std::size_t i = off; i < off + w; ++i) {
            m_v1 = std::max(m_v1, std::abs(a.v1[i] - b.v1[i]));
            m_v2 = std::max(m_v2, std::abs(a.v2[i] - b.v2[i]));
            m_h = std::max(m_h, std::abs(a.h[i] - b.h[i]));
            m_dv1 = std::max(m_dv1, std::abs(a.dv1[i] - b.dv1[i]));
            m_dv2 = std::max(m_dv2, std::abs(a.dv2[i] - b.dv2[i]));
            m_dh = std::max(m_dh, std::abs(a.dh[i] - b.dh[i]));
        }
        const double tp = 1.0 + g.t(l);
        const double val = lambda * std::pow(tp, k) * (m_v1 + m_dv1 + m_v2 + m_dv2) + std::pow(tp, k - 1.0) * (m_h + m_dh);
        if (!std::isfinite(val)) return std::numeric_limits<double>::infinity();
        norm = std::max(norm, val);
    }
    return norm;
}

inline double y_norm(const AuxTriple& a, double k, double lambda) {
    AuxTriple zero(a.grid);
    return y_norm_diff(a, zero, k, lambda);
}

struct KThetaMargins {
    double v1 = 0.0;  ///< sup (1+t)^k |v1|
    double v2 = 0.0;
    double h = 0.0;   ///< sup (1+t)^{k-1} |h|
};

inline KThetaMargins k_theta_margins(const AuxTriple& V, double k) {
    KThetaMargins m;
    const auto& g = V.grid;
    for (std::size_t l = 0; l <= g.top(); ++l) {
        const double tp = 1.0 + g.t(l);
        const double wv = std::pow(tp, k), wh = std::pow(tp, k - 1.0);
        const std::size_t off = g.offset(l), w = g.width(l);
        for (std::size_t i = off; i < off + w; ++i) {
            m.v1 = std::max(m.v1, wv * std::abs(V.v1[i]));
            m.v2 = std::max(m.v2, wv * std::abs(V.v2[i]));
            m.h = std::max(m.h, wh * std::abs(V.h[i]));
        }
    }
    return m;
}

inline bool in_k_theta(const KThetaMargins& m, double theta, double theta_v, double slack) {
    return m.v1 <= theta_v + slack && m.v2 <= theta_v + slack && m.h <= theta + slack;
}

struct StepOptions {
    Closure closure = Closure::FarField;
    QuadratureRule rule = QuadratureRule::Cubic;
};

/// The Picard map with its node coefficients and far-field state precomputed.
class PicardOperator {
public:
    PicardOperator(const DampingSpec& spec, const CharacteristicGrid& grid, Variant variant, StepOptions opts = {})
        : grid_(grid), lines_(grid), opts_(opts), cv_(grid), cf_(grid), cvx_(grid), cfx_(grid) {
        spec.validate();
        check_variant(spec, variant);
        for (std::size_t l = 0; l <= grid.top(); ++l) {
            const double t = grid.t(l);
            for (std::size_t c = grid.first_col(l); c <= grid.last_col(l); ++c) {
                const std::size_t i = grid.index(l, c);
                const auto co = integrand_coefficients(spec, variant, t, grid.x(c));
                cv_[i] = co.c_v;
                cf_[i] = co.c_f;
                cvx_[i] = co.c_vx;
                cfx_[i] = co.c_fx;
            }
        }
        if (opts_.closure == Closure::FarField) far_ = far_field_state(spec, grid.s_max);
    }

    const FarFieldState& far_field() const { return far_; }
    const CharacteristicGrid& grid() const { return grid_; }

    /// next = T(prev); next must be sized for the grid and must not alias prev.
    void apply(const AuxTriple& prev, AuxTriple& next) const {
        const std::size_t n = grid_.node_count();
        std::vector<double> f(n), fx(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double sv = 0.5 * (prev.v1[i] + prev.v2[i]);
            const double sdv = 0.5 * (prev.dv1[i] + prev.dv2[i]);
            const double one_h = 1.0 + prev.h[i];
            f[i] = cv_[i] * sv + cf_[i] * one_h;
            fx[i] = cvx_[i] * sv + cv_[i] * sdv + cfx_[i] * one_h + cf_[i] * prev.dh[i];
        }
        const double step = grid_.step;
        lines_.for_each_v1_line([&](std::span<const std::size_t> nodes, std::size_t) {
            integrate_from_top(nodes, f, step, far_.v, opts_.rule, next.v1.values());
            integrate_from_top(nodes, fx, step, 0.0, opts_.rule, next.dv1.values());
        });
        lines_.for_each_v2_line([&](std::span<const std::size_t> nodes, std::size_t) {
            integrate_from_top(nodes, f, step, far_.v, opts_.rule, next.v2.values());
            integrate_from_top(nodes, fx, step, 0.0, opts_.rule, next.dv2.values());
        });
        // h = h(S) - 1/2 int (v1 + v2): integrate w = (v1 + v2)/2 with the same rule
        for (std::size_t i = 0; i < n; ++i) {
            f[i] = 0.5 * (next.v1[i] + next.v2[i]);
            fx[i] = 0.5 * (next.dv1[i] + next.dv2[i]);
        }
        lines_.for_each_vertical_line([&](std::span<const std::size_t> nodes, std::size_t) {
            integrate_from_top(nodes, f, step, far_.h, opts_.rule, next.h.values());
            integrate_from_top(nodes, fx, step, 0.0, opts_.rule, next.dh.values());
        });
        next.grid = grid_;
        next.theta = prev.theta;
        next.theta_prime = prev.theta_prime;
        next.lambda = prev.lambda;
        next.iter_count = prev.iter_count + 1;
    }

private:
    CharacteristicGrid grid_;
    LineTable lines_;
    StepOptions opts_;
    LatticeField cv_, cf_, cvx_, cfx_;
    FarFieldState far_;
};

/// One application of the Picard map.
inline AuxTriple picard_step(const AuxTriple& prev, const DampingSpec& spec, const CharacteristicGrid& grid,
                             Variant variant, StepOptions opts = {}) {
    PicardOperator op(spec, grid, variant, opts);
    AuxTriple next(grid);
    op.apply(prev, next);
    return next;
}

struct ConvergenceReport {
    std::size_t iterations = 0;
    double final_update_norm = 0.0;
    double contraction_r = 0.0;
    double tail_bound = 0.0;
    bool in_K_theta = false;
    double lambda = 1.0;
    double theta = 0.5;
    double theta_prime = 0.5;
    double s_max = 0.0;
    KThetaMargins margins;
    std::vector<double> update_norms;
};

class GaugeFailure : public std::runtime_error {
public:
    GaugeFailure(const std::string& what, ConvergenceReport rep) : std::runtime_error(what), report(std::move(rep)) {}
    ConvergenceReport report;
};

/// Updates grew for 3 consecutive iterations or never reached tol.
class NoContraction : public GaugeFailure {
public:
    using GaugeFailure::GaugeFailure;
};

/// The converged iterate violates the K_theta bounds.
class NotInK : public GaugeFailure {
public:
    using GaugeFailure::GaugeFailure;
};

/// g, g_t, g_x on the lattice.
struct GaugeField {
    CharacteristicGrid grid;
    Family family = Family::Perturbation;
    LatticeField g, g_t, g_x;
};

inline GaugeField make_gauge_field(const AuxTriple& V, const DampingSpec& spec) {
    GaugeField G{V.grid, spec.family, LatticeField(V.grid), LatticeField(V.grid), LatticeField(V.grid)};
    const auto& grid = V.grid;
    for (std::size_t l = 0; l <= grid.top(); ++l) {
        const double tp = 1.0 + grid.t(l);
        double w = 1.0, dw = 0.0;  // g = w(t) (1 + h)
        if (spec.family == Family::ScaleInv2) {
            w = tp;
            dw = 1.0;
        } else if (spec.family == Family::ScaleInvMu) {
            w = std::pow(tp, spec.mu);
            dw = spec.mu * std::pow(tp, spec.mu - 1.0);
        }
        const std::size_t off = grid.offset(l), width = grid.width(l);
        for (std::size_t i = off; i < off + width; ++i) {
            const double ht = 0.5 * (V.v1[i] + V.v2[i]);
            G.g[i] = w * (1.0 + V.h[i]);
            G.g_t[i] = dw * (1.0 + V.h[i]) + w * ht;
            G.g_x[i] = w * V.dh[i];
        }
    }
    return G;
}

struct ConstructOptions {
    double theta = 0.5;
    double lambda = 0.0;  ///< 0 selects automatically
    double tol = 1e-8;
    std::size_t max_iter = 200;
    double k_slack = 1e-6;
    StepOptions step;
};

struct GaugeResult {
    AuxTriple triple;
    GaugeField gauge;
    ConvergenceReport report;
};

inline double initial_lambda(const DampingSpec& spec) {
    if (spec.family != Family::ScaleInvMu) return 1.0;
    return std::max(1.0, std::ceil(spec.k / (spec.k - spec.mu)));
}

namespace detail {
inline GaugeResult construct_with_lambda(const PicardOperator& op, const DampingSpec& spec, const ConstructOptions& o,
                                         double lambda) {
    const auto& grid = op.grid();
    const double theta_v = spec.family == Family::ScaleInvMu ? o.theta * std::min(spec.k - 1.0, 1.0) : o.theta;
    AuxTriple cur(grid), next(grid);
    cur.theta = o.theta;
    cur.theta_prime = theta_v;
    cur.lambda = lambda;
    ConvergenceReport rep;
    rep.lambda = lambda;
    rep.theta = o.theta;
    rep.theta_prime = theta_v;
    rep.s_max = grid.s_max;
    rep.tail_bound = uncaptured_tail_bound(spec, grid.s_max, o.theta);
    int growth = 0;
    bool converged = false;
    for (std::size_t n = 1; n <= o.max_iter; ++n) {
        op.apply(cur, next);
        const double d = y_norm_diff(next, cur, spec.k, lambda);
        std::swap(cur, next);
        rep.update_norms.push_back(d);
        rep.iterations = n;
        rep.final_update_norm = d;
        if (n >= 2) {
            const double prev = rep.update_norms[n - 2];
            rep.contraction_r = prev > 0.0 ? d / prev : 0.0;
            growth = d > prev ? growth + 1 : 0;
        }
        if (!std::isfinite(d)) throw NoContraction("gauge: iteration diverged", rep);
        if (d <= o.tol) {
            converged = true;
            break;
        }
        if (growth >= 3) throw NoContraction("gauge: updates grew for 3 consecutive iterations", rep);
    }
    if (!converged) throw NoContraction("gauge: no convergence within max_iter", rep);
    cur.contraction_r = rep.contraction_r;
    rep.margins = k_theta_margins(cur, spec.k);
    rep.in_K_theta = in_k_theta(rep.margins, o.theta, theta_v, o.k_slack);
    if (!rep.in_K_theta) throw NotInK("gauge: converged iterate leaves K_theta", rep);
    GaugeField G = make_gauge_field(cur, spec);
    return {std::move(cur), std::move(G), std::move(rep)};
}
}  // namespace detail

/// Iterates the Picard map from V0 = 0 until the Y-norm update is below tol.
///
/// For ScaleInvMu with lambda = 0 the weight starts at max(1, ceil(k/(k-mu)))
/// and doubles on NoContraction up to 2^10.
inline GaugeResult construct_h(const DampingSpec& spec, const CharacteristicGrid& grid, const ConstructOptions& opts = {}) {
    if (!(opts.theta > 0.0 && opts.theta < 1.0)) throw ConfigError("gauge: theta must lie in (0,1)");
    if (!(opts.tol > 0.0)) throw ConfigError("gauge: tol must be > 0");
    const Variant variant = variant_for(spec.family);
    PicardOperator op(spec, grid, variant, opts.step);
    if (spec.family != Family::ScaleInvMu || opts.lambda > 0.0) {
        const double lambda = opts.lambda > 0.0 ? opts.lambda : 1.0;
        return detail::construct_with_lambda(op, spec, opts, lambda);
    }
    double lambda = initial_lambda(spec);
    for (;;) {
        try {
            return detail::construct_with_lambda(op, spec, opts, lambda);
        } catch (const NoContraction&) {
            if (lambda * 2.0 > 1024.0) throw;
            lambda *= 2.0;
        }
    }
}

/// Smallest lattice multiple S >= t_max with uncaptured_tail_bound(S) <= tail_tol.
inline double auto_s_max(const DampingSpec& spec, double t_max, double x_extent, double step, double theta,
                         double tail_tol, std::size_t max_nodes = 10'000'000) {
    double s = t_max;
    if (uncaptured_tail_bound(spec, t_max, theta) > tail_tol) {
        double lo = t_max, hi = std::max(2.0 * t_max, 1.0);
        while (uncaptured_tail_bound(spec, hi, theta) > tail_tol) {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e12) throw ConfigError("gauge: no finite s_max meets the tail tolerance");
        }
        for (int it = 0; it < 200 && hi - lo > 0.5 * step; ++it) {
            const double mid = 0.5 * (lo + hi);
            (uncaptured_tail_bound(spec, mid, theta) > tail_tol ? lo : hi) = mid;
        }
        s = hi;
    }
    s = std::ceil(s / step - 1e-9) * step;
    const double ns = s / step + 1.0, nx = x_extent / step + 1.0;
    if (ns * nx + ns * (ns - 1.0) > static_cast<double>(max_nodes))
        throw ConfigError("gauge: automatic s_max = " + std::to_string(s) +
                          " exceeds the lattice node budget; set s_max explicitly");
    return s;
}

/// Restricts residual-type sups to a physical window inside the output region.
struct Window {
    double t_lo = -std::numeric_limits<double>::infinity();
    double t_hi = std::numeric_limits<double>::infinity();
    double x_lo = -std::numeric_limits<double>::infinity();
    double x_hi = std::numeric_limits<double>::infinity();
};

struct ResidualReport {
    double sup = 0.0;
    double t_at = 0.0;
    double x_at = 0.0;
    std::size_t nodes = 0;
};

namespace detail {
template <class Fn>
ResidualReport interior_sup(const CharacteristicGrid& g, const Window& w, Fn&& value_at) {
    ResidualReport rep;
    const double eps = 1e-9 * g.step;
    for (std::size_t l = 1; l + 1 < g.nt; ++l) {
        const double t = g.t(l);
        if (t < w.t_lo - eps || t > w.t_hi + eps) continue;
        for (std::size_t c = g.output_col0() + 1; c + 1 < g.output_col0() + g.nx; ++c) {
            const double x = g.x(c);
            if (x < w.x_lo - eps || x > w.x_hi + eps) continue;
            const double r = std::abs(value_at(l, c));
            ++rep.nodes;
            if (r > rep.sup || !std::isfinite(r)) {
                rep.sup = r;
                rep.t_at = t;
                rep.x_at = x;
            }
        }
    }
    return rep;
}
}  // namespace detail

/// sup |h_tt - h_xx - c_v h_t - c_f (1+h)| over interior output nodes,
/// with centered second differences and h_t = (v1 + v2)/2 from the stored grids.
inline ResidualReport residual(const AuxTriple& V, const DampingSpec& spec, Variant variant, const Window& window = {}) {
    check_variant(spec, variant);
    const auto& g = V.grid;
    const double inv = 1.0 / (g.step * g.step);
    return detail::interior_sup(g, window, [&](std::size_t l, std::size_t c) {
        const std::size_t i = g.index(l, c);
        const double hc = V.h[i];
        const double htt = (V.h[g.index(l + 1, c)] - 2.0 * hc + V.h[g.index(l - 1, c)]) * inv;
        const double hxx = (V.h[g.index(l, c + 1)] - 2.0 * hc + V.h[g.index(l, c - 1)]) * inv;
        const auto co = integrand_coefficients(spec, variant, g.t(l), g.x(c));
        return htt - hxx - co.c_v * 0.5 * (V.v1[i] + V.v2[i]) - co.c_f * (1.0 + hc);
    });
}

/// sup |g_tt - g_xx - (g a)_t| over interior output nodes.
inline ResidualReport gauge_equation_residual(const GaugeField& G, const DampingSpec& spec, const Window& window = {}) {
    const auto& g = G.grid;
    const double inv = 1.0 / (g.step * g.step);
    return detail::interior_sup(g, window, [&](std::size_t l, std::size_t c) {
        const std::size_t i = g.index(l, c);
        const double gc = G.g[i];
        const double gtt = (G.g[g.index(l + 1, c)] - 2.0 * gc + G.g[g.index(l - 1, c)]) * inv;
        const double gxx = (G.g[g.index(l, c + 1)] - 2.0 * gc + G.g[g.index(l, c - 1)]) * inv;
        const auto a = eval_damping(spec, g.t(l), g.x(c));
        return gtt - gxx - (G.g_t[i] * a.a + gc * a.a_t);
    });
}

struct DecayReport {
    double h_weighted_sup = 0.0;  ///< sup (1+t)^{k-1} |h|
    double derivative_C = 0.0;    ///< sup (1+t)^k (|v1| + |v2| + |h_x|)
    double v_weighted_sup = 0.0;  ///< sup (1+t)^k max(|v1|, |v2|)
    bool pass = false;            ///< h bound against theta
    bool v_pass = true;           ///< v bound against theta_v (when requested)
};

inline DecayReport verify_decay(const AuxTriple& V, double theta, double k,
                                std::optional<double> theta_v = std::nullopt) {
    DecayReport rep;
    const auto& g = V.grid;
    for (std::size_t l = 0; l <= g.top(); ++l) {
        const double tp = 1.0 + g.t(l);
        const double wh = std::pow(tp, k - 1.0), wv = std::pow(tp, k);
        const std::size_t off = g.offset(l), w = g.width(l);
        for (std::size_t i = off; i < off + w; ++i) {
            rep.h_weighted_sup = std::max(rep.h_weighted_sup, wh * std::abs(V.h[i]));
            rep.derivative_C = std::max(rep.derivative_C, wv * (std::abs(V.v1[i]) + std::abs(V.v2[i]) + std::abs(V.dh[i])));
            rep.v_weighted_sup = std::max(rep.v_weighted_sup, wv * std::max(std::abs(V.v1[i]), std::abs(V.v2[i])));
        }
    }
    rep.pass = rep.h_weighted_sup <= theta && std::isfinite(rep.derivative_C);
    if (theta_v) rep.v_pass = rep.v_weighted_sup <= *theta_v;
    return rep;
}

struct DeltaBracket {
    double delta_pass = 0.0;
    double delta_fail = 0.0;
    std::size_t constructions = 0;
};

/// Geometric bisection on delta between a convergent-in-K_theta value and a failing one.
inline DeltaBracket bracket_delta0(DampingSpec spec, const CharacteristicGrid& grid, const ConstructOptions& opts,
                                   double delta_pass, double delta_fail, double target_ratio = 1.05) {
    DeltaBracket br{delta_pass, delta_fail, 0};
    auto passes = [&](double d) {
        spec.delta = d;
        ++br.constructions;
        try {
            construct_h(spec, grid, opts);
            return true;
        } catch (const GaugeFailure&) {
            return false;
        }
    };
    if (!passes(delta_pass)) throw ConfigError("bracket_delta0: lower delta does not converge in K_theta");
    if (passes(delta_fail)) throw ConfigError("bracket_delta0: upper delta does not fail");
    while (br.delta_fail / br.delta_pass > target_ratio) {
        const double mid = std::sqrt(br.delta_pass * br.delta_fail);
        (passes(mid) ? br.delta_pass : br.delta_fail) = mid;
    }
    return br;
}

}  // namespace nlwave
