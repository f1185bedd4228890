#pragma once

// Rectangular space-time samples of a solution and node-exact gauge access.

#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "nlwave/damping.hpp"
#include "nlwave/errors.hpp"
#include "nlwave/gauge.hpp"

namespace nlwave {

/// u and u_t on levels t0 + m*dt, columns x0 + j*dx.
struct SpaceTimeField {
    double t0 = 0.0, dt = 0.0;
    double x0 = 0.0, dx = 0.0;
    std::size_t nt = 0, nx = 0;
    std::vector<double> u, u_t;

    SpaceTimeField() = default;
    SpaceTimeField(double t0_, double dt_, double x0_, double dx_, std::size_t nt_, std::size_t nx_)
        : t0(t0_), dt(dt_), x0(x0_), dx(dx_), nt(nt_), nx(nx_), u(nt_ * nx_, 0.0), u_t(nt_ * nx_, 0.0) {}

    double t(std::size_t m) const { return t0 + static_cast<double>(m) * dt; }
    double x(std::size_t j) const { return x0 + static_cast<double>(j) * dx; }
    double t_last() const { return t(nt - 1); }
    double x_last() const { return x(nx - 1); }
    double& at(std::size_t m, std::size_t j) { return u[m * nx + j]; }
    double at(std::size_t m, std::size_t j) const { return u[m * nx + j]; }
    double& dt_at(std::size_t m, std::size_t j) { return u_t[m * nx + j]; }
    double dt_at(std::size_t m, std::size_t j) const { return u_t[m * nx + j]; }

    /// Adds one level (sizes must match nx).
    void push_level(const std::vector<double>& level_u, const std::vector<double>& level_ut) {
        u.insert(u.end(), level_u.begin(), level_u.end());
        u_t.insert(u_t.end(), level_ut.begin(), level_ut.end());
        ++nt;
    }
};

/// Fills a field from closed forms, e.g. for manufactured solutions.
template <class U, class Ut>
SpaceTimeField sample_field(double t_max, double x_min, double x_max, double step, U&& u, Ut&& ut) {
    const auto nt = static_cast<std::size_t>(std::llround(t_max / step)) + 1;
    const auto nx = static_cast<std::size_t>(std::llround((x_max - x_min) / step)) + 1;
    SpaceTimeField f(0.0, step, x_min, step, nt, nx);
    for (std::size_t m = 0; m < nt; ++m)
        for (std::size_t j = 0; j < nx; ++j) {
            f.at(m, j) = u(f.t(m), f.x(j));
            f.dt_at(m, j) = ut(f.t(m), f.x(j));
        }
    return f;
}

struct GaugeValue {
    double g = 1.0, g_t = 0.0, g_x = 0.0;
};

/// Gauge values on the rectangle t = m*step (m < nt), x = x_min + j*step (j < nx),
/// e.g. as read back from a gauge table file.
struct GaugeTable {
    double step = 0.0, x_min = 0.0;
    std::size_t nt = 0, nx = 0;
    std::vector<double> g, g_t, g_x;

    double t_max() const { return static_cast<double>(nt - 1) * step; }
    double x_max() const { return x_min + static_cast<double>(nx - 1) * step; }
};

/// Output rectangle of a constructed lattice gauge.
inline GaugeTable gauge_table(const GaugeField& G) {
    const auto& grid = G.grid;
    GaugeTable T;
    T.step = grid.step;
    T.x_min = grid.x_min;
    T.nt = grid.nt;
    T.nx = grid.nx;
    for (std::size_t l = 0; l < grid.nt; ++l)
        for (std::size_t c = 0; c < grid.nx; ++c) {
            const std::size_t i = grid.index(l, grid.output_col0() + c);
            T.g.push_back(G.g[i]);
            T.g_t.push_back(G.g_t[i]);
            T.g_x.push_back(G.g_x[i]);
        }
    return T;
}

/// g, g_t, g_x at requested points, from one of
///   - a constructed lattice gauge or a gauge table (node-exact, DomainError elsewhere),
///   - the closed forms 1, (1+t), (1+t)^mu when the perturbation vanishes,
///   - the exact x-independent gauge (far-field formulas) for x-independent perturbations.
class GaugeLookup {
public:
    explicit GaugeLookup(std::shared_ptr<const GaugeField> field) : field_(std::move(field)) {}
    explicit GaugeLookup(std::shared_ptr<const GaugeTable> table) : table_(std::move(table)) {}

    static GaugeLookup unperturbed(const DampingSpec& spec) {
        if (spec.delta != 0.0 && spec.profile.kind != ProfileKind::Zero)
            throw ConfigError("gauge lookup: closed-form gauge needs a vanishing perturbation");
        GaugeLookup l(std::shared_ptr<const GaugeField>{});
        l.family_ = spec.family;
        l.mu_ = spec.mu;
        return l;
    }

    static GaugeLookup x_independent(const DampingSpec& spec) {
        if (!is_x_independent(spec)) throw ConfigError("gauge lookup: perturbation depends on x");
        GaugeLookup l = unperturbed(make_damping(spec.family, 0.0, spec.k, PerturbationProfile::zero(), spec.mu));
        l.exact_ = std::make_shared<DampingSpec>(spec);
        return l;
    }

    bool analytic() const { return !field_ && !table_; }

    GaugeValue at(double t, double x) const {
        if (table_) return table_at(t, x);
        if (!field_) {
            const double tp = 1.0 + t;
            double w = 1.0, dw = 0.0;
            if (family_ == Family::ScaleInv2) {
                w = tp;
                dw = 1.0;
            } else if (family_ == Family::ScaleInvMu) {
                w = std::pow(tp, mu_);
                dw = mu_ * std::pow(tp, mu_ - 1.0);
            }
            if (!exact_) return {w, dw, 0.0};
            const auto ff = far_field_state(*exact_, t);
            return {w * (1.0 + ff.h), dw * (1.0 + ff.h) + w * ff.v, 0.0};
        }
        const auto& g = field_->grid;
        const double fl = t / g.step, fc = (x - g.band_min()) / g.step;
        const double rl = std::round(fl), rc = std::round(fc);
        if (std::abs(fl - rl) > 1e-7 || std::abs(fc - rc) > 1e-7 || rl < 0 || rc < 0)
            throw DomainError("gauge lookup: (" + std::to_string(t) + ", " + std::to_string(x) + ") is not a lattice node");
        const auto level = static_cast<std::size_t>(rl);
        const auto col = static_cast<std::ptrdiff_t>(rc);
        if (level >= g.nt || !g.contains(level, col))
            throw DomainError("gauge lookup: (" + std::to_string(t) + ", " + std::to_string(x) +
                              ") lies outside the constructed gauge");
        const std::size_t i = g.index(level, static_cast<std::size_t>(col));
        return {field_->g[i], field_->g_t[i], field_->g_x[i]};
    }

private:
    GaugeValue table_at(double t, double x) const {
        const auto& T = *table_;
        const double fl = t / T.step, fc = (x - T.x_min) / T.step;
        const double rl = std::round(fl), rc = std::round(fc);
        if (std::abs(fl - rl) > 1e-7 || std::abs(fc - rc) > 1e-7)
            throw DomainError("gauge lookup: (" + std::to_string(t) + ", " + std::to_string(x) + ") is not a table node");
        if (rl < 0 || rc < 0 || rl >= static_cast<double>(T.nt) || rc >= static_cast<double>(T.nx))
            throw DomainError("gauge lookup: (" + std::to_string(t) + ", " + std::to_string(x) +
                              ") lies outside the gauge table");
        const std::size_t i = static_cast<std::size_t>(rl) * T.nx + static_cast<std::size_t>(rc);
        return {T.g[i], T.g_t[i], T.g_x[i]};
    }

    std::shared_ptr<const GaugeField> field_;
    std::shared_ptr<const GaugeTable> table_;
    std::shared_ptr<const DampingSpec> exact_;
    Family family_ = Family::Perturbation;
    double mu_ = 2.0;
};

}  // namespace nlwave
