#pragma once

// Space-time lattice with dt == dx, so the characteristics x +- t = const pass
// through nodes. Level i (t_i = i*step) stores the band [x_min - t_i, x_max + t_i];
// the stored region is the backward light cone of the output rectangle, which is
// exactly what the integrals along characteristics from t to s_max touch.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "nlwave/errors.hpp"

namespace nlwave {

struct CharacteristicGrid {
    double t_max = 0.0;
    double s_max = 0.0;
    double x_min = 0.0;
    double x_max = 0.0;
    double step = 0.0;
    std::size_t nt = 0;  ///< levels on [0, t_max]
    std::size_t ns = 0;  ///< levels on [0, s_max]
    std::size_t nx = 0;  ///< nodes on [x_min, x_max]

    std::size_t top() const { return ns - 1; }
    double band_min() const { return x_min - static_cast<double>(top()) * step; }
    double band_max() const { return x_max + static_cast<double>(top()) * step; }
    std::size_t band_columns() const { return nx + 2 * top(); }

    double t(std::size_t level) const { return static_cast<double>(level) * step; }
    double x(std::size_t col) const { return band_min() + static_cast<double>(col) * step; }

    std::size_t first_col(std::size_t level) const { return top() - level; }
    std::size_t last_col(std::size_t level) const { return top() + nx - 1 + level; }
    std::size_t width(std::size_t level) const { return nx + 2 * level; }
    std::size_t offset(std::size_t level) const { return level * nx + level * (level - (level > 0 ? 1 : 0)); }

    bool contains(std::size_t level, std::ptrdiff_t col) const {
        return level < ns && col >= static_cast<std::ptrdiff_t>(first_col(level)) &&
               col <= static_cast<std::ptrdiff_t>(last_col(level));
    }
    std::size_t index(std::size_t level, std::size_t col) const { return offset(level) + (col - first_col(level)); }
    std::size_t node_count() const { return ns * nx + ns * (ns - 1); }

    /// Column of x_min (the first output column).
    std::size_t output_col0() const { return top(); }
    bool in_output(std::size_t level, std::size_t col) const {
        return level < nt && col >= output_col0() && col < output_col0() + nx;
    }
};

namespace detail {
inline std::size_t checked_count(double extent, double step, const char* what) {
    const double r = extent / step;
    const double n = std::round(r);
    if (std::abs(r - n) > 1e-8 * std::max(1.0, n))
        throw ConfigError(std::string("build_grid: step does not divide ") + what);
    return static_cast<std::size_t>(n);
}
}  // namespace detail

inline CharacteristicGrid build_grid(double t_max, double x_min, double x_max, double step, double s_max) {
    if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("build_grid: step must be > 0");
    if (!(t_max > 0.0)) throw ConfigError("build_grid: t_max must be > 0");
    if (!(x_max > x_min)) throw ConfigError("build_grid: need x_max > x_min");
    if (!(s_max >= t_max)) throw ConfigError("build_grid: s_max must be >= t_max");
    CharacteristicGrid g;
    g.step = step;
    g.nt = detail::checked_count(t_max, step, "t_max") + 1;
    g.ns = detail::checked_count(s_max, step, "s_max") + 1;
    g.nx = detail::checked_count(x_max - x_min, step, "x extent") + 1;
    g.t_max = static_cast<double>(g.nt - 1) * step;
    g.s_max = static_cast<double>(g.ns - 1) * step;
    g.x_min = x_min;
    g.x_max = x_min + static_cast<double>(g.nx - 1) * step;
    if (g.ns < 4) throw ConfigError("build_grid: need at least 4 levels up to s_max");
    return g;
}

/// One value per stored lattice node.
class LatticeField {
public:
    LatticeField() = default;
    explicit LatticeField(const CharacteristicGrid& grid, double fill = 0.0) : data_(grid.node_count(), fill) {}

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    std::size_t size() const { return data_.size(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

private:
    std::vector<double> data_;
};

enum class QuadratureRule { Trapezoid, Cubic };

/// Integrates backwards along one lattice line.
///
/// `nodes` lists node indices for consecutive levels lo..top (nodes[0] at level lo).
/// On return out[nodes[m]] = top_value - integral of f from level lo+m to the top level.
/// The cubic rule fits each interval with the four nodes starting at the interval,
/// shifted down only near the top, so a node's value never uses f below its own level
/// unless it sits within three levels of the top.
inline void integrate_from_top(std::span<const std::size_t> nodes, std::span<const double> f, double step,
                               double top_value, QuadratureRule rule, std::span<double> out) {
    const std::size_t n = nodes.size();
    if (n == 0) return;
    out[nodes[n - 1]] = top_value;
    double acc = top_value;
    const double h24 = step / 24.0;
    for (std::size_t m = n - 1; m-- > 0;) {
        double q;
        if (rule == QuadratureRule::Trapezoid || n < 4) {
            q = 0.5 * step * (f[nodes[m]] + f[nodes[m + 1]]);
        } else {
            const std::size_t j = std::min(m, n - 4);
            const double f0 = f[nodes[j]], f1 = f[nodes[j + 1]], f2 = f[nodes[j + 2]], f3 = f[nodes[j + 3]];
            switch (m - j) {
                case 0: q = h24 * (9.0 * f0 + 19.0 * f1 - 5.0 * f2 + f3); break;
                case 1: q = h24 * (-f0 + 13.0 * f1 + 13.0 * f2 - f3); break;
                default: q = h24 * (f0 - 5.0 * f1 + 19.0 * f2 + 9.0 * f3); break;
            }
        }
        acc -= q;
        out[nodes[m]] = acc;
    }
}

/// Node lists for the three line families of the lattice.
///
/// Right-moving characteristics (s, x + t - s) carry v1, left-moving ones
/// (s, x - (t - s)) carry v2, vertical lines carry h.
class LineTable {
public:
    explicit LineTable(const CharacteristicGrid& grid) : grid_(grid) {}

    template <class Fn>
    void for_each_v1_line(Fn&& fn) const {
        // key m = col + level; at level l the column is m - l
        const std::size_t top = grid_.top();
        std::vector<std::size_t> nodes;
        for (std::size_t m = top; m <= top + grid_.band_columns() - 1; ++m) {
            nodes.clear();
            for (std::size_t l = 0; l <= top; ++l) {
                if (m < l) break;
                const auto col = static_cast<std::ptrdiff_t>(m - l);
                if (grid_.contains(l, col)) nodes.push_back(grid_.index(l, static_cast<std::size_t>(col)));
                else if (!nodes.empty()) throw GridError("characteristic left the stored band");
            }
            if (!nodes.empty()) fn(std::span<const std::size_t>(nodes), m - top);
        }
    }

    template <class Fn>
    void for_each_v2_line(Fn&& fn) const {
        // key m = col - level + top; at level l the column is m - top + l
        const std::size_t top = grid_.top();
        std::vector<std::size_t> nodes;
        for (std::size_t m = 0; m + 1 <= grid_.band_columns(); ++m) {
            nodes.clear();
            for (std::size_t l = 0; l <= top; ++l) {
                const auto col = static_cast<std::ptrdiff_t>(m) - static_cast<std::ptrdiff_t>(top) +
                                 static_cast<std::ptrdiff_t>(l);
                if (grid_.contains(l, col)) nodes.push_back(grid_.index(l, static_cast<std::size_t>(col)));
                else if (!nodes.empty()) throw GridError("characteristic left the stored band");
            }
            if (!nodes.empty()) fn(std::span<const std::size_t>(nodes), m);
        }
    }

    template <class Fn>
    void for_each_vertical_line(Fn&& fn) const {
        const std::size_t top = grid_.top();
        std::vector<std::size_t> nodes;
        for (std::size_t c = 0; c < grid_.band_columns(); ++c) {
            nodes.clear();
            for (std::size_t l = 0; l <= top; ++l)
                if (grid_.contains(l, static_cast<std::ptrdiff_t>(c))) nodes.push_back(grid_.index(l, c));
            if (!nodes.empty()) fn(std::span<const std::size_t>(nodes), c);
        }
    }

private:
    CharacteristicGrid grid_;
};

}  // namespace nlwave
