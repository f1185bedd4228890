#pragma once

// Damping coefficients a(t,x) for u_tt - u_xx + a(t,x) u_t = |u|^p.
//
// Three families are supported:
//   Perturbation  a = b
//   ScaleInv2     a = 2/(1+t) + b
//   ScaleInvMu    a = mu/(1+t) + b
// where b is a perturbation profile obeying |d_t^i d_x^j b| <= delta (1+t)^{-k-i}.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>

#include "nlwave/errors.hpp"

namespace nlwave {

enum class Family { Perturbation, ScaleInv2, ScaleInvMu };
enum class ProfileKind { Zero, SeparableCosine, TimeOnlyPower, Custom };

inline std::string to_string(Family f) {
    switch (f) {
        case Family::Perturbation: return "perturbation";
        case Family::ScaleInv2: return "scaleinv2";
        case Family::ScaleInvMu: return "scaleinvmu";
    }
    return "?";
}

inline std::string to_string(ProfileKind k) {
    switch (k) {
        case ProfileKind::Zero: return "zero";
        case ProfileKind::SeparableCosine: return "cosine";
        case ProfileKind::TimeOnlyPower: return "timeonly";
        case ProfileKind::Custom: return "custom";
    }
    return "?";
}

/// Value and partial derivatives of a profile at one point.
struct ProfileSample {
    double value = 0.0;
    double dt = 0.0;
    double dx = 0.0;
    double dtx = 0.0;
    double dtt = 0.0;
};

/// The perturbation b (or, for the Perturbation family, a itself).
///
/// Built-in kinds read delta and k from the owning DampingSpec:
///   SeparableCosine  b = delta (1+t)^{-k} cos(omega x)
///   TimeOnlyPower    b = delta (1+t)^{-k}
/// Custom profiles supply all derivatives explicitly. `custom_mean`, when set,
/// is the x-independent part of the custom profile, and `custom_x_independent`
/// declares that the mean is the whole profile.
struct PerturbationProfile {
    ProfileKind kind = ProfileKind::Zero;
    double omega = 1.0;
    std::function<ProfileSample(double, double)> custom;
    std::function<double(double)> custom_mean;
    bool custom_x_independent = false;

    static PerturbationProfile zero() { return {}; }
    static PerturbationProfile time_only() {
        PerturbationProfile p;
        p.kind = ProfileKind::TimeOnlyPower;
        return p;
    }
    static PerturbationProfile cosine(double omega) {
        PerturbationProfile p;
        p.kind = ProfileKind::SeparableCosine;
        p.omega = omega;
        return p;
    }
    static PerturbationProfile from_callable(std::function<ProfileSample(double, double)> fn,
                                             std::function<double(double)> mean = {},
                                             bool x_independent = false) {
        PerturbationProfile p;
        p.kind = ProfileKind::Custom;
        p.custom = std::move(fn);
        p.custom_mean = std::move(mean);
        p.custom_x_independent = x_independent;
        return p;
    }
};

struct DampingSpec {
    Family family = Family::Perturbation;
    double delta = 0.0;
    double k = 2.0;
    double mu = 2.0;
    PerturbationProfile profile;

    /// Throws ConfigError when an invariant is violated.
    void validate() const {
        if (!(delta >= 0.0) || !std::isfinite(delta)) throw ConfigError("damping: delta must be >= 0");
        if (!(k > 1.0) || !std::isfinite(k)) throw ConfigError("damping: k must be > 1");
        if (family == Family::ScaleInvMu) {
            if (!(mu > 0.0)) throw ConfigError("damping: mu must be > 0");
            if (!(k > mu)) throw ConfigError("damping: scaleinvmu requires k > max(1, mu)");
        }
        if (profile.kind == ProfileKind::SeparableCosine && !(profile.omega >= 0.0))
            throw ConfigError("damping: omega must be >= 0");
        if (profile.kind == ProfileKind::Custom && !profile.custom)
            throw ConfigError("damping: custom profile without evaluator");
    }

    /// Coefficient mu of the scale-invariant part (0 for Perturbation).
    double scale_coefficient() const {
        switch (family) {
            case Family::Perturbation: return 0.0;
            case Family::ScaleInv2: return 2.0;
            case Family::ScaleInvMu: return mu;
        }
        return 0.0;
    }
};

inline DampingSpec make_damping(Family family, double delta, double k, PerturbationProfile profile,
                                double mu = 2.0) {
    DampingSpec s;
    s.family = family;
    s.delta = delta;
    s.k = k;
    s.mu = mu;
    s.profile = std::move(profile);
    s.validate();
    return s;
}

/// Evaluates the perturbation profile b (a itself for the Perturbation family).
inline ProfileSample eval_perturbation(const DampingSpec& spec, double t, double x) {
    const auto& prof = spec.profile;
    switch (prof.kind) {
        case ProfileKind::Zero: return {};
        case ProfileKind::TimeOnlyPower: {
            if (spec.delta == 0.0) return {};
            const double w = std::pow(1.0 + t, -spec.k);
            const double s = 1.0 / (1.0 + t);
            ProfileSample r;
            r.value = spec.delta * w;
            r.dt = -spec.k * spec.delta * w * s;
            r.dtt = spec.k * (spec.k + 1.0) * spec.delta * w * s * s;
            return r;
        }
        case ProfileKind::SeparableCosine: {
            if (spec.delta == 0.0) return {};
            const double w = spec.delta * std::pow(1.0 + t, -spec.k);
            const double s = 1.0 / (1.0 + t);
            const double c = std::cos(prof.omega * x);
            const double sn = std::sin(prof.omega * x);
            ProfileSample r;
            r.value = w * c;
            r.dt = -spec.k * w * s * c;
            r.dx = -prof.omega * w * sn;
            r.dtx = spec.k * prof.omega * w * s * sn;
            r.dtt = spec.k * (spec.k + 1.0) * w * s * s * c;
            return r;
        }
        case ProfileKind::Custom: return prof.custom(t, x);
    }
    return {};
}

/// The x-independent part of the perturbation and whether it is the whole profile.
struct MeanComponent {
    std::function<double(double)> value;  // empty when the mean part is zero
    bool captures_profile = false;
};

inline MeanComponent mean_component(const DampingSpec& spec) {
    MeanComponent m;
    switch (spec.profile.kind) {
        case ProfileKind::Zero:
            m.captures_profile = true;
            break;
        case ProfileKind::TimeOnlyPower:
            if (spec.delta > 0.0) {
                const double d = spec.delta, k = spec.k;
                m.value = [d, k](double t) { return d * std::pow(1.0 + t, -k); };
            }
            m.captures_profile = true;
            break;
        case ProfileKind::SeparableCosine:
            // cos(omega x) has zero mean unless omega == 0
            if (spec.profile.omega == 0.0) {
                const double d = spec.delta, k = spec.k;
                if (d > 0.0) m.value = [d, k](double t) { return d * std::pow(1.0 + t, -k); };
                m.captures_profile = true;
            }
            break;
        case ProfileKind::Custom:
            m.value = spec.profile.custom_mean;
            m.captures_profile = spec.profile.custom_x_independent;
            break;
    }
    return m;
}

inline bool is_x_independent(const DampingSpec& spec) { return mean_component(spec).captures_profile; }

/// a(t,x) and the partials the gauge iteration needs.
struct DampingSample {
    double a = 0.0;
    double a_t = 0.0;
    double a_x = 0.0;
    double a_tx = 0.0;
};

inline DampingSample eval_damping(const DampingSpec& spec, double t, double x) {
    const ProfileSample b = eval_perturbation(spec, t, x);
    DampingSample r{b.value, b.dt, b.dx, b.dtx};
    const double m = spec.scale_coefficient();
    if (m != 0.0) {
        const double s = 1.0 / (1.0 + t);
        r.a += m * s;
        r.a_t -= m * s * s;
    }
    return r;
}

struct BoundReport {
    /// max over samples of |d_t^i d_x^j b| (1+t)^{k+i} / delta, indexed [2*i + j]
    std::array<double, 4> term_max{};
    double max_ratio = 0.0;
    /// Divide delta by this factor to restore the decay hypothesis with constant 1.
    double rescale = 1.0;
    bool pass = true;
    bool trivial = false;
};

/// Samples the decay hypothesis on [0,t_max] x [-x_max,x_max].
inline BoundReport certify_bound(const DampingSpec& spec, double t_max, double x_max, std::size_t n_samples,
                                 double tolerance = 1e-12) {
    if (n_samples < 2) throw ConfigError("certify_bound: need at least 2 samples per axis");
    BoundReport rep;
    if (spec.delta == 0.0 || spec.profile.kind == ProfileKind::Zero) {
        rep.trivial = true;
        return rep;
    }
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double t = t_max * static_cast<double>(i) / static_cast<double>(n_samples - 1);
        const double w0 = std::pow(1.0 + t, spec.k) / spec.delta;
        const double w1 = w0 * (1.0 + t);
        for (std::size_t j = 0; j < n_samples; ++j) {
            const double x = -x_max + 2.0 * x_max * static_cast<double>(j) / static_cast<double>(n_samples - 1);
            const ProfileSample b = eval_perturbation(spec, t, x);
            rep.term_max[0] = std::max(rep.term_max[0], std::abs(b.value) * w0);
            rep.term_max[1] = std::max(rep.term_max[1], std::abs(b.dx) * w0);
            rep.term_max[2] = std::max(rep.term_max[2], std::abs(b.dt) * w1);
            rep.term_max[3] = std::max(rep.term_max[3], std::abs(b.dtx) * w1);
        }
    }
    rep.max_ratio = *std::max_element(rep.term_max.begin(), rep.term_max.end());
    rep.rescale = std::max(1.0, rep.max_ratio);
    rep.pass = rep.max_ratio <= 1.0 + tolerance;
    return rep;
}

}  // namespace nlwave
