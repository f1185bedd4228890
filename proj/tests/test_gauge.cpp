#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "nlwave/gauge.hpp"

using namespace nlwave;

namespace {

double oracle_pert(double delta, double k, double t) {
    return std::expm1(-delta * std::pow(1.0 + t, 1.0 - k) / (k - 1.0));
}

// (1+t) int_t^inf exp(-int_t^s b) (1+s)^{-2} ds - 1 for b = c (1+t)^{-2}, closed form via w = 1/(1+s)
double oracle_scaleinv2(double c, double t) {
    const double w = 1.0 / (1.0 + t);
    return -std::expm1(-c * w) / (c * w) - 1.0;
}

double max_h_error(const AuxTriple& V, const std::function<double(double)>& exact) {
    const auto& g = V.grid;
    double err = 0;
    for (std::size_t l = 0; l < g.nt; ++l)
        for (std::size_t c = g.output_col0(); c < g.output_col0() + g.nx; ++c)
            err = std::max(err, std::abs(V.h[g.index(l, c)] - exact(g.t(l))));
    return err;
}

}  // namespace

TEST(TailBound, WorkedValueAndLimits) {
    auto spec = make_damping(Family::Perturbation, 0.1, 2.0, PerturbationProfile::time_only());
    EXPECT_NEAR(tail_bound(spec, 99.0, 0.5), 7.5166666666666667e-6, 1e-15);
    auto zero = make_damping(Family::Perturbation, 0.0, 2.0, PerturbationProfile::time_only());
    EXPECT_EQ(tail_bound(zero, 99.0, 0.5), 0.0);
    const double b1 = tail_bound(spec, 10, 0.5), b2 = tail_bound(spec, 100, 0.5), b3 = tail_bound(spec, 1000, 0.5);
    EXPECT_GT(b1, b2);
    EXPECT_GT(b2, b3);
    EXPECT_LT(b3, 1e-6);
    EXPECT_THROW(tail_bound(spec, 0.0, 0.5), ConfigError);
}

TEST(TailBound, FamilyTerms) {
    auto s2 = make_damping(Family::ScaleInv2, 0.1, 2.0, PerturbationProfile::time_only());
    EXPECT_NEAR(tail_bound(s2, 99.0, 0.5), 0.1 * (0.5 / (3e6) + 2 * 1.5 / (2e4)), 1e-15);
    auto mu = make_damping(Family::ScaleInvMu, 0.1, 2.0, PerturbationProfile::time_only(), 1.0);
    EXPECT_NEAR(tail_bound(mu, 99.0, 0.5), 0.1 * (0.5 / (3e6) + 1.5 / (2e4)) + 0.5 / (2e4), 1e-15);
}

TEST(PicardStep, ZeroDeltaGivesZero) {
    auto g = build_grid(1.0, -1.0, 1.0, 0.1, 1.0);
    AuxTriple prev(g);
    for (std::size_t i = 0; i < prev.h.size(); ++i) {
        prev.h[i] = 0.1 * std::sin(double(i));
        prev.v1[i] = 0.05;
    }
    auto spec = make_damping(Family::Perturbation, 0.0, 2.0, PerturbationProfile::cosine(1.0));
    auto next = picard_step(prev, spec, g, Variant::Lemma11);
    for (std::size_t i = 0; i < next.h.size(); ++i) {
        EXPECT_EQ(next.v1[i], 0.0);
        EXPECT_EQ(next.v2[i], 0.0);
        EXPECT_EQ(next.h[i], 0.0);
        EXPECT_EQ(next.dh[i], 0.0);
    }
    auto mu = make_damping(Family::ScaleInvMu, 0.0, 2.0, PerturbationProfile::zero(), 1.0);
    next = picard_step(AuxTriple(g), mu, g, Variant::Lemma13);
    for (std::size_t i = 0; i < next.h.size(); ++i) EXPECT_EQ(next.h[i] + next.v1[i] + next.v2[i], 0.0);
}

TEST(PicardStep, FirstIterateIsDampingDifference) {
    auto spec = make_damping(Family::Perturbation, 0.1, 2.0, PerturbationProfile::time_only());
    auto g = build_grid(2.0, -1.0, 1.0, 0.05, 4.0);
    auto next = picard_step(AuxTriple(g), spec, g, Variant::Lemma11, {Closure::Zero, QuadratureRule::Cubic});
    const double aS = 0.1 / std::pow(1.0 + g.s_max, 2);
    for (std::size_t l = 0; l < g.ns; ++l)
        for (std::size_t c = g.first_col(l); c <= g.last_col(l); ++c) {
            const double expect = 0.1 / std::pow(1.0 + g.t(l), 2) - aS;
            EXPECT_NEAR(next.v1[g.index(l, c)], expect, 2e-6);
            EXPECT_NEAR(next.v2[g.index(l, c)], expect, 2e-6);
        }
}

TEST(PicardStep, VariantMustMatchFamily) {
    auto spec = make_damping(Family::ScaleInv2, 0.1, 2.0, PerturbationProfile::time_only());
    auto g = build_grid(1.0, -1.0, 1.0, 0.1, 1.0);
    EXPECT_THROW(picard_step(AuxTriple(g), spec, g, Variant::Lemma11), ConfigError);
}

TEST(FarField, ScaleInv2ClosureMatchesClosedForm) {
    auto spec = make_damping(Family::ScaleInv2, 0.05, 2.0, PerturbationProfile::time_only());
    for (double s : {0.0, 2.0, 30.0}) {
        auto st = far_field_state(spec, s);
        EXPECT_NEAR(st.h, oracle_scaleinv2(0.05, s), 1e-13);
        // h_t by centered difference of the closed form
        const double e = 1e-4;
        const double ht = (oracle_scaleinv2(0.05, s + e) - oracle_scaleinv2(0.05, s - std::min(e, s + 0.5))) /
                          (e + std::min(e, s + 0.5));
        EXPECT_NEAR(st.v, ht, 1e-8);
    }
}

TEST(ConstructH, TimeOnlyOracle) {
    auto spec = make_damping(Family::Perturbation, 0.1, 2.0, PerturbationProfile::time_only());
    auto g = build_grid(2.0, -1.0, 1.0, 0.05, 2.0);
    auto res = construct_h(spec, g);
    EXPECT_LT(res.report.contraction_r, 1.0);
    EXPECT_TRUE(res.report.in_K_theta);
    EXPECT_LT(max_h_error(res.triple, [](double t) { return oracle_pert(0.1, 2.0, t); }), 2e-6);
    EXPECT_NEAR(res.triple.h[g.index(0, g.output_col0())], -0.0951626, 1e-6);
    EXPECT_LE(res.report.final_update_norm, 1e-8);
}

TEST(ConstructH, ZeroDeltaGaugesPerFamily) {
    auto g = build_grid(1.0, -1.0, 1.0, 0.1, 1.0);
    for (auto fam : {Family::Perturbation, Family::ScaleInv2, Family::ScaleInvMu}) {
        auto spec = make_damping(fam, 0.0, 2.0, PerturbationProfile::time_only(), 1.5);
        auto res = construct_h(spec, g);
        EXPECT_EQ(res.report.iterations, 1u);
        for (std::size_t l = 0; l < g.ns; ++l) {
            const double t = g.t(l);
            const double expect = fam == Family::Perturbation ? 1.0 : fam == Family::ScaleInv2 ? 1.0 + t : std::pow(1.0 + t, 1.5);
            const std::size_t i = g.index(l, g.output_col0());
            EXPECT_DOUBLE_EQ(res.gauge.g[i], expect);
            EXPECT_EQ(res.triple.h[i], 0.0);
        }
    }
}

TEST(ConstructH, ScaleInv2Oracle) {
    auto spec = make_damping(Family::ScaleInv2, 0.05, 2.0, PerturbationProfile::time_only());
    auto g = build_grid(2.0, -1.0, 1.0, 0.05, 2.0);
    auto res = construct_h(spec, g);
    EXPECT_LT(max_h_error(res.triple, [](double t) { return oracle_scaleinv2(0.05, t); }), 1e-6);
}

TEST(ConstructH, ScaleInvMuOracle) {
    auto spec = make_damping(Family::ScaleInvMu, 0.05, 2.0, PerturbationProfile::time_only(), 1.0);
    auto g = build_grid(2.0, -1.0, 1.0, 0.05, 2.0);
    auto res = construct_h(spec, g);
    EXPECT_GE(res.report.lambda, 2.0);
    EXPECT_LT(max_h_error(res.triple, [](double t) { return oracle_pert(0.05, 2.0, t); }), 1e-6);
}

TEST(ConstructH, OracleErrorShrinksUnderRefinement) {
    auto spec = make_damping(Family::Perturbation, 0.1, 2.0, PerturbationProfile::time_only());
    double prev = 1.0;
    for (double step : {0.1, 0.05, 0.025}) {
        auto g = build_grid(2.0, -0.5, 0.5, step, 2.0);
        auto res = construct_h(spec, g);
        const double e = max_h_error(res.triple, [](double t) { return oracle_pert(0.1, 2.0, t); });
        EXPECT_LT(e, prev / 4);
        prev = e;
    }
}

TEST(ConstructH, FixedPointProperty) {
    auto spec = make_damping(Family::Perturbation, 0.1, 2.0, PerturbationProfile::cosine(2.0));
    auto g = build_grid(1.0, -1.0, 1.0, 0.05, 3.0);
    auto res = construct_h(spec, g);
    auto again = picard_step(res.triple, spec, g, Variant::Lemma11);
    EXPECT_LE(y_norm_diff(again, res.triple, spec.k, 1.0), 2e-8);
}

TEST(ConstructH, CosineTranslationEquivariance) {
    const double omega = std::numbers::pi;  // period 2
    auto spec = make_damping(Family::Perturbation, 0.1, 2.0, PerturbationProfile::cosine(omega));
    auto g = build_grid(1.0, -2.0, 2.0, 0.05, 3.0);
    auto res = construct_h(spec, g);
    const std::size_t shift = 40;
    for (std::size_t l = 0; l < g.nt; ++l)
        for (std::size_t c = g.output_col0(); c + shift < g.output_col0() + g.nx; ++c)
            EXPECT_NEAR(res.triple.h[g.index(l, c)], res.triple.h[g.index(l, c + shift)], 1e-8);
}

TEST(ConstructH, DerivativeGridsMatchDifferences) {
    auto spec = make_damping(Family::Perturbation, 0.1, 2.0, PerturbationProfile::cosine(2.0));
    double prev = 0;
    for (double step : {0.05, 0.025}) {
        auto g = build_grid(1.0, -1.0, 1.0, step, 3.0);
        auto res = construct_h(spec, g);
        const auto& V = res.triple;
        double err = 0, errv = 0;
        for (std::size_t l = 0; l < g.nt; ++l)
            for (std::size_t c = g.output_col0() + 1; c + 1 < g.output_col0() + g.nx; ++c) {
                const double fd = (V.h[g.index(l, c + 1)] - V.h[g.index(l, c - 1)]) / (2 * step);
                err = std::max(err, std::abs(fd - V.dh[g.index(l, c)]));
                const double fdv = (V.v1[g.index(l, c + 1)] - V.v1[g.index(l, c - 1)]) / (2 * step);
                errv = std::max(errv, std::abs(fdv - V.dv1[g.index(l, c)]));
                // dh = (v1 - v2)/2 holds for the continuous system
                EXPECT_NEAR(V.dh[g.index(l, c)], 0.5 * (V.v1[g.index(l, c)] - V.v2[g.index(l, c)]), 1e-4);
            }
        EXPECT_LT(err, 1e-3);
        EXPECT_LT(errv, 1e-3);
        if (prev > 0) { EXPECT_GT(prev / err, 3.0); }
        prev = err;
    }
}

TEST(ConstructH, LargeDeltaFails) {
    auto spec = make_damping(Family::Perturbation, 5.0, 2.0, PerturbationProfile::time_only());
    auto g = build_grid(1.0, -1.0, 1.0, 0.05, 1.0);
    EXPECT_THROW(construct_h(spec, g), GaugeFailure);
}

TEST(Residual, ZeroCasesVanish) {
    auto g = build_grid(1.0, -1.0, 1.0, 0.1, 1.0);
    auto p = make_damping(Family::Perturbation, 0.0, 2.0, PerturbationProfile::time_only());
    EXPECT_EQ(residual(construct_h(p, g).triple, p, Variant::Lemma11).sup, 0.0);
    auto m = make_damping(Family::ScaleInvMu, 0.0, 2.0, PerturbationProfile::zero(), 0.5);
    EXPECT_EQ(residual(construct_h(m, g).triple, m, Variant::Lemma13).sup, 0.0);
}

TEST(Residual, SecondOrder) {
    auto spec = make_damping(Family::Perturbation, 0.1, 2.0, PerturbationProfile::time_only());
    Window w{0.1, 1.9};
    double prev = 0;
    for (double step : {0.05, 0.025, 0.0125}) {
        auto g = build_grid(2.0, -0.25, 0.25, step, 2.0);
        auto r = residual(construct_h(spec, g).triple, spec, Variant::Lemma11, w);
        if (prev > 0) {
            EXPECT_GT(prev / r.sup, 3.5);
            EXPECT_LT(prev / r.sup, 4.5);
        }
        prev = r.sup;
    }
}

TEST(GaugeEquation, BothScaleInvariantGaugesSolveIt) {
    auto g = build_grid(2.0, -1.0, 1.0, 0.025, 2.0);
    auto s2 = make_damping(Family::ScaleInv2, 0.05, 2.5, PerturbationProfile::time_only());
    auto mu = make_damping(Family::ScaleInvMu, 0.05, 2.5, PerturbationProfile::time_only(), 2.0);
    auto r2 = construct_h(s2, g), rm = construct_h(mu, g);
    EXPECT_LT(gauge_equation_residual(r2.gauge, s2).sup, 1e-4);
    EXPECT_LT(gauge_equation_residual(rm.gauge, mu).sup, 1e-4);
    for (std::size_t i = 0; i < r2.gauge.g.size(); ++i) {
        EXPECT_GT(r2.gauge.g[i], 0.0);
        EXPECT_GT(rm.gauge.g[i], 0.0);
    }
}

TEST(VerifyDecay, Cases) {
    auto g = build_grid(2.0, -1.0, 1.0, 0.05, 2.0);
    auto zero = make_damping(Family::Perturbation, 0.0, 2.0, PerturbationProfile::time_only());
    auto d0 = verify_decay(construct_h(zero, g).triple, 0.5, 2.0);
    EXPECT_TRUE(d0.pass);
    EXPECT_EQ(d0.derivative_C, 0.0);
    auto spec = make_damping(Family::Perturbation, 0.1, 2.0, PerturbationProfile::time_only());
    auto d = verify_decay(construct_h(spec, g).triple, 0.5, 2.0);
    EXPECT_TRUE(d.pass);
    EXPECT_NEAR(d.h_weighted_sup, 0.1, 0.01);
}

TEST(AutoSMax, PolicyAndBudget) {
    auto t = make_damping(Family::Perturbation, 0.1, 2.0, PerturbationProfile::time_only());
    EXPECT_DOUBLE_EQ(auto_s_max(t, 5.0, 5.0, 0.025, 0.5, 1e-9), 5.0);
    auto c = make_damping(Family::Perturbation, 0.1, 2.0, PerturbationProfile::cosine(1.0));
    const double s = auto_s_max(c, 1.0, 2.0, 0.5, 0.5, 1e-5);
    EXPECT_LE(uncaptured_tail_bound(c, s, 0.5), 1e-5);
    EXPECT_GT(uncaptured_tail_bound(c, s - 0.5, 0.5), 1e-5);
    EXPECT_THROW(auto_s_max(c, 5.0, 5.0, 0.025, 0.5, 1e-9), ConfigError);
}

TEST(Bracket, FlipsWithinFactorTwo) {
    auto spec = make_damping(Family::Perturbation, 0.1, 2.0, PerturbationProfile::time_only());
    auto g = build_grid(1.0, -0.5, 0.5, 0.05, 1.0);
    auto br = bracket_delta0(spec, g, {}, 0.1, 5.0, 2.0);
    EXPECT_LE(br.delta_fail / br.delta_pass, 2.0);
    EXPECT_LT(br.delta_pass, br.delta_fail);
}
