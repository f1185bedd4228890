#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "nlwave/damping.hpp"

using namespace nlwave;

TEST(EvalDamping, TimeOnlyAtOrigin) {
    auto spec = make_damping(Family::Perturbation, 0.1, 2.0, PerturbationProfile::time_only());
    auto d = eval_damping(spec, 0.0, 0.0);
    EXPECT_DOUBLE_EQ(d.a, 0.1);
    EXPECT_DOUBLE_EQ(d.a_t, -0.2);
    EXPECT_EQ(d.a_x, 0.0);
}

TEST(EvalDamping, ZeroDeltaPerFamily) {
    auto p = make_damping(Family::Perturbation, 0.0, 2.0, PerturbationProfile::time_only());
    auto d = eval_damping(p, 1.0, 5.0);
    EXPECT_EQ(d.a, 0.0);
    EXPECT_EQ(d.a_t, 0.0);
    EXPECT_EQ(d.a_x, 0.0);
    auto s2 = make_damping(Family::ScaleInv2, 0.0, 2.0, PerturbationProfile::cosine(1.0));
    d = eval_damping(s2, 1.0, 5.0);
    EXPECT_DOUBLE_EQ(d.a, 1.0);
    EXPECT_DOUBLE_EQ(d.a_t, -0.5);
    EXPECT_EQ(d.a_x, 0.0);
}

TEST(EvalDamping, CosineHandDerivative) {
    auto spec = make_damping(Family::Perturbation, 0.1, 2.0, PerturbationProfile::cosine(1.0));
    auto d = eval_damping(spec, 0.0, std::numbers::pi / 2);
    EXPECT_NEAR(d.a, 0.0, 1e-16);
    EXPECT_NEAR(d.a_t, 0.0, 1e-16);
    EXPECT_DOUBLE_EQ(d.a_x, -0.1);
}

TEST(EvalDamping, ScaleInvMuWithMuTwoMatchesScaleInv2) {
    auto s2 = make_damping(Family::ScaleInv2, 0.07, 3.0, PerturbationProfile::cosine(1.3));
    auto smu = make_damping(Family::ScaleInvMu, 0.07, 3.0, PerturbationProfile::cosine(1.3), 2.0);
    for (double t : {0.0, 0.4, 3.0, 17.0})
        for (double x : {-2.0, 0.1, 4.5}) {
            auto a = eval_damping(s2, t, x), b = eval_damping(smu, t, x);
            EXPECT_EQ(a.a, b.a);
            EXPECT_EQ(a.a_t, b.a_t);
            EXPECT_EQ(a.a_x, b.a_x);
            EXPECT_EQ(a.a_tx, b.a_tx);
        }
}

TEST(EvalDamping, DerivativesMatchRichardsonDifferences) {
    const double h = 1e-4;
    for (auto fam : {Family::Perturbation, Family::ScaleInv2, Family::ScaleInvMu}) {
        for (auto prof : {PerturbationProfile::time_only(), PerturbationProfile::cosine(1.7)}) {
            auto spec = make_damping(fam, 0.3, 2.5, prof, 1.5);
            for (double t : {0.0, 0.7, 4.0})
                for (double x : {-1.3, 0.2, 2.9}) {
                    auto a = [&](double tt, double xx) { return eval_damping(spec, tt, xx).a; };
                    auto ax = [&](double tt, double xx) { return eval_damping(spec, tt, xx).a_x; };
                    // one-sided at t = 0 to stay in the domain
                    const double tc = t + 2 * h;
                    auto central_t = [&](auto f, double hh) { return (f(tc + hh, x) - f(tc - hh, x)) / (2 * hh); };
                    auto central_x = [&](auto f, double hh) { return (f(t, x + hh) - f(t, x - hh)) / (2 * hh); };
                    auto rich = [](double d1, double d2) { return (4 * d2 - d1) / 3; };
                    const auto e = eval_damping(spec, tc, x), ex = eval_damping(spec, t, x);
                    const double dt = rich(central_t(a, 2 * h), central_t(a, h));
                    const double dx = rich(central_x(a, 2 * h), central_x(a, h));
                    const double dtx = rich(central_t(ax, 2 * h), central_t(ax, h));
                    EXPECT_NEAR(dt, e.a_t, 1e-6 * std::max(1.0, std::abs(e.a_t)));
                    EXPECT_NEAR(dx, ex.a_x, 1e-6 * std::max(1.0, std::abs(ex.a_x)));
                    EXPECT_NEAR(dtx, e.a_tx, 1e-6 * std::max(1.0, std::abs(e.a_tx)));
                }
        }
    }
}

TEST(Validate, RejectsBadParameters) {
    EXPECT_THROW(make_damping(Family::Perturbation, 0.1, 1.0, PerturbationProfile::time_only()), ConfigError);
    EXPECT_THROW(make_damping(Family::Perturbation, -0.1, 2.0, PerturbationProfile::time_only()), ConfigError);
    EXPECT_THROW(make_damping(Family::ScaleInvMu, 0.1, 2.0, PerturbationProfile::time_only(), 2.5), ConfigError);
    EXPECT_NO_THROW(make_damping(Family::ScaleInvMu, 0.1, 2.0, PerturbationProfile::time_only(), 1.0));
}

TEST(CertifyBound, TimeOnlyReportsRescaleK) {
    auto spec = make_damping(Family::Perturbation, 0.1, 2.0, PerturbationProfile::time_only());
    auto r = certify_bound(spec, 10.0, 5.0, 21);
    EXPECT_NEAR(r.term_max[0], 1.0, 1e-14);
    EXPECT_NEAR(r.term_max[2], 2.0, 1e-14);
    EXPECT_EQ(r.term_max[1], 0.0);
    EXPECT_NEAR(r.rescale, 2.0, 1e-14);
    EXPECT_FALSE(r.pass);
}

TEST(CertifyBound, ZeroProfileTriviallyPassesForEveryFamily) {
    for (auto fam : {Family::Perturbation, Family::ScaleInv2, Family::ScaleInvMu}) {
        auto spec = make_damping(fam, 0.0, 2.0, PerturbationProfile::zero(), 1.0);
        auto r = certify_bound(spec, 10.0, 5.0, 5);
        EXPECT_TRUE(r.pass);
        EXPECT_TRUE(r.trivial);
        EXPECT_EQ(r.max_ratio, 0.0);
    }
}

TEST(CertifyBound, CosineFactor) {
    for (double omega : {0.5, 2.0}) {
        auto spec = make_damping(Family::Perturbation, 0.05, 1.5, PerturbationProfile::cosine(omega));
        // dense x sampling hits cos = 1 and sin = 1 up to sampling error
        auto r = certify_bound(spec, 10.0, std::numbers::pi, 401);
        const double expect = std::max({1.0, omega, 1.5, 1.5 * omega});
        EXPECT_NEAR(r.rescale, expect, 1e-3 * expect);
        EXPECT_EQ(r.pass, expect <= 1.0);
    }
}

TEST(CertifyBound, NeedsTwoSamples) {
    auto spec = make_damping(Family::Perturbation, 0.1, 2.0, PerturbationProfile::time_only());
    EXPECT_THROW(certify_bound(spec, 1.0, 1.0, 1), ConfigError);
}
