// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "osclab/signals.hpp"
#include "osclab/sublevel.hpp"

using namespace osclab;

namespace {

const Region2D kUnitSquare = Region2D::box({0.0, 0.0}, 0.5, 0.5);

ProfileTuple strip_profile() {
    return {[](double t) { return cplx{t, 0.0}; }, zero_profile(), zero_profile(), zero_profile()};
}

ProfileTuple zeros() { return {zero_profile(), zero_profile(), zero_profile(), zero_profile()}; }

ProfileTuple random_profiles(std::uint64_t seed) {
    ProfileTuple F;
    for (int j = 0; j < 4; ++j) {
        auto f = std::make_shared<FourierFunction1D>(synth_bandlimited(6.0, Band::Lowpass, derive_seed(seed, j), Interval{-1.5, 1.5}));
        F[j] = [f](double y) { return (*f)(y); };
    }
    return F;
}

SublevelEstimate synthetic(const std::vector<double>& eps, const std::function<double(double)>& law) {
    SublevelEstimate e;
    e.eps = eps;
    for (double x : eps) e.fraction.push_back(law(x));
    return e;
}

}  // namespace

TEST(Sublevel2D, StripIsExactlyLinear) {
    const auto sys = linear_system();  // phi_1 = x1
    const auto eps = default_eps_grid();
    const auto est = sublevel_series_2d(sys, SublevelExpr::QuadSum, strip_profile(), eps, kUnitSquare, 4096);
    for (std::size_t i = 0; i < eps.size(); ++i) {
        // midpoints (j + 1/2)/n with |.| < eps: exactly 2 eps n columns when eps n is an integer
        const double n_eps = eps[i] * 4096;
        const double expected = n_eps >= 1.0 ? std::min(2.0 * eps[i], 1.0) : 0.0;
        EXPECT_DOUBLE_EQ(est.fraction[i], expected) << eps[i];
    }
    const auto fit = fit_power_law(est);
    EXPECT_NEAR(fit.tau, 1.0, 0.05);
    EXPECT_EQ(fit.excluded_points, 2u);
}

TEST(Sublevel2D, ZeroTupleAndMask) {
    const auto sys = curved_system();
    const auto region = Region2D::of(sys);
    for (double e : {1e-6, 0.1, 3.0}) {
        EXPECT_EQ(measure_sublevel_2d(sys, SublevelExpr::QuadSum, zeros(), e, region, 64), 1.0);
        SublevelOptions o;
        o.mask = true;
        EXPECT_EQ(measure_sublevel_2d(sys, SublevelExpr::QuadSum, zeros(), e, region, 64, o), 0.0);
    }
}

TEST(Sublevel2D, MaskKeepsOnlyLargeTuples) {
    // F = (1, -1, 0, 0): sum vanishes everywhere, |F o Phi| = 2 passes the mask
    const auto sys = curved_system();
    ProfileTuple F{[](double) { return cplx{1.0, 0.0}; }, [](double) { return cplx{-1.0, 0.0}; }, zero_profile(), zero_profile()};
    SublevelOptions o;
    o.mask = true;
    EXPECT_EQ(measure_sublevel_2d(sys, SublevelExpr::QuadSum, F, 1e-3, Region2D::of(sys), 64, o), 1.0);
    o.mask_threshold = 2.5;
    EXPECT_EQ(measure_sublevel_2d(sys, SublevelExpr::QuadSum, F, 1e-3, Region2D::of(sys), 64, o), 0.0);
}

TEST(Sublevel2D, ExpressionsAgreeWithDirectFormulas) {
    const auto sys = curved_system();
    const auto F = random_profiles(4);
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const Point2 x{rng.uniform(-0.35, 0.35), rng.uniform(-0.35, 0.35)};
        cplx q{}, c{}, a{}, b{};
        for (int j = 0; j < 4; ++j) {
            const cplx v = F[j](sys.phases[j].value(x));
            const auto g = sys.phases[j].gradient(x);
            q += v;
            c += v * g[1];
            a += v * g[0];
            b += v * g[1];
        }
        EXPECT_NEAR(sublevel_value(sys, SublevelExpr::QuadSum, F, x), std::abs(q), 1e-13);
        EXPECT_NEAR(sublevel_value(sys, SublevelExpr::CoeffSum, F, x), std::abs(c), 1e-13);
        EXPECT_NEAR(sublevel_value(sys, SublevelExpr::VectorSum, F, x), std::sqrt(std::norm(a) + std::norm(b)), 1e-13);
    }
}

TEST(Sublevel2D, UndefinedPointsAreNeverMembers) {
    const auto sys = linear_system();
    ProfileTuple F = zeros();
    F[0] = [](double y) { return y > 0.0 ? cplx{std::nan(""), 0.0} : cplx{}; };
    const auto est = sublevel_series_2d(sys, SublevelExpr::QuadSum, F, {1.0}, kUnitSquare, 100);
    EXPECT_DOUBLE_EQ(est.fraction[0], 0.5);
    EXPECT_DOUBLE_EQ(est.undefined_fraction, 0.5);
}

TEST(Sublevel2D, LowerBoundSlot) {
    const auto sys = linear_system();
    ProfileTuple F = zeros();
    F[2] = [](double y) { return cplx{y, 0.0}; };  // phi_3 = x1 + x2
    SublevelOptions o;
    o.lower_bound_slot = 2;
    o.lower_bound = 0.5;
    const double with = measure_sublevel_2d(sys, SublevelExpr::CoeffSum, F, 10.0, kUnitSquare, 200, o);
    // |x1 + x2| >= 1/2 on the unit square: two corner triangles of area 1/8 each
    EXPECT_NEAR(with, 0.25, 0.01);
}

TEST(Sublevel2D, MonotoneInEpsAndBounded) {
    for (const auto& sys : {linear_system(), curved_system()}) {
        for (auto expr : {SublevelExpr::VectorSum, SublevelExpr::CoeffSum, SublevelExpr::QuadSum}) {
            const auto est = sublevel_series_2d(sys, expr, random_profiles(9), default_eps_grid(0, 14), Region2D::of(sys), 128);
            for (std::size_t i = 0; i < est.fraction.size(); ++i) {
                EXPECT_GE(est.fraction[i], 0.0);
                EXPECT_LE(est.fraction[i], 1.0);
                // eps decreases along the default grid
                if (i > 0) EXPECT_LE(est.fraction[i], est.fraction[i - 1]) << expr_name(expr);
            }
        }
    }
}

TEST(Sublevel2D, RefinementWithinTwiceTheBoundaryFraction) {
    const auto sys = curved_system();
    const auto F = random_profiles(21);
    SublevelOptions o;
    o.record_boundary = true;
    const auto eps = std::vector<double>{0.5, 0.25, 0.125, 0.0625};
    for (int n : {64, 128, 256}) {
        const auto a = sublevel_series_2d(sys, SublevelExpr::CoeffSum, F, eps, Region2D::of(sys), n, o);
        const auto b = sublevel_series_2d(sys, SublevelExpr::CoeffSum, F, eps, Region2D::of(sys), 2 * n, o);
        for (std::size_t i = 0; i < eps.size(); ++i)
            EXPECT_LE(std::abs(a.fraction[i] - b.fraction[i]), 2.0 * a.boundary_fraction[i]) << n << " " << eps[i];
    }
}

TEST(Sublevel2D, ThreadCountDoesNotMatter) {
    const auto sys = curved_system();
    const auto F = random_profiles(2);
    const unsigned saved = worker_threads();
    set_worker_threads(1);
    const auto a = sublevel_series_2d(sys, SublevelExpr::VectorSum, F, default_eps_grid(), Region2D::of(sys), 200);
    set_worker_threads(6);
    const auto b = sublevel_series_2d(sys, SublevelExpr::VectorSum, F, default_eps_grid(), Region2D::of(sys), 200);
    set_worker_threads(saved);
    EXPECT_EQ(a.fraction, b.fraction);
}

TEST(Sublevel3D, ConstantTripleBelowMinimumIsEmpty) {
    const auto sys = curved_system();
    const LiftedTriple one{[](double, double) { return 1.0; }, [](double, double) { return 1.0; }, [](double, double) { return 1.0; }};
    double mn = std::numeric_limits<double>::infinity();
    for (const auto& x : disc_grid(sys.ball.center, sys.ball.radius, 401)) {
        double a = 0.0, b = 0.0;
        for (int j = 0; j < 3; ++j) {
            const auto g = sys.phases[j].gradient(x);
            a += g[0];
            b += g[1];
        }
        mn = std::min(mn, std::hypot(a, b));
    }
    ASSERT_GT(mn, 0.0);
    const Region3D r{Region2D::of(sys), 0.25, 1.0, false};
    EXPECT_EQ(measure_sublevel_3d(sys, one, 0.99 * mn, r, 96, 8), 0.0);
    EXPECT_GT(measure_sublevel_3d(sys, one, 1.2 * mn, r, 96, 8), 0.0);
}

TEST(Sublevel3D, ZeroPlaneMustBeRequested) {
    const auto sys = curved_system();
    const LiftedTriple one{[](double, double) { return 1.0; }, [](double, double) { return 1.0; }, [](double, double) { return 1.0; }};
    EXPECT_THROW(measure_sublevel_3d(sys, one, 0.1, Region3D{Region2D::of(sys), -1.0, 1.0, false}, 16, 4), GuardError);
    EXPECT_NO_THROW(measure_sublevel_3d(sys, one, 0.1, Region3D{Region2D::of(sys), -1.0, 1.0, true}, 16, 4));
}

TEST(Sublevel3D, VolumeScalesWithTheSInterval) {
    // profiles homogeneous of degree 0 in the lifted variable: the set is a cone in s, so its
    // volume over B x [-r, r] is proportional to r
    const auto sys = curved_system();
    LiftedTriple f;
    for (int j = 0; j < 3; ++j)
        f[j] = [j](double y, double t) { return std::cos(3.0 * y + j) + (t > 0.0 ? 0.4 : -0.3) * (j + 1); };
    const double eps = 0.2;
    const auto full = sublevel_series_3d(sys, f, {eps}, Region3D{Region2D::of(sys), -1.0, 1.0, true}, 128, 32);
    const auto half = sublevel_series_3d(sys, f, {eps}, Region3D{Region2D::of(sys), -0.5, 0.5, true}, 128, 32);
    ASSERT_GT(full.absolute(0), 0.0);
    const double ratio = half.absolute(0) / full.absolute(0);
    EXPECT_GE(ratio, 0.4);
    EXPECT_LE(ratio, 0.6);
}

TEST(Sublevel3D, MonotoneInEps) {
    const auto sys = curved_system();
    LiftedTriple f;
    for (int j = 0; j < 3; ++j) f[j] = [j](double y, double t) { return std::sin(2.0 * y - j) + t; };
    const auto est = sublevel_series_3d(sys, f, default_eps_grid(0, 10), Region3D{Region2D::of(sys), 0.1, 1.0, false}, 64, 16);
    for (std::size_t i = 1; i < est.fraction.size(); ++i) EXPECT_LE(est.fraction[i], est.fraction[i - 1]);
}

TEST(PowerFit, SyntheticHalfPower) {
    const auto fit = fit_power_law(synthetic(default_eps_grid(), [](double e) { return std::sqrt(e); }));
    EXPECT_NEAR(fit.tau, 0.5, 1e-12);
    EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
    EXPECT_NEAR(fit.prefactor, 1.0, 1e-12);
}

TEST(PowerFit, ConstantSeries) {
    const auto fit = fit_power_law(synthetic(default_eps_grid(), [](double) { return 0.3; }));
    EXPECT_NEAR(fit.tau, 0.0, 1e-12);
}

TEST(PowerFit, ScaleEquivariant) {
    const auto base = synthetic(default_eps_grid(), [](double e) { return 0.2 * std::pow(e, 0.37) * (1.0 + 0.1 * std::sin(1.0 / e)); });
    auto scaled = base;
    for (auto& f : scaled.fraction) f *= 7.0;
    const auto a = fit_power_law(base), b = fit_power_law(scaled);
    EXPECT_NEAR(a.tau, b.tau, 1e-12);
    EXPECT_NEAR(b.prefactor / a.prefactor, 7.0, 1e-9);
}

TEST(PowerFit, RefusesWithFewerThanFourPoints) {
    auto est = synthetic({0.5, 0.25, 0.125, 0.0625, 0.03125}, [](double e) { return e; });
    est.fraction[3] = est.fraction[4] = 0.0;
    try {
        fit_power_law(est);
        FAIL();
    } catch (const FitRefused& e) {
        EXPECT_NE(std::string(e.what()).find("nonzero"), std::string::npos);
    }
}
