// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "osclab/stationary.hpp"
#include "oracles.hpp"

using namespace osclab;

namespace {

std::set<Tuple4> strict_set(const InteractionTable& t) {
    std::set<Tuple4> s;
    for (const auto& e : t.tuples)
        if (e.in_ball) s.insert(e.m);
    return s;
}

std::set<Tuple4> slack_set(const InteractionTable& t) {
    std::set<Tuple4> s;
    for (const auto& e : t.tuples) s.insert(e.m);
    return s;
}

FourierFunction1D pure_exponential(double freq, double period) {
    const int k = static_cast<int>(std::lround(freq * period / kTwoPi));
    return FourierFunction1D(period, 0.0, k, {cplx{1.0, 0.0}});
}

}  // namespace

TEST(Interacting, ResolutionGuard) {
    EXPECT_THROW(enumerate_interacting(linear_system(), 16.0, 0.75, 3), GuardError);
    EXPECT_NO_THROW(enumerate_interacting(linear_system(), 16.0, 0.75, 4));
}

TEST(Interacting, MatchesNestedLoopOracle) {
    for (const auto& sys : {linear_system(), curved_system()}) {
        for (double lam : {16.0, 32.0}) {
            const auto t = enumerate_interacting(sys, lam, 0.75, 4);
            const auto strict = oracle::interacting_by_nested_loops(sys, lam, 0.75, 4, 16, sys.ball.radius);
            const auto slack = oracle::interacting_by_nested_loops(sys, lam, 0.75, 4, 16, sys.ball.outer_radius);
            EXPECT_EQ(strict_set(t), strict) << sys.name << " " << lam;
            EXPECT_EQ(slack_set(t), slack) << sys.name << " " << lam;
            EXPECT_EQ(t.strict_count, strict.size());
            EXPECT_GE(t.slack_count, t.strict_count);
        }
    }
}

TEST(Interacting, WitnessesSatisfyTheirTuples) {
    const auto sys = curved_system();
    const auto t = enumerate_interacting(sys, 64.0, 0.75, 4);
    for (const auto& e : t.tuples) {
        for (int j = 0; j < 4; ++j) ASSERT_TRUE(in_enlarged_cell(sys.phases[j].value(e.witness), e.m[j], t.cell));
        EXPECT_LE(std::hypot(e.witness.x1, e.witness.x2), sys.ball.outer_radius + 1e-12);
    }
}

TEST(Interacting, CountScalesLikeLambdaToTwoGamma) {
    const double gamma = 0.75, target = std::pow(2.0, 2.0 * gamma);
    for (const auto& sys : {linear_system(), curved_system()}) {
        std::vector<double> counts;
        for (double lam : {64.0, 128.0, 256.0, 512.0}) counts.push_back(static_cast<double>(enumerate_interacting(sys, lam, gamma, 4).strict_count));
        for (std::size_t i = 0; i + 1 < counts.size(); ++i) {
            const double ratio = counts[i + 1] / counts[i];
            EXPECT_GT(ratio, 0.7 * target) << sys.name << " step " << i;
            EXPECT_LT(ratio, 1.3 * target) << sys.name << " step " << i;
        }
    }
}

TEST(Interacting, TwoIndicesFixTheOtherTwoUpToBoundedAmbiguity) {
    // the spread of (m3, m4) over a fixed (m1, m2) is a geometric constant: it must not grow with lambda
    const auto sys = curved_system();
    std::vector<long> amb;
    for (double lam : {64.0, 128.0, 256.0, 512.0}) amb.push_back(enumerate_interacting(sys, lam, 0.75, 4).ambiguity);
    RecordProperty("ambiguity", std::to_string(amb.front()) + ".." + std::to_string(amb.back()));
    const long lo = *std::min_element(amb.begin(), amb.end()), hi = *std::max_element(amb.begin(), amb.end());
    EXPECT_GT(lo, 0);
    EXPECT_LE(hi - lo, 4);
}

TEST(Interacting, ParallelScanIsIdentical) {
    const auto sys = curved_system();
    const unsigned saved = worker_threads();
    set_worker_threads(1);
    const auto a = enumerate_interacting(sys, 128.0, 0.75, 4);
    set_worker_threads(5);
    const auto b = enumerate_interacting(sys, 128.0, 0.75, 4);
    set_worker_threads(saved);
    ASSERT_EQ(a.tuples.size(), b.tuples.size());
    for (std::size_t i = 0; i < a.tuples.size(); ++i) {
        EXPECT_EQ(a.tuples[i].m, b.tuples[i].m);
        EXPECT_EQ(a.tuples[i].witness.x1, b.tuples[i].witness.x1);
        EXPECT_EQ(a.tuples[i].witness.x2, b.tuples[i].witness.x2);
        EXPECT_EQ(a.tuples[i].in_ball, b.tuples[i].in_ball);
    }
}

TEST(Stationary, ConstructedCancellationIsStationary) {
    const auto sys = curved_system();
    const auto t = enumerate_interacting(sys, 128.0, 0.75, 4);
    auto f = random_alpha(t, 3);
    const auto strict = strict_tuples(t);
    const auto& e = strict.at(t.strict_count / 2);
    // fix alpha_1, alpha_2 and solve the 2x2 system for alpha_3, alpha_4
    Eigen::Matrix2d A;
    A << e.gradients[2][0], e.gradients[3][0], e.gradients[2][1], e.gradients[3][1];
    const double a1 = f.at(0, e.m[0]), a2 = f.at(1, e.m[1]);
    const Eigen::Vector2d rhs = -(a1 * Eigen::Vector2d(e.gradients[0][0], e.gradients[0][1]) +
                                  a2 * Eigen::Vector2d(e.gradients[1][0], e.gradients[1][1]));
    const Eigen::Vector2d sol = A.fullPivLu().solve(rhs);
    f.alpha[2][e.m[2]] = sol(0);
    f.alpha[3][e.m[3]] = sol(1);
    const auto v = combined_gradient(e, f);
    EXPECT_LT(std::hypot(v[0], v[1]), 1e-9 * t.lambda);
    const auto N = stationary_subset(t, f, default_ladder());
    bool found = false;
    for (const auto& n : N) found = found || n.m == e.m;
    EXPECT_TRUE(found);
}

TEST(Stationary, RandomAssignmentLeavesFewStationary) {
    const auto sys = curved_system();
    const auto t = enumerate_interacting(sys, 256.0, 0.75, 4);
    const auto f = random_alpha(t, 11);
    EXPECT_TRUE(f.violation().empty());
    const auto N = stationary_subset(t, f, default_ladder());
    const double frac = static_cast<double>(N.size()) / static_cast<double>(t.strict_count);
    RecordProperty("stationary_fraction", std::to_string(frac));
    EXPECT_LT(frac, 0.2);
}

TEST(Stationary, ThresholdMonotoneAndSubset) {
    const auto sys = curved_system();
    const auto t = enumerate_interacting(sys, 128.0, 0.75, 4);
    const auto f = random_alpha(t, 5);
    const auto p = default_ladder();
    EXPECT_TRUE(stationary_subset(t, f, p, 0.0).empty());
    const auto all = strict_set(t);
    std::set<Tuple4> prev;
    for (double scale : {0.5, 1.0, 2.0, 8.0}) {
        std::set<Tuple4> cur;
        for (const auto& e : stationary_subset(t, f, p, scale)) cur.insert(e.m);
        EXPECT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
        EXPECT_TRUE(std::includes(all.begin(), all.end(), cur.begin(), cur.end()));
        prev = cur;
    }
}

TEST(Stationary, MissingEntryIsAnError) {
    const auto t = enumerate_interacting(linear_system(), 32.0, 0.75, 4);
    auto f = random_alpha(t, 1);
    f.alpha[2].erase(f.alpha[2].begin());
    EXPECT_THROW(stationary_subset(t, f, default_ladder()), GuardError);
}

TEST(Adversarial, SingleTupleBecomesStationary) {
    const auto sys = curved_system();
    auto t = enumerate_interacting(sys, 64.0, 0.75, 4);
    const auto keep = strict_tuples(t).front();
    t.tuples = {keep};
    t.strict_count = t.slack_count = 1;
    const auto f = adversarial_alpha(t, 9);
    EXPECT_TRUE(f.violation().empty());
    EXPECT_EQ(stationary_subset(t, f, default_ladder()).size(), 1u);
}

TEST(Adversarial, BeatsRandomOnLinearByTenfold) {
    const auto sys = linear_system();
    const auto t = enumerate_interacting(sys, 256.0, 0.75, 4);
    const auto p = default_ladder();
    const auto adv = adversarial_alpha(t, 2);
    const auto rnd = random_alpha(t, 2);
    EXPECT_TRUE(adv.violation().empty()) << adv.violation();
    const double na = static_cast<double>(stationary_subset(t, adv, p).size());
    const double nr = static_cast<double>(stationary_subset(t, rnd, p).size());
    RecordProperty("adversarial", std::to_string(na));
    RecordProperty("random", std::to_string(nr));
    EXPECT_GE(na, 10.0 * std::max(nr, 1.0));
}

TEST(Adversarial, InvariantsOnCurved) {
    const auto t = enumerate_interacting(curved_system(), 128.0, 0.75, 4);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto f = adversarial_alpha(t, seed);
        EXPECT_TRUE(f.violation().empty()) << f.violation();
        for (const auto& e : t.tuples)
            for (int j = 0; j < 4; ++j) EXPECT_TRUE(f.get(j, e.m[j]).has_value());
    }
}

TEST(StepFunctions, ConstantAssignmentGivesConstants) {
    const auto t = enumerate_interacting(linear_system(), 64.0, 0.75, 4);
    const std::array<double, 4> c{0.7, -0.3, 1.1, 0.0};
    const auto f = constant_alpha(t, c);
    for (int r = 0; r < 3; ++r) {
        const auto F = step_functions(f, t.cell, {r, r, r, r});
        for (int j = 0; j < 4; ++j)
            for (double y = -0.5; y <= 0.5; y += 0.01) EXPECT_DOUBLE_EQ(F(j, y), c[j]);
    }
}

TEST(StepFunctions, CellsOfOneClassTileTheLine) {
    StepFunctionTuple F;
    F.cell = 0.1;
    F.residues = {0, 1, 2, 0};
    for (int j = 0; j < 4; ++j)
        for (double y = -1.0; y <= 1.0; y += 0.0037) {
            const long m = F.cell_of(j, y);
            EXPECT_EQ(mod3(m), F.residues[j]);
            EXPECT_GE(y, (m - 1.5) * F.cell - 1e-12);
            EXPECT_LT(y, (m + 1.5) * F.cell + 1e-12);
        }
}

TEST(StepFunctions, FirstComponentBoundedBelow) {
    const auto t = enumerate_interacting(curved_system(), 128.0, 0.75, 4);
    const auto f = random_alpha(t, 4);
    const auto F = step_functions(f, t.cell, {1, 0, 2, 1});
    EXPECT_GE(F.min_abs_first(), f.c_lower - 1e-12);
}

TEST(Bridge, AdversarialLinearAtLambda256) {
    const auto sys = linear_system();
    const auto p = default_ladder();
    const auto t = enumerate_interacting(sys, 256.0, p.gamma, 4);
    const auto f = adversarial_alpha(t, 2);
    const auto N = stationary_subset(t, f, p);
    for (int r = 0; r < 3; ++r) {
        const auto F = step_functions(f, t.cell, {r, r, r, r});
        const auto b = bridge_check(sys, t, N, F, p, 2.0, 256);
        ASSERT_GT(b.stationary_in_class, 0u);
        ASSERT_GT(b.area, 0.0);
        RecordProperty("bridge_constant_" + std::to_string(r), std::to_string(b.constant));
        EXPECT_LT(b.constant, 10.0);
    }
}

TEST(Bridge, SublevelFractionMatchesDirectCountOnLinear) {
    // constant gradients: x is in S(F, eps) exactly when its class cell tuple cancels to eps * lambda
    const auto sys = linear_system();
    const auto p = default_ladder();
    const auto t = enumerate_interacting(sys, 128.0, p.gamma, 4);
    const auto f = random_alpha(t, 8);
    const auto F = step_functions(f, t.cell, {0, 1, 2, 0});
    const double eps = 4.0 * p.bridge_eps(128.0);
    const int n = 200;
    const auto region = Region2D::of(sys);
    const double frac = measure_sublevel_2d(sys, SublevelExpr::VectorSum, F.profiles(), eps, region, n);
    std::size_t inside = 0, hits = 0;
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            const Point2 x{-0.5 + (i + 0.5) / n, -0.5 + (k + 0.5) / n};
            if (!region.contains(x)) continue;
            ++inside;
            double a = 0.0, b = 0.0;
            bool ok = true;
            for (int j = 0; j < 4; ++j) {
                const auto alpha = f.get(j, F.cell_of(j, sys.phases[j].value(x)));
                if (!alpha || mod3(F.cell_of(j, sys.phases[j].value(x))) != F.residues[j]) {
                    ok = false;
                    break;
                }
                const auto g = sys.phases[j].gradient(x);
                a += *alpha * g[0];
                b += *alpha * g[1];
            }
            if (ok && std::hypot(a, b) / t.lambda < eps) ++hits;
        }
    EXPECT_DOUBLE_EQ(frac, static_cast<double>(hits) / static_cast<double>(inside));
    EXPECT_GT(hits, 0u);
}

TEST(BigM, EmptyTableGivesZero) {
    InteractionTable t;
    t.lambda = 64.0;
    t.gamma = 0.75;
    t.cell = std::pow(64.0, -0.75);
    const auto f1 = pure_exponential(40.0, 4.4);
    const auto c = bigM_measure(linear_system(), t, [](int, long, double) { return 10.0; }, f1, default_ladder());
    EXPECT_EQ(c.measure, 0.0);
    EXPECT_EQ(c.n_interacting, 0u);
}

TEST(BigM, FloorViolationIsAnError) {
    const auto t = enumerate_interacting(linear_system(), 64.0, 0.75, 4);
    const auto f1 = pure_exponential(40.0, 4.4);
    EXPECT_THROW(bigM_measure(linear_system(), t, [](int, long, double) { return 0.5; }, f1, default_ladder()), GuardError);
}

TEST(BigM, PureExponentialHasEmptySet) {
    // D_s f1 is constant, so its local coefficients are window harmonics, small once |k| >= 2
    const auto sys = linear_system();
    const auto p = default_ladder();
    for (double lam : {64.0, 256.0}) {
        const auto t = enumerate_interacting(sys, lam, p.gamma, 4);
        const double k1 = std::ceil(std::pow(lam, p.tau0));
        // k2 = k1, k3 = -k1 cancels exactly on the linear system, so every cell is stationary
        auto k = [k1](int j, long, double) { return j == 2 ? -k1 : k1; };
        const auto c = bigM_measure(sys, t, k, pure_exponential(0.8 * lam, 4.4), p);
        EXPECT_EQ(c.stationary_cells, c.cells);
        EXPECT_EQ(c.measure, 0.0) << lam;
    }
}

namespace {

BigMCensus chirp_census(double lam, const ParameterLadder& p, BigMOptions opt) {
    const auto sys = linear_system();
    const auto t = enumerate_interacting(sys, lam, p.gamma, 4);
    const double lg = std::pow(lam, p.gamma);
    const double beta = 4.0 * std::pow(lam, 2.0 * p.gamma + 0.1);
    auto k = [=](int j, long, double s) {
        const double k1 = 2.0 * beta * s / (kPi * lg);
        return j == 2 ? -k1 : k1;
    };
    const auto f1 = chirp(beta, Interval{-0.6, 0.6});
    opt.floor = FloorPolicy::Exclude;
    return bigM_measure(sys, t, k, f1, p, opt);
}

}  // namespace

TEST(BigM, ChirpTrackingFillsTheSet) {
    const auto p = default_ladder();
    const auto c = chirp_census(64.0, p, {});
    RecordProperty("bigM_ratio", std::to_string(c.ratio));
    EXPECT_GT(c.counted_cells, 0u);
    EXPECT_GT(c.excluded_cells, 0u);
    EXPECT_LE(c.counted_cells, c.stationary_cells);
    // most stationary cells above the floor carry a large coefficient at the tracked frequency
    EXPECT_GT(static_cast<double>(c.counted_cells), 0.9 * static_cast<double>(c.stationary_cells));
}

TEST(BigM, MonotoneInThresholdAndFloor) {
    auto p = default_ladder();
    double prev = std::numeric_limits<double>::infinity();
    for (double scale : {0.05, 0.2, 0.6, 0.9}) {
        BigMOptions o;
        o.coefficient_scale = scale;
        const double m = chirp_census(64.0, p, o).measure;
        EXPECT_LE(m, prev);
        prev = m;
    }
    prev = std::numeric_limits<double>::infinity();
    for (double tau0 : {0.05, 0.1, 0.2}) {
        p.tau0 = tau0;
        const double m = chirp_census(64.0, p, {}).measure;
        EXPECT_LE(m, prev);
        prev = m;
    }
}
