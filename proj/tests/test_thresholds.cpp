/*
   Copyright 2026 The acdiv Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "acdiv/thresholds.hpp"
#include "support.hpp"

namespace {

using namespace acdiv;
using acdiv::testing::base_model;
using acdiv::testing::base_problem;

Problem fig1(double beta = 3.0, double P = 1.0) { return Problem(base_model(), base_problem(beta, P)); }

Problem unfavourable(double beta = 1.5) {
    return Problem(acdiv::testing::unfavourable_model(), make_problem(1.0, 2.0, beta, 0.5));
}

/// Favourable random instances (rejection sampling, fixed seed).
std::vector<Problem> favourable_instances(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Problem> out;
    while (out.size() < n) {
        const auto inst = acdiv::testing::random_instance(rng);
        Problem pr(inst.model, inst.problem);
        if (favourable_check(pr)) out.push_back(pr);
    }
    return out;
}

int sign(double v) { return (v > 0) - (v < 0); }

TEST(Favourable, WorkedParameterSets) {
    EXPECT_TRUE(favourable_check(fig1()));
    EXPECT_FALSE(favourable_check(unfavourable()));
}

TEST(Favourable, MarginAffineIncreasingInPenalty) {
    const auto m = acdiv::testing::unfavourable_model();
    const double m0 = favourable_margin(Problem(m, make_problem(1, 2, 2, 0.0)));
    const double m1 = favourable_margin(Problem(m, make_problem(1, 2, 2, 1.0)));
    EXPECT_NEAR(m1 - m0, 1.0, 1e-12);
    EXPECT_TRUE(favourable_check(Problem(m, make_problem(1, 2, 2, 0.5 - m0 + 0.01))));
}

TEST(FFunction, SignPatternAndPenaltyMonotonicity) {
    const auto pr = fig1();
    const double bd = solve_b_d(pr);
    EXPECT_NEAR(bd, 1.354936849332, 1e-9);
    EXPECT_LE(std::abs(f_fn(pr, bd)), 1e-10);
    for (double s : {0.05, 0.3, 0.7, 0.95}) EXPECT_GT(f_fn(pr, bd * s), 0.0) << s;
    for (double s : {1.05, 1.5, 3.0, 6.0}) EXPECT_LT(f_fn(pr, bd * s), 0.0) << s;
    const auto higher = fig1(3.0, 1.5);
    for (double b : {0.2, 1.0, 2.5}) EXPECT_GT(f_fn(higher, b), f_fn(pr, b));
}

TEST(GFunction, SignPatternAndBetaMonotonicity) {
    const auto pr = fig1(2.0);
    const double bc = solve_b_c(pr);
    EXPECT_NEAR(bc, 1.05510411954, 1e-9);
    EXPECT_LE(std::abs(g_fn(pr, bc)), 1e-10);
    const double gamma = solve_gamma(pr.model(), 2.0);
    for (double s : {0.05, 0.4, 0.9}) EXPECT_GT(g_fn(pr, bc * s), 0.0) << s;
    for (double b : {1.1 * bc, 0.5 * (bc + gamma), gamma}) EXPECT_LT(g_fn(pr, b), 0.0) << b;
    const auto higher = fig1(2.5);
    for (double b : {0.2, 0.8, 1.2}) EXPECT_GT(g_fn(higher, b), g_fn(pr, b));
}

TEST(Gamma, VanishesAsBetaApproachesOne) {
    const auto m = base_model();
    double prev = solve_gamma(m, 1.5);
    for (double beta : {1.1, 1.01, 1.001, 1.0001}) {
        const double g = solve_gamma(m, beta);
        EXPECT_GT(g, 0.0);
        EXPECT_LT(g, prev);
        prev = g;
    }
    EXPECT_LT(prev, 0.05);
}

TEST(Gamma, WorkedValueAndEquivalentForm) {
    const auto m = base_model();
    EXPECT_NEAR(solve_gamma(m, 3.0), 1.537206425165, 1e-9);
    for (double beta : {1.2, 1.6633, 2.0, 3.0}) {
        const double g = solve_gamma(m, beta);
        EXPECT_NEAR(gamma_equation(m, beta, g), 0.0, 1e-9);
        EXPECT_NEAR(gamma_ratio_form(m, g), beta, 1e-9) << beta;
    }
    EXPECT_THROW(solve_gamma(m, 1.0), InvalidParameter);
}

TEST(BarrierD, LiquidationWhenUnfavourable) { EXPECT_EQ(solve_b_d(unfavourable()), 0.0); }

TEST(BarrierD, IncreasingInPenalty) {
    EXPECT_GT(solve_b_d(fig1(3.0, 1.5)), solve_b_d(fig1(3.0, 1.0)));
    double prev = 0.0;
    for (double P : {0.0, 0.5, 1.0, 2.0, 4.0}) {
        const double b = solve_b_d(fig1(3.0, P));
        EXPECT_GT(b, prev) << P;
        prev = b;
    }
}

TEST(BarrierC, BelowGammaAndIncreasingInBeta) {
    double prev = 0.0;
    for (double beta : {1.2, 1.6633, 2.0, 3.0, 5.0}) {
        const auto pr = fig1(beta);
        const double b = solve_b_c(pr);
        EXPECT_LT(b, solve_gamma(pr.model(), beta)) << beta;
        EXPECT_LE(std::abs(g_fn(pr, b)), 1e-10);
        EXPECT_GT(b, prev) << beta;
        prev = b;
    }
    EXPECT_NEAR(solve_b_c(fig1(3.0)), 1.400164157315, 1e-9);
}

TEST(CriticalBeta, SwitchingValue) {
    const auto pr = fig1();
    const double bd = solve_b_d(pr);
    const double cb = critical_beta(pr, bd);
    EXPECT_NEAR(cb, 2.835502967679, 1e-9);
    EXPECT_NEAR(cb, j_d_slope_at_zero(pr, bd), 1e-8);
    EXPECT_NEAR(cb, j_d(pr, bd, 0.0).x_derivative, 1e-8);
}

TEST(CriticalBeta, ZeroPenaltyReducesToScaleRatio) {
    const auto pr = fig1(3.0, 0.0);
    const double bd = solve_b_d(pr);
    EXPECT_NEAR(critical_beta(pr, bd), pr.wp0() / pr.wp(bd), 1e-14);
}

TEST(CriticalPenalty, SwitchingValueAndDuality) {
    const auto pr = fig1(3.0);
    const double bc = solve_b_c(pr);
    const double cp = critical_penalty(pr, bc);
    EXPECT_NEAR(cp, 1.127109570121, 1e-9);
    EXPECT_NEAR(cp, -j_c(pr, bc, 0.0).j_c_at_zero, 1e-8);
    const auto dual = fig1(3.0, cp);
    EXPECT_NEAR(critical_beta(dual, solve_b_d(dual)), 3.0, 1e-6);
}

TEST(Decide, WorkedVerdicts) {
    const auto d3 = decide(fig1(3.0));
    EXPECT_EQ(d3.verdict, Verdict::pure_dividend);
    EXPECT_LT(d3.b_d, d3.b_c);
    const auto d2 = decide(fig1(2.0));
    EXPECT_EQ(d2.verdict, Verdict::bailout);
    EXPECT_LT(d2.b_c, d2.b_d);
    for (double beta : {1.1, 1.5, 2.0, 3.0}) {
        const auto s = decide(unfavourable(beta));
        EXPECT_EQ(s.verdict, Verdict::liquidation);
        EXPECT_EQ(s.b_d, 0.0);
    }
}

TEST(Decide, CoOptimalWithinTieTolerance) {
    const Problem pr(base_model(), make_problem(1, 2, 2.0, 0.0));
    const double cb = critical_beta(pr, solve_b_d(pr));
    EXPECT_NEAR(cb, 1.663369830139, 1e-9);
    const auto s = decide(pr.with_problem(make_problem(1, 2, cb, 0.0)));
    EXPECT_EQ(s.verdict, Verdict::co_optimal);
    EXPECT_NEAR(s.b_d, s.b_c, 1e-6);
    EXPECT_TRUE(s.criteria_consistent());
}

TEST(Decide, BuildValuePicksTheWinner) {
    EXPECT_EQ(build_value(fig1(3.0), decide(fig1(3.0))).regime(), Regime::pure_dividend);
    EXPECT_EQ(build_value(fig1(2.0), decide(fig1(2.0))).regime(), Regime::bailout);
    EXPECT_EQ(build_value(unfavourable(), decide(unfavourable())).regime(), Regime::liquidation);
}

TEST(Dichotomy, CriteriaAgreeOnRandomInstances) {
    for (const auto& pr : favourable_instances(100, 7)) {
        const auto s = decide(pr);
        const double slope = j_d_slope_at_zero(pr, s.b_d);
        const double vc0 = j_c(pr, s.b_c, 0.0).value;
        EXPECT_EQ(sign(slope - pr.problem().beta), sign(vc0 + pr.problem().P));
        EXPECT_TRUE(s.criteria_consistent());
        EXPECT_LT(s.b_c, s.gamma);
    }
}

TEST(Dichotomy, ThresholdOrderingMatchesPenaltyComparison) {
    for (const auto& pr : favourable_instances(50, 11)) {
        const auto s = decide(pr);
        const double jc0 = j_c(pr, s.b_c, 0.0).j_c_at_zero;
        // J_c(0;b_c) < -P iff b_d < b_c
        EXPECT_EQ(sign(jc0 + pr.problem().P), sign(s.b_d - s.b_c));
    }
}

TEST(Dichotomy, SlopeMatchGivesPenaltyIdentity) {
    std::size_t checked = 0;
    for (const auto& pr : favourable_instances(40, 13)) {
        const double bd = solve_b_d(pr);
        if (!(pr.problem().beta < critical_beta(pr, bd))) continue;
        double b = 0.0;
        try {
            b = solve_slope_match(pr, pr.problem().beta, bd);
        } catch (const SolverError&) {
            continue;  // the slope stays above beta for every threshold
        }
        EXPECT_LE(std::abs(j_c(pr, b, 0.0).j_c_at_zero + pr.problem().P), 1e-6);
        ++checked;
    }
    EXPECT_GE(checked, 10u);
}

TEST(Dichotomy, OptimalThresholdMaximisesInitialSlope) {
    const auto pr = fig1();
    const double bd = solve_b_d(pr);
    const double best = j_d_slope_at_zero(pr, bd);
    for (double s : {0.5, 0.8, 0.95, 0.999, 1.001, 1.05, 1.3, 2.0})
        EXPECT_GE(best, j_d_slope_at_zero(pr, bd * s)) << s;
}

TEST(Dichotomy, UnfavourableInitialSlopeAtMostOne) {
    for (double beta : {1.1, 2.0}) {
        const auto pr = unfavourable(beta);
        EXPECT_LE(j_d_slope_at_zero(pr, 0.0), 1.0);
    }
}

} // namespace
