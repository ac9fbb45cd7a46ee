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

#include <gtest/gtest.h>

#include "acdiv/special_functions.hpp"
#include "support.hpp"

namespace {

using namespace acdiv;
using acdiv::testing::base_model;

struct PcfReference {
    double lambda, x, value;
};

// D_{-lambda}(x) at 30 significant digits from an arbitrary-precision library.
constexpr PcfReference kPcfReference[] = {
    {0.05, -3.0, 0.59917479359061519802},
    {0.05, -0.5, 1.0052607889048934974},
    {0.05, 0.0, 1.0307217090658623245},
    {0.05, 1.3, 0.64061934317952658626},
    {0.05, 4.0, 0.017063350917470125282},
    {0.05, 9.0, 1.4377602058541685719e-9},
    {0.4, -3.0, 6.0023798314879817744},
    {0.4, -0.5, 1.4122799011044302391},
    {0.4, 0.0, 1.1887094945136154867},
    {0.4, 1.3, 0.53596057532668689734},
    {0.4, 4.0, 0.010354617752164757918},
    {0.4, 9.0, 6.643119734884037063e-10},
    {1.0, -3.0, 23.750123328352972337},
    {1.0, -0.5, 1.8450236907335043743},
    {1.0, 0.0, 1.2533141373155002512},
    {1.0, 1.3, 0.37021744919033243774},
    {1.0, 4.0, 0.0043344395876032240774},
    {1.0, 9.0, 1.7623362609729099765e-10},
    {2.7, -3.0, 106.33333016530823267},
    {2.7, -0.5, 1.5522057043905790261},
    {2.7, 0.0, 0.7353123251786551637},
    {2.7, 1.3, 0.094869826791035421953},
    {2.7, 4.0, 0.00033617011173705410684},
    {2.7, 9.0, 4.0139471454554947898e-12},
    {8.0, -3.0, 49.26318592899042853},
    {8.0, -0.5, 0.037503550900372457081},
    {8.0, 0.0, 0.0095238095238095238095},
    {8.0, 1.3, 0.00025748889496453265284},
    {8.0, 4.0, 5.9969792351478489104e-8},
    {8.0, 9.0, 2.4976969222976569137e-17},
};

TEST(ScaleFunction, VanishesAtZeroWithSlopeTwoOverVariance) {
    for (double s2 : {0.3, 1.0, 4.0}) {
        const auto m = ModelParams::from_variance(0.7, s2, 0.2);
        EXPECT_EQ(scale_w(m, 0.0), 0.0);
        EXPECT_DOUBLE_EQ(scale_w_prime(m, 0.0), 2.0 / s2);
    }
    EXPECT_DOUBLE_EQ(scale_w_prime(base_model(), 0.0), 2.0);
}

TEST(ScaleFunction, MatchesHyperbolicForm) {
    const double d = std::sqrt(0.25 + 0.8);
    EXPECT_NEAR(scale_w(base_model(), 1.0), 2.0 / d * std::exp(-0.5) * std::sinh(d), 1e-14);
}

TEST(ScaleFunction, ExponentialTiltIsOdd) {
    // W(x) e^{mu x / sigma^2} is odd, hence W(-x) = -W(x) e^{2 mu x / sigma^2}.
    const auto m = ModelParams::from_variance(0.5, 1.5, 0.3);
    for (double x : {0.1, 0.9, 3.0, 12.0}) {
        const double expect = -scale_w(m, x) * std::exp(2 * m.mu() * x / m.sigma2());
        EXPECT_NEAR(scale_w(m, -x) / expect, 1.0, 1e-13) << x;
        EXPECT_LT(scale_w(m, -x), 0.0);
    }
}

TEST(ScaleFunction, StrictlyIncreasing) {
    const auto m = base_model();
    double prev = scale_w(m, -10.0);
    for (int i = 1; i <= 400; ++i) {
        const double x = -10.0 + 0.05 * i;
        const double w = scale_w(m, x);
        EXPECT_GT(w, prev) << x;
        EXPECT_GT(scale_w_prime(m, x), 0.0) << x;
        prev = w;
    }
}

TEST(ScaleFunction, DerivativesMatchFiniteDifferences) {
    const auto m = ModelParams::from_variance(0.4, 2.0, 0.6);
    for (double x : {-6.0, -1.3, -0.2, 0.4, 0.7, 2.5, 9.0}) {
        const double h = 1e-5 * std::max(1.0, std::abs(x));
        const double d1 = (scale_w(m, x + h) - scale_w(m, x - h)) / (2 * h);
        const double d2 = (scale_w_prime(m, x + h) - scale_w_prime(m, x - h)) / (2 * h);
        EXPECT_NEAR(d1 / scale_w_prime(m, x), 1.0, 1e-6) << x;
        EXPECT_NEAR(d2, scale_w_second(m, x), 1e-6 * std::max(1.0, std::abs(d2))) << x;
    }
}

TEST(ScaleFunction, NegativeArgumentsAvoidCancellation) {
    const auto m = base_model();
    // Far into the negative axis both exponentials are tiny; the ratio W'/W stays finite.
    const double r = scale_w_prime(m, -40.0) / scale_w(m, -40.0);
    const auto rates = acdiv::detail::scale_rates(m);
    EXPECT_NEAR(r, -rates.down, 1e-10);
}

TEST(ParabolicCylinder, GaussianIntegralAtOrigin) {
    EXPECT_NEAR(pcf_d(1.0, 0.0), std::sqrt(M_PI / 2), 1e-12);
}

TEST(ParabolicCylinder, OriginValueIdentity) {
    const double l = 0.4;
    EXPECT_NEAR(pcf_d(l, 0.0), std::pow(2.0, -l / 2) * std::sqrt(M_PI) / std::tgamma((1 + l) / 2), 1e-11);
}

TEST(ParabolicCylinder, MatchesReferenceValues) {
    for (const auto& r : kPcfReference)
        EXPECT_NEAR(pcf_d(r.lambda, r.x) / r.value, 1.0, 1e-11) << r.lambda << ' ' << r.x;
}

TEST(ParabolicCylinder, PositiveAndDecreasingOnNonNegativeAxis) {
    for (double l : {0.1, 0.4, 2.0}) {
        double prev = pcf_d(l, 0.0);
        for (int i = 1; i <= 60; ++i) {
            const double x = 0.25 * i;
            const double d = pcf_d(l, x);
            EXPECT_GT(d, 0.0);
            EXPECT_LT(d, prev) << l << ' ' << x;
            EXPECT_LT(pcf_d_dx(l, x), 0.0);
            prev = d;
        }
    }
}

TEST(ParabolicCylinder, NotMonotoneOnNegativeAxisForSmallOrder) {
    // -(x/2) D dominates for x < 0 and lambda < 1.
    EXPECT_GT(pcf_d_dx(0.1, -1.0), 0.0);
    EXPECT_LT(pcf_d_dx(1.0, -1.0), 0.0);
}

TEST(ParabolicCylinder, DerivativeAtOrigin) { EXPECT_NEAR(pcf_d_dx(1.0, 0.0), -1.0, 1e-12); }

TEST(ParabolicCylinder, DerivativeMatchesFiniteDifference) {
    for (auto [l, x] : {std::pair{0.4, 1.3}, {0.4, -2.0}, {1.7, 0.2}, {0.05, 6.0}}) {
        const double h = 1e-5 * std::max(1.0, std::abs(x));
        const double fd = (pcf_d(l, x + h) - pcf_d(l, x - h)) / (2 * h);
        EXPECT_NEAR(fd / pcf_d_dx(l, x), 1.0, 1e-6) << l << ' ' << x;
    }
}

TEST(ParabolicCylinder, TighterToleranceStaysWithinErrorEstimate) {
    QuadratureConfig loose;
    QuadratureConfig tight;
    tight.abs_tol = loose.abs_tol / 2;
    for (double x : {-2.0, 0.0, 1.5, 5.0}) {
        const auto a = pcf_d_eval(0.4, x, loose);
        const auto b = pcf_d_eval(0.4, x, tight);
        EXPECT_LE(std::abs(a.value - b.value), std::max(a.error, 4 * std::numeric_limits<double>::epsilon() * a.value))
            << x;
    }
}

TEST(ParabolicCylinder, FixedTruncationAgreesWithAdaptive) {
    QuadratureConfig fixed;
    fixed.truncation = TruncationPolicy::fixed_upper_limit;
    for (double x : {-1.0, 0.5, 3.0}) EXPECT_NEAR(pcf_d(0.6, x, fixed) / pcf_d(0.6, x), 1.0, 1e-10);
}

TEST(ParabolicCylinder, RejectsNonPositiveOrder) {
    EXPECT_THROW(pcf_d(0.0, 1.0), InvalidParameter);
    EXPECT_THROW(pcf_d_dx(-1.0, 1.0), InvalidParameter);
}

TEST(HFunction, ComposesParabolicCylinder) {
    const auto m = base_model();
    // shift (mu - S)/K = -1.5, so H(0) = e^{0.5 * 2.25} D_{-0.4}(1.5 sqrt 2)
    EXPECT_NEAR(h_fn(m, 1.0, 2.0, 0.0).value / 0.70630551577471624868, 1.0, 1e-11);
    EXPECT_NEAR(h_fn(m, 1.0, 2.0, 0.0).value, std::exp(0.5 * 2.25) * pcf_d(0.4, 1.5 * std::sqrt(2.0)), 1e-13);
}

TEST(HFunction, PositiveDecreasingOnGrid) {
    const HFunction h(base_model(), 1.0, 2.0);
    double prev = h.eval(0.0).value;
    for (int i = 1; i <= 100; ++i) {
        const auto v = h.eval(0.1 * i);
        EXPECT_GT(v.value, 0.0);
        EXPECT_LT(v.value, prev);
        EXPECT_LT(v.derivative, 0.0);
        prev = v.value;
    }
}

TEST(HFunction, LogDerivativeMatchesFiniteDifference) {
    for (auto [K, S] : {std::pair{1.0, 2.0}, {0.2, 0.0}, {5.0, 4.0}}) {
        const HFunction h(ModelParams::from_variance(0.3, 2.0, 0.5), K, S);
        for (double x : {0.0, 0.3, 1.0, 4.0, 10.0}) {
            const double s = 1e-5 * std::max(1.0, x);
            const double fd = (h.log_eval(x + s).log_value - h.log_eval(x - s).log_value) / (2 * s);
            const double d = h.log_eval(x).log_derivative;
            EXPECT_NEAR(fd, d, 1e-6 * std::max(1.0, std::abs(d))) << K << ' ' << S << ' ' << x;
        }
    }
}

TEST(HFunction, SatisfiesItsOrdinaryDifferentialEquation) {
    const auto m = ModelParams::from_variance(0.8, 0.7, 0.3);
    const HFunction h(m, 2.0, 1.0);
    for (double x : {0.2, 1.0, 3.0}) {
        const double s = 1e-4;
        auto ld = [&](double y) { return h.log_eval(y).log_derivative; };
        const double d = (ld(x - 2 * s) - 8 * ld(x - s) + 8 * ld(x + s) - ld(x + 2 * s)) / (12 * s);
        const double r = ld(x);
        EXPECT_NEAR(d + r * r, h.second_ratio(x, r), 1e-7) << x;
    }
}

TEST(HFunction, LogSpaceSurvivesWhereRawValuesOverflow) {
    const HFunction h(ModelParams::from_variance(0.5, 0.01, 0.4), 5.0, 0.0);
    // Far below the centre the Gaussian prefactor exceeds the double range.
    const double x = -60.0;
    const auto l = h.log_eval(x);
    EXPECT_TRUE(std::isfinite(l.log_value));
    EXPECT_GT(l.log_value, 710.0);
    EXPECT_THROW(h.eval(x), RangeError);
}

TEST(HFunction, RejectsZeroK) {
    EXPECT_THROW(HFunction(base_model(), 0.0, 1.0), InvalidParameter);
}

} // namespace
