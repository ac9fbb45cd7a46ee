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

#pragma once

#include <boost/math/tools/toms748_solve.hpp>

#include <cmath>
#include <cstdint>
#include <sstream>
#include <utility>

#include "acdiv/errors.hpp"
#include "acdiv/value_functions.hpp"

namespace acdiv {

struct RootOptions {
    double residual_tol = 1e-10;
    double argument_tol = 1e-12;
    std::uintmax_t max_iterations = 200;
    /// Bracket search starts at [lower, 1] and doubles the upper end up to
    /// cap_factor * sigma^2 / mu.
    double lower = 1e-6;
    double cap_factor = 1e3;
};

/// Bracket-preserving root refinement (TOMS 748) of f on [lo, hi].
///
/// Requires f(lo) and f(hi) of opposite signs. Returns the bracket end with
/// the smaller |f| and throws SolverError if that residual exceeds residual_tol.
template <class F>
double refine_root(F&& f, double lo, double hi, double f_lo, double f_hi, const RootOptions& opt,
                   const char* what) {
    if (f_lo == 0.0) return lo;
    if (f_hi == 0.0) return hi;
    if ((f_lo > 0.0) == (f_hi > 0.0)) {
        std::ostringstream os;
        os << what << ": root not bracketed on [" << lo << ", " << hi << "]";
        throw SolverError(os.str());
    }
    std::uintmax_t iters = opt.max_iterations;
    const double tol = opt.argument_tol;
    auto stop = [tol](double a, double b) { return std::abs(b - a) <= tol * std::max(1.0, std::abs(a)); };
    const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, f_lo, f_hi, stop, iters);
    const double fa = f(a);
    const double fb = f(b);
    const double root = std::abs(fa) <= std::abs(fb) ? a : b;
    const double residual = std::min(std::abs(fa), std::abs(fb));
    if (!(residual <= opt.residual_tol)) {
        std::ostringstream os;
        os << what << ": residual " << residual << " at " << root << " exceeds "
           << opt.residual_tol;
        throw SolverError(os.str());
    }
    return root;
}

// ---------------------------------------------------------------------------
// Threshold equations
// ---------------------------------------------------------------------------

/// Left side of the favourability inequality: q/(q+K) H(0)/H'(0) + eta(0) + P.
inline double favourable_margin(const Problem& pr) {
    const auto h0 = pr.h().log_eval(0.0);
    if (h0.log_derivative == 0.0) throw DegenerateInput("H'(0) vanishes", 0.0);
    const double q = pr.model().q();
    const double K = pr.problem().K;
    return q / (q + K) / h0.log_derivative + pr.eta(0.0) + pr.problem().P;
}

inline bool favourable_check(const Problem& pr) { return favourable_margin(pr) > 0.0; }

/// F(b); its unique positive zero is b_d.
inline double f_fn(const Problem& pr, double b) {
    const auto t = threshold_terms(pr, b);
    const double q = pr.model().q();
    const double K = pr.problem().K;
    return q / (q + K) / t.h_ratio + pr.eta(b) -
           (1.0 / t.w_ratio) * (1.0 + pr.problem().P * pr.wp0() / t.w_mb);
}

/// g(b) in G. This is J_c(0;b) = (beta - d/dx R(0;b)) / d/dx Phi(0;b).
inline double g_coefficient(const Problem& pr, const ThresholdTerms& t) { return j_c_at_zero(pr, t); }

/// G(b); its unique positive zero is b_c.
inline double g_fn(const Problem& pr, double b) {
    const auto t = threshold_terms(pr, b);
    const double q = pr.model().q();
    const double K = pr.problem().K;
    return q / (q + K) / t.h_ratio + pr.eta(b) -
           (1.0 / t.w_ratio) * (1.0 - g_coefficient(pr, t) * pr.wp0() / t.w_mb);
}

/// (Delta - mu) e^{(Delta+mu) g/sigma^2} + (Delta + mu) e^{-(Delta-mu) g/sigma^2} - 2 beta Delta.
///
/// Its zero is the barrier where f'(g) = 1, f''(g) = 0 for f = c1 e^{theta1 x} + c2 e^{theta2 x}
/// with f'(0) = beta; equivalently -W'(g) W(-g) / (W(g) W'(0)) = beta.
inline double gamma_equation(const ModelParams& m, double beta, double g) {
    const double d = m.delta();
    const double mu = m.mu();
    return (d - mu) * std::exp((d + mu) * g / m.sigma2()) +
           (d + mu) * std::exp(-(d - mu) * g / m.sigma2()) - 2.0 * beta * d;
}

/// -W'(g) W(-g) / (W(g) W'(0)), equal to beta at the barrier.
inline double gamma_ratio_form(const ModelParams& m, double g) {
    return -scale_w_prime(m, g) * scale_w(m, -g) / (scale_w(m, g) * scale_w_prime(m, 0.0));
}

/// Barrier of the singular-control problem; brackets b_c from above.
inline double solve_gamma(const ModelParams& m, double beta, const RootOptions& opt = {}) {
    if (!(beta > 1.0)) throw InvalidParameter("solve_gamma requires beta > 1");
    auto f = [&](double g) { return gamma_equation(m, beta, g); };
    const double f0 = f(0.0); // 2 Delta (1 - beta) < 0
    double hi = m.sigma2() / (m.delta() + m.mu());
    double fhi = f(hi);
    while (fhi <= 0.0) {
        hi *= 2.0;
        if (hi > 1e6) throw SolverError("solve_gamma: could not bracket the root");
        fhi = f(hi);
    }
    // Residual is relative to the 2 beta Delta scale of the equation.
    RootOptions o = opt;
    o.residual_tol = opt.residual_tol * std::max(1.0, 2.0 * beta * m.delta());
    return refine_root(f, 0.0, hi, f0, fhi, o, "solve_gamma");
}

/// b_d: 0 when the parameters are unfavourable, otherwise the zero of F.
inline double solve_b_d(const Problem& pr, const RootOptions& opt = {}) {
    if (!favourable_check(pr)) return 0.0;
    auto f = [&](double b) { return f_fn(pr, b); };
    const double lo = opt.lower;
    const double f_lo = f(lo);
    if (!(f_lo > 0.0)) {
        std::ostringstream os;
        os << "solve_b_d: F(0+) = " << f_lo << " is not positive for favourable parameters";
        throw SolverError(os.str());
    }
    const double cap = opt.cap_factor * pr.model().sigma2() / pr.model().mu();
    double hi = 1.0;
    double f_hi = f(hi);
    while (f_hi > 0.0) {
        hi *= 2.0;
        if (hi > cap) throw SolverError("solve_b_d: bracket search exhausted");
        f_hi = f(hi);
    }
    return refine_root(f, lo, hi, f_lo, f_hi, opt, "solve_b_d");
}

/// b_c: the zero of G, which lies in (0, gamma).
inline double solve_b_c(const Problem& pr, const RootOptions& opt = {}) {
    const double gamma = solve_gamma(pr.model(), pr.problem().beta, opt);
    auto g = [&](double b) { return g_fn(pr, b); };
    const double lo = std::min(opt.lower, 0.5 * gamma);
    const double g_lo = g(lo);
    if (!(g_lo > 0.0)) {
        std::ostringstream os;
        os << "solve_b_c: G(0+) = " << g_lo << " is not positive";
        throw SolverError(os.str());
    }
    const double g_hi = g(gamma);
    if (!(g_hi < 0.0)) {
        std::ostringstream os;
        os << "solve_b_c: G(gamma) = " << g_hi << " is not negative; no root in (0, gamma)";
        throw SolverError(os.str());
    }
    return refine_root(g, lo, gamma, g_lo, g_hi, opt, "solve_b_c");
}

/// d/dx J_d(0;b) for b >= 0.
inline double j_d_slope_at_zero(const Problem& pr, double b) {
    if (b == 0.0) {
        const auto h0 = pr.h().log_eval(0.0);
        return pr.eta_slope() - (pr.eta(0.0) + pr.problem().P) * h0.log_derivative;
    }
    const auto t = threshold_terms(pr, b);
    return -pr.problem().P * t.wp_mb / t.w_mb + j_d_at_threshold(pr, t) * pr.wp0() / t.w_b;
}

/// Switching value of beta: V_d'(0).
inline double critical_beta(const Problem& pr, double b_d) {
    if (b_d == 0.0) return j_d_slope_at_zero(pr, 0.0);
    const double P = pr.problem().P;
    const double wmb = pr.w(-b_d);
    return -P * pr.wp(-b_d) / wmb + (1.0 + P * pr.wp0() / wmb) * pr.wp0() / pr.wp(b_d);
}

/// Switching value of P: -V_c(0).
inline double critical_penalty(const Problem& pr, double b_c) {
    const double beta = pr.problem().beta;
    const double wp0 = pr.wp0();
    const double wpb = pr.wp(b_c);
    return -pr.w(-b_c) * (beta * wpb - wp0) / (pr.wp(-b_c) * wpb - wp0 * wp0);
}

/// Finds b with d/dx J_d(0;b) = target, preferring a root above b_d.
///
/// d/dx J_d(0;.) peaks at b_d, so a root exists on a side only if the slope
/// there drops below target. Throws SolverError if neither side brackets one.
inline double solve_slope_match(const Problem& pr, double target, double b_d,
                                const RootOptions& opt = {}) {
    auto f = [&](double b) { return j_d_slope_at_zero(pr, b) - target; };
    const double f_mid = f(b_d);
    if (f_mid < 0.0) throw SolverError("solve_slope_match: target exceeds the maximal slope");
    const auto& m = pr.model();
    // W(-b) needs e^{(Delta + mu) b / sigma^2} to stay representable.
    const double cap = std::min(opt.cap_factor * m.sigma2() / m.mu(),
                                0.9 * detail::kMaxExponent * m.sigma2() / (m.delta() + m.mu()));
    double hi = std::max(2.0 * b_d, 1.0);
    double f_hi = f(hi);
    while (f_hi > 0.0 && 2.0 * hi <= cap) {
        hi *= 2.0;
        f_hi = f(hi);
    }
    if (f_hi <= 0.0) return refine_root(f, b_d, hi, f_mid, f_hi, opt, "solve_slope_match");
    const double lo = std::min(opt.lower, 0.5 * b_d);
    const double f_lo = f(lo);
    if (f_lo > 0.0) throw SolverError("solve_slope_match: no threshold attains the target slope");
    return refine_root(f, lo, b_d, f_lo, f_mid, opt, "solve_slope_match");
}

// ---------------------------------------------------------------------------
// Dichotomy
// ---------------------------------------------------------------------------

enum class Verdict { pure_dividend, bailout, co_optimal, liquidation };

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::pure_dividend: return "pure_dividend";
    case Verdict::bailout: return "bailout";
    case Verdict::co_optimal: return "co_optimal";
    case Verdict::liquidation: return "liquidation";
    }
    return "unknown";
}

inline constexpr double kTieTolerance = 1e-9;

struct ThresholdSolution {
    bool favourable = false;
    double b_d = 0.0;
    double b_c = 0.0;
    double gamma = 0.0;
    double critical_beta = 0.0;
    double critical_P = 0.0;
    Verdict verdict = Verdict::liquidation;
    /// Verdict reached by comparing P with critical_P instead of beta with critical_beta.
    Verdict dual_verdict = Verdict::liquidation;

    /// True when the beta and P criteria agree (a tie on either side counts as agreement).
    bool criteria_consistent() const noexcept {
        return verdict == dual_verdict || verdict == Verdict::co_optimal ||
               dual_verdict == Verdict::co_optimal;
    }
};

inline ThresholdSolution decide(const Problem& pr, const RootOptions& opt = {}) {
    ThresholdSolution s;
    const auto& p = pr.problem();
    s.favourable = favourable_check(pr);
    s.gamma = solve_gamma(pr.model(), p.beta, opt);
    s.b_c = solve_b_c(pr, opt);
    s.b_d = s.favourable ? solve_b_d(pr, opt) : 0.0;
    s.critical_beta = critical_beta(pr, s.b_d);
    s.critical_P = critical_penalty(pr, s.b_c);
    if (!s.favourable) {
        s.verdict = Verdict::liquidation;
        s.dual_verdict = Verdict::liquidation;
        return s;
    }
    if (std::abs(p.beta - s.critical_beta) <= kTieTolerance)
        s.verdict = Verdict::co_optimal;
    else
        s.verdict = p.beta > s.critical_beta ? Verdict::pure_dividend : Verdict::bailout;
    if (std::abs(p.P - s.critical_P) <= kTieTolerance)
        s.dual_verdict = Verdict::co_optimal;
    else
        s.dual_verdict = p.P < s.critical_P ? Verdict::pure_dividend : Verdict::bailout;
    return s;
}

/// The optimal value function selected by a solved dichotomy.
inline ValueFn build_value(const Problem& pr, const ThresholdSolution& s) {
    if (s.verdict == Verdict::bailout) return build_v_c(pr, s.b_c);
    return build_v_d(pr, s.b_d);
}

} // namespace acdiv
