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

#include <cmath>
#include <sstream>

#include "acdiv/errors.hpp"
#include "acdiv/params.hpp"
#include "acdiv/special_functions.hpp"

namespace acdiv {

/// Model, problem parameters and the H_{K,S} evaluator they determine.
class Problem {
public:
    Problem(const ModelParams& m, const ProblemParams& p, QuadratureConfig cfg = {})
        : m_(m), p_(validated(p)), cfg_(cfg), h_(m, p.K, p.S, cfg) {}

    const ModelParams& model() const noexcept { return m_; }
    const ProblemParams& problem() const noexcept { return p_; }
    const QuadratureConfig& quadrature() const noexcept { return cfg_; }
    const HFunction& h() const noexcept { return h_; }

    Problem with_problem(const ProblemParams& p) const { return Problem(m_, p, cfg_); }

    double w(double x) const { return scale_w(m_, x); }
    double wp(double x) const { return scale_w_prime(m_, x); }
    double wpp(double x) const { return scale_w_second(m_, x); }
    /// W'(0) = 2 / sigma^2.
    double wp0() const noexcept { return 2.0 / m_.sigma2(); }

    /// Slope of eta, K / (q + K).
    double eta_slope() const noexcept { return p_.K / (m_.q() + p_.K); }

    /// eta(b) = S/q + K/(q+K) (b + (mu - S)/q).
    double eta(double b) const noexcept {
        return p_.S / m_.q() + eta_slope() * (b + (m_.mu() - p_.S) / m_.q());
    }

private:
    static const ProblemParams& validated(const ProblemParams& p) {
        p.validate();
        return p;
    }

    ModelParams m_;
    ProblemParams p_;
    QuadratureConfig cfg_;
    HFunction h_;
};

inline double eta(const Problem& pr, double b) { return pr.eta(b); }

/// A value and its first two x-derivatives.
struct Jet {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

/// Quantities at a threshold b > 0 shared by Phi, R, J_d, J_c, F and G.
struct ThresholdTerms {
    double b = 0.0;
    double w_b = 0.0;    // W(b)
    double wp_b = 0.0;   // W'(b)
    double w_mb = 0.0;   // W(-b)
    double wp_mb = 0.0;  // W'(-b)
    double w_ratio = 0.0; // W'(b)/W(b)
    double h_ratio = 0.0; // H'(b)/H(b)
    double denom = 0.0;   // W'(b)/W(b) - H'(b)/H(b)
    HLog h_b;
    double phi_bb = 0.0;  // Phi(b;b)
    double r_bb = 0.0;    // R(b;b)
};

inline constexpr double kDegenerateDenominator = 1e-13;

inline ThresholdTerms threshold_terms(const Problem& pr, double b) {
    if (!(b > 0.0) || !std::isfinite(b))
        throw InvalidParameter("threshold must be finite and > 0");
    ThresholdTerms t;
    t.b = b;
    t.w_b = pr.w(b);
    t.wp_b = pr.wp(b);
    t.w_mb = pr.w(-b);
    t.wp_mb = pr.wp(-b);
    t.h_b = pr.h().log_eval(b);
    t.w_ratio = t.wp_b / t.w_b;
    t.h_ratio = t.h_b.log_derivative;
    t.denom = t.w_ratio - t.h_ratio;
    if (std::abs(t.denom) < kDegenerateDenominator) {
        std::ostringstream os;
        os << "W'/W - H'/H vanishes at b = " << b;
        throw DegenerateInput(os.str(), b);
    }
    t.phi_bb = -(pr.wp0() / t.w_mb) / t.denom;
    t.r_bb = (pr.eta_slope() - pr.eta(b) * t.h_ratio) / t.denom;
    return t;
}

/// A function of the shape shared by every performance function:
///
///   x <= b : a W(x - b)/W(-b) + c W(x)/W(b)
///   x >  b : e eta(x) + d H(x)/H(b)
///
/// With b = 0 only the upper shape is used, including at x = 0.
struct PiecewiseForm {
    double b = 0.0;
    double shifted_w = 0.0; // a
    double w = 0.0;         // c
    double eta_weight = 0.0; // e
    double h = 0.0;          // d
    HLog h_at_b;
};

enum class Branch { lower, upper };

inline Jet eval_branch(const Problem& pr, const PiecewiseForm& f, double x, Branch branch) {
    Jet j;
    if (branch == Branch::lower) {
        const double b = f.b;
        const double ws = f.shifted_w / pr.w(-b);
        const double wc = f.w / pr.w(b);
        j.value = ws * pr.w(x - b) + wc * pr.w(x);
        j.d1 = ws * pr.wp(x - b) + wc * pr.wp(x);
        j.d2 = ws * pr.wpp(x - b) + wc * pr.wpp(x);
        return j;
    }
    const auto hx = pr.h().log_eval(x);
    const double ratio = std::exp(hx.log_value - f.h_at_b.log_value);
    j.value = f.eta_weight * pr.eta(x) + f.h * ratio;
    j.d1 = f.eta_weight * pr.eta_slope() + f.h * ratio * hx.log_derivative;
    j.d2 = f.h * ratio * pr.h().second_ratio(x, hx.log_derivative);
    return j;
}

inline Jet eval_form(const Problem& pr, const PiecewiseForm& f, double x) {
    if (x < 0.0) throw InvalidParameter("performance functions are defined for x >= 0");
    const bool lower = f.b > 0.0 && x <= f.b;
    return eval_branch(pr, f, x, lower ? Branch::lower : Branch::upper);
}

namespace detail {

inline HLog h_at(const Problem& pr, double b) { return pr.h().log_eval(b); }

} // namespace detail

/// Phi(x;b) = E_x[e^{-q tau}] for the refracted process.
inline PiecewiseForm phi_form(const Problem& pr, double b) {
    if (b == 0.0) return {0.0, 0.0, 0.0, 0.0, 1.0, detail::h_at(pr, 0.0)};
    const auto t = threshold_terms(pr, b);
    return {b, 1.0, t.phi_bb, 0.0, t.phi_bb, t.h_b};
}

/// R(x;b), expected discounted dividends until ruin.
inline PiecewiseForm r_form(const Problem& pr, double b) {
    if (b == 0.0) return {0.0, 0.0, 0.0, 1.0, -pr.eta(0.0), detail::h_at(pr, 0.0)};
    const auto t = threshold_terms(pr, b);
    return {b, 0.0, t.r_bb, 1.0, t.r_bb - pr.eta(b), t.h_b};
}

inline double phi(const Problem& pr, double b, double x) {
    return eval_form(pr, phi_form(pr, b), x).value;
}

inline double r_fn(const Problem& pr, double b, double x) {
    return eval_form(pr, r_form(pr, b), x).value;
}

/// J_d(b;b) from its explicit quotient.
inline double j_d_at_threshold(const Problem& pr, const ThresholdTerms& t) {
    return (pr.eta_slope() - pr.eta(t.b) * t.h_ratio + pr.problem().P * pr.wp0() / t.w_mb) /
           t.denom;
}

/// Pure-dividend performance function J_d(.;b), b >= 0, in its by-parts form.
inline PiecewiseForm j_d_form(const Problem& pr, double b) {
    const double P = pr.problem().P;
    if (b == 0.0) return {0.0, 0.0, 0.0, 1.0, -(P + pr.eta(0.0)), detail::h_at(pr, 0.0)};
    const auto t = threshold_terms(pr, b);
    const double jbb = j_d_at_threshold(pr, t);
    return {b, -P, jbb, 1.0, jbb - pr.eta(b), t.h_b};
}

struct Derivatives0 {
    double r = 0.0;   // d/dx R(0;b)
    double phi = 0.0; // d/dx Phi(0;b)
};

/// Analytic x-derivatives of R and Phi at x = 0 from the lower branch.
inline Derivatives0 derivatives_at_zero(const Problem& pr, const ThresholdTerms& t) {
    return {t.r_bb * pr.wp0() / t.w_b, t.wp_mb / t.w_mb + t.phi_bb * pr.wp0() / t.w_b};
}

/// J_c(0;b) = (beta - d/dx R(0;b)) / d/dx Phi(0;b).
inline double j_c_at_zero(const Problem& pr, const ThresholdTerms& t) {
    const auto d0 = derivatives_at_zero(pr, t);
    if (std::abs(d0.phi) < kDegenerateDenominator) {
        std::ostringstream os;
        os << "d/dx Phi(0;b) vanishes at b = " << t.b;
        throw DegenerateInput(os.str(), t.b);
    }
    return (pr.problem().beta - d0.r) / d0.phi;
}

/// J_c(b;b) from its explicit quotient (beta Phi(b;b) + R(b;b) W'(-b)/W(-b)) / d/dx Phi(0;b).
inline double j_c_at_threshold(const Problem& pr, const ThresholdTerms& t) {
    const auto d0 = derivatives_at_zero(pr, t);
    return (pr.problem().beta * t.phi_bb + t.r_bb * t.wp_mb / t.w_mb) / d0.phi;
}

/// Bailout performance function J_c(.;b), b > 0, in its by-parts form.
inline PiecewiseForm j_c_form(const Problem& pr, double b) {
    const auto t = threshold_terms(pr, b);
    const double j0 = j_c_at_zero(pr, t);
    const double jbb = j_c_at_threshold(pr, t);
    return {b, j0, jbb, 1.0, jbb - pr.eta(b), t.h_b};
}

struct JdValue {
    double value = 0.0;
    double x_derivative = 0.0;
};

struct JcValue {
    double value = 0.0;
    double x_derivative = 0.0;
    double j_c_at_zero = 0.0;
};

inline JdValue j_d(const Problem& pr, double b, double x) {
    if (b < 0.0) throw InvalidParameter("j_d requires b >= 0");
    const auto j = eval_form(pr, j_d_form(pr, b), x);
    return {j.value, j.d1};
}

inline JcValue j_c(const Problem& pr, double b, double x) {
    const auto f = j_c_form(pr, b);
    const auto j = eval_form(pr, f, x);
    return {j.value, j.d1, f.shifted_w};
}

enum class Regime { pure_dividend, bailout, liquidation };

inline const char* to_string(Regime r) {
    switch (r) {
    case Regime::pure_dividend: return "pure_dividend";
    case Regime::bailout: return "bailout";
    case Regime::liquidation: return "liquidation";
    }
    return "unknown";
}

struct ValuePoint {
    double value = 0.0;
    double derivative = 0.0;
};

/// An optimal value function: immutable after construction, cheap to copy.
class ValueFn {
public:
    ValueFn(Problem problem, Regime regime, PiecewiseForm form)
        : problem_(std::move(problem)), regime_(regime), form_(form) {}

    Regime regime() const noexcept { return regime_; }
    double threshold() const noexcept { return form_.b; }
    const Problem& problem() const noexcept { return problem_; }
    const PiecewiseForm& form() const noexcept { return form_; }

    ValuePoint eval(double x) const {
        const auto j = eval_form(problem_, form_, x);
        return {j.value, j.d1};
    }

    Jet jet(double x) const { return eval_form(problem_, form_, x); }

    /// Evaluates one branch formula regardless of which side of b x lies on.
    Jet branch(double x, Branch which) const { return eval_branch(problem_, form_, x, which); }

private:
    Problem problem_;
    Regime regime_;
    PiecewiseForm form_;
};

inline ValueFn build_v_d(const Problem& pr, double b_d) {
    if (b_d < 0.0) throw InvalidParameter("b_d must be >= 0");
    return ValueFn(pr, b_d > 0.0 ? Regime::pure_dividend : Regime::liquidation, j_d_form(pr, b_d));
}

inline ValueFn build_v_c(const Problem& pr, double b_c) {
    if (!(b_c > 0.0)) throw InvalidParameter("b_c must be > 0");
    return ValueFn(pr, Regime::bailout, j_c_form(pr, b_c));
}

/// V_d written with the smooth-fit coefficients valid at the optimal threshold:
///   x <= b_d: -P W(x-b_d)/W(-b_d) + (1 + P W'(0)/W(-b_d)) W(x)/W'(b_d)
///   x >  b_d: eta(x) + q/(q+K) H(x)/H'(b_d)
/// and, for b_d = 0, eta(x) - (P + eta(0)) H(x)/H(0).
inline double v_d_explicit(const Problem& pr, double b_d, double x) {
    const double P = pr.problem().P;
    const double q = pr.model().q();
    const double K = pr.problem().K;
    if (b_d == 0.0) {
        const auto h0 = pr.h().log_eval(0.0);
        const auto hx = pr.h().log_eval(x);
        return pr.eta(x) - (P + pr.eta(0.0)) * std::exp(hx.log_value - h0.log_value);
    }
    if (x <= b_d) {
        const double wmb = pr.w(-b_d);
        return -P * pr.w(x - b_d) / wmb + (1.0 + P * pr.wp0() / wmb) * pr.w(x) / pr.wp(b_d);
    }
    const auto hb = pr.h().log_eval(b_d);
    const auto hx = pr.h().log_eval(x);
    // H(x)/H'(b) = exp(log H(x) - log H(b)) / (H'(b)/H(b))
    return pr.eta(x) + q / (q + K) * std::exp(hx.log_value - hb.log_value) / hb.log_derivative;
}

/// V_c with the explicit two-term W combination below b_c and the eta/H form above.
inline double v_c_explicit(const Problem& pr, double b_c, double x) {
    const double beta = pr.problem().beta;
    const double q = pr.model().q();
    const double K = pr.problem().K;
    if (x <= b_c) {
        const double wp0 = pr.wp0();
        const double wpb = pr.wp(b_c);
        const double wpmb = pr.wp(-b_c);
        return (pr.w(x) * (wpmb - beta * wp0) + pr.w(x - b_c) * (beta * wpb - wp0)) /
               (wpmb * wpb - wp0 * wp0);
    }
    const auto hb = pr.h().log_eval(b_c);
    const auto hx = pr.h().log_eval(x);
    return pr.eta(x) + q / (q + K) * std::exp(hx.log_value - hb.log_value) / hb.log_derivative;
}

} // namespace acdiv
