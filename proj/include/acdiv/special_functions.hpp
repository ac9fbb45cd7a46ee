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
#include <limits>
#include <optional>
#include <sstream>

#include "acdiv/errors.hpp"
#include "acdiv/params.hpp"
#include "acdiv/quadrature.hpp"

namespace acdiv {

// ---------------------------------------------------------------------------
// Brownian q-scale function
//
//   W(x) = (2/Delta) e^{-mu x / sigma^2} sinh(Delta x / sigma^2)
//        = (e^{(Delta-mu) x/sigma^2} - e^{-(Delta+mu) x/sigma^2}) / Delta
//
// Both exponents are carried separately so that neither a premature overflow
// in sinh nor cancellation near x = 0 (handled with expm1) occurs.
// ---------------------------------------------------------------------------

namespace detail {

/// Largest exponent whose exp() is a finite double, with some headroom.
inline constexpr double kMaxExponent = 700.0;

inline double checked_exp(double e, const char* what, double x) {
    if (e > kMaxExponent) {
        std::ostringstream os;
        os << what << " overflows at x = " << x;
        throw RangeError(os.str());
    }
    return std::exp(e);
}

struct ScaleRates {
    double up;   // (Delta - mu) / sigma^2 > 0
    double down; // (Delta + mu) / sigma^2 > 0
};

inline ScaleRates scale_rates(const ModelParams& m) {
    return {(m.delta() - m.mu()) / m.sigma2(), (m.delta() + m.mu()) / m.sigma2()};
}

} // namespace detail

inline double scale_w(const ModelParams& m, double x) {
    if (x == 0.0) return 0.0;
    const auto r = detail::scale_rates(m);
    const double two_delta = r.up + r.down; // 2 Delta / sigma^2
    if (x > 0.0) {
        // e^{up x} (1 - e^{-2 Delta x / sigma^2})
        return detail::checked_exp(r.up * x, "scale_w", x) * -std::expm1(-two_delta * x) /
               m.delta();
    }
    // e^{-down x} (e^{2 Delta x / sigma^2} - 1), negative for x < 0
    return detail::checked_exp(-r.down * x, "scale_w", x) * std::expm1(two_delta * x) / m.delta();
}

inline double scale_w_prime(const ModelParams& m, double x) {
    const auto r = detail::scale_rates(m);
    return (r.up * detail::checked_exp(r.up * x, "scale_w_prime", x) +
            r.down * detail::checked_exp(-r.down * x, "scale_w_prime", x)) /
           m.delta();
}

inline double scale_w_second(const ModelParams& m, double x) {
    const auto r = detail::scale_rates(m);
    return (r.up * r.up * detail::checked_exp(r.up * x, "scale_w_second", x) -
            r.down * r.down * detail::checked_exp(-r.down * x, "scale_w_second", x)) /
           m.delta();
}

// ---------------------------------------------------------------------------
// Parabolic cylinder function of negative order
//
//   D_{-lambda}(x) = e^{-x^2/4} / Gamma(lambda) * M(lambda, x)
//   M(a, x)        = int_0^inf t^{a-1} e^{-x t - t^2/2} dt
// ---------------------------------------------------------------------------

/// log M(a, x) together with its relative quadrature error.
struct LogMoment {
    double log_value = 0.0;
    double rel_error = 0.0;
};

/// Computes log M(a, x) for a > 0 by adaptive quadrature.
///
/// The integration variable is rescaled (t = s / x for x > 1) so the
/// integrand is O(1) near its peak, and the integrand is shifted by its
/// log-maximum, which keeps the result in log space for large |x|. On [0, 1]
/// the substitution s = u^{1/a} removes the s^{a-1} singularity when a < 1.
inline LogMoment log_moment(double a, double x, const QuadratureConfig& cfg = {}) {
    if (!(a > 0.0)) throw InvalidParameter("log_moment requires a > 0");
    cfg.validate();

    const double c = x > 1.0 ? 1.0 / x : 1.0;
    const double alpha = x * c;
    const double kappa = c * c;
    auto log_g = [&](double s) { return (a - 1.0) * std::log(s) - alpha * s - 0.5 * kappa * s * s; };

    // Interior local maximum of log_g, if any: kappa s^2 + alpha s - (a - 1) = 0.
    std::optional<double> peak;
    const double disc = alpha * alpha + 4.0 * kappa * (a - 1.0);
    if (disc >= 0.0) {
        const double s = (-alpha + std::sqrt(disc)) / (2.0 * kappa);
        if (s > 0.0) peak = s;
    }
    double shift = log_g(1.0);
    if (peak) shift = std::max(shift, log_g(*peak));

    auto g = [&](double s) { return s > 0.0 ? std::exp(log_g(s) - shift) : 0.0; };

    QuadResult head;
    if (a < 1.0) {
        const double inv_a = 1.0 / a;
        head = integrate_endpoint_singular(
            [&](double u) {
                const double s = std::pow(u, inv_a);
                return std::exp(-alpha * s - 0.5 * kappa * s * s - shift);
            },
            0.0, 1.0, cfg);
        head.value *= inv_a;
        head.error *= inv_a;
    } else {
        head = integrate_endpoint_singular(g, 0.0, 1.0, cfg);
    }

    double upper = 0.0;
    if (cfg.truncation == TruncationPolicy::fixed_upper_limit) {
        upper = std::max(cfg.fixed_upper_limit, (peak ? *peak : 1.0) + 40.0);
    } else {
        const double log_floor = std::log(cfg.abs_tol * 1e-3);
        upper = std::max(1.0, peak ? *peak : 1.0) + 1.0;
        while (log_g(upper) - shift > log_floor) upper *= 2.0;
    }

    QuadResult body;
    if (peak && *peak > 1.0 && *peak < upper) {
        const auto left = integrate(g, 1.0, *peak, cfg);
        const auto right = integrate(g, *peak, upper, cfg);
        body = {left.value + right.value, left.error + right.error};
    } else {
        body = integrate(g, 1.0, upper, cfg);
    }

    const double total = head.value + body.value;
    if (!(total > 0.0)) {
        std::ostringstream os;
        os << "log_moment(" << a << ", " << x << ") produced a non-positive integral";
        throw AccuracyError(os.str(), head.error + body.error);
    }
    return {a * std::log(c) + shift + std::log(total), (head.error + body.error) / total};
}

/// D_{-lambda}(x) with its estimated absolute error.
struct PcfValue {
    double value = 0.0;
    double error = 0.0;
};

inline PcfValue pcf_d_eval(double lambda, double x, const QuadratureConfig& cfg = {}) {
    if (!(lambda > 0.0)) throw InvalidParameter("pcf_d requires lambda > 0");
    const auto mom = log_moment(lambda, x, cfg);
    const double log_d = -0.25 * x * x + mom.log_value - std::lgamma(lambda);
    const double d = detail::checked_exp(log_d, "pcf_d", x);
    return {d, d * mom.rel_error};
}

inline double pcf_d(double lambda, double x, const QuadratureConfig& cfg = {}) {
    return pcf_d_eval(lambda, x, cfg).value;
}

/// d/dx D_{-lambda}(x) = -(x/2) D_{-lambda}(x) - e^{-x^2/4} M(lambda + 1, x) / Gamma(lambda).
inline double pcf_d_dx(double lambda, double x, const QuadratureConfig& cfg = {}) {
    if (!(lambda > 0.0)) throw InvalidParameter("pcf_d_dx requires lambda > 0");
    const double lg = std::lgamma(lambda);
    const auto m0 = log_moment(lambda, x, cfg);
    const auto m1 = log_moment(lambda + 1.0, x, cfg);
    const double d = detail::checked_exp(-0.25 * x * x + m0.log_value - lg, "pcf_d_dx", x);
    const double tail = detail::checked_exp(-0.25 * x * x + m1.log_value - lg, "pcf_d_dx", x);
    return -0.5 * x * d - tail;
}

// ---------------------------------------------------------------------------
// H_{K,S}(x) = e^{K y^2 / (2 sigma^2)} D_{-q/K}(y sqrt(2K) / sigma),  y = x - (mu - S)/K
//
// The Gaussian prefactor cancels the e^{-z^2/4} of D, so
//   H(x)  = M(q/K, z) / Gamma(q/K)
//   H'(x) = -(sqrt(2K)/sigma) M(q/K + 1, z) / Gamma(q/K)
// and H is positive and strictly decreasing.
// ---------------------------------------------------------------------------

/// H in log space: log H(x) and the log-derivative H'(x)/H(x).
struct HLog {
    double log_value = 0.0;
    double log_derivative = 0.0;
};

/// H and H' as plain doubles.
struct HValue {
    double value = 0.0;
    double derivative = 0.0;
};

class HFunction {
public:
    HFunction(const ModelParams& m, double K, double S, QuadratureConfig cfg = {})
        : m_(m), K_(K), S_(S), cfg_(cfg) {
        if (!(K > 0.0)) throw InvalidParameter("H_{K,S} requires K > 0 (K = 0 is unsupported)");
        if (!(S >= 0.0)) throw InvalidParameter("H_{K,S} requires S >= 0");
        lambda_ = m.q() / K;
        log_gamma_ = std::lgamma(lambda_);
        center_ = (m.mu() - S) / K;
        z_scale_ = std::sqrt(2.0 * K) / m.sigma();
    }

    double lambda() const noexcept { return lambda_; }
    /// Argument of D_{-lambda} at x.
    double z(double x) const noexcept { return (x - center_) * z_scale_; }

    HLog log_eval(double x) const {
        const double zx = z(x);
        const auto m0 = log_moment(lambda_, zx, cfg_);
        const auto m1 = log_moment(lambda_ + 1.0, zx, cfg_);
        return {m0.log_value - log_gamma_, -z_scale_ * std::exp(m1.log_value - m0.log_value)};
    }

    HValue eval(double x) const {
        const auto l = log_eval(x);
        const double v = detail::checked_exp(l.log_value, "H", x);
        return {v, v * l.log_derivative};
    }

    /// H''(x)/H(x) from the ODE (sigma^2/2) H'' + (mu - K x - S) H' - q H = 0.
    double second_ratio(double x, double log_derivative) const noexcept {
        return 2.0 / m_.sigma2() * (m_.q() - (m_.mu() - K_ * x - S_) * log_derivative);
    }

    const ModelParams& model() const noexcept { return m_; }
    double K() const noexcept { return K_; }
    double S() const noexcept { return S_; }

private:
    ModelParams m_;
    double K_;
    double S_;
    QuadratureConfig cfg_;
    double lambda_ = 0.0;
    double log_gamma_ = 0.0;
    double center_ = 0.0;
    double z_scale_ = 0.0;
};

/// H_{K,S}(x) and its derivative. Throws RangeError if H(x) is not representable.
inline HValue h_fn(const ModelParams& m, double K, double S, double x,
                   const QuadratureConfig& cfg = {}) {
    return HFunction(m, K, S, cfg).eval(x);
}

} // namespace acdiv
