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

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "acdiv/errors.hpp"

namespace acdiv {

enum class TruncationPolicy { fixed_upper_limit, tail_bound_adaptive };

struct QuadratureConfig {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    int max_subdivisions = 1024;
    TruncationPolicy truncation = TruncationPolicy::tail_bound_adaptive;
    /// Upper limit (in the scaled variable) used by TruncationPolicy::fixed_upper_limit.
    double fixed_upper_limit = 80.0;

    void validate() const {
        if (!(abs_tol > 0.0) || !(rel_tol > 0.0))
            throw InvalidParameter("quadrature tolerances must be > 0");
        if (max_subdivisions < 1)
            throw InvalidParameter("max_subdivisions must be >= 1");
    }
};

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
};

namespace detail {

inline unsigned max_depth_for(int max_subdivisions) {
    return static_cast<unsigned>(std::ceil(std::log2(std::max(2, max_subdivisions))));
}

inline void check_converged(double value, double error, double a, double b,
                            const QuadratureConfig& cfg) {
    if (!std::isfinite(value) || error > std::max(cfg.abs_tol, cfg.rel_tol * std::abs(value))) {
        std::ostringstream os;
        os << "quadrature on [" << a << ", " << b << "] did not converge: estimate " << value
           << ", error " << error;
        throw AccuracyError(os.str(), error);
    }
}

} // namespace detail

/// Adaptive 15-point Gauss-Kronrod on the finite interval [a, b].
///
/// Throws AccuracyError when the Kronrod error estimate exceeds
/// max(abs_tol, rel_tol * |value|) after max_subdivisions bisections.
template <class F>
QuadResult integrate(F&& f, double a, double b, const QuadratureConfig& cfg) {
    if (b <= a) return {};
    double error = 0.0;
    double l1 = 0.0;
    // Boost's per-interval stopping rule can overshoot the global budget slightly.
    const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        f, a, b, detail::max_depth_for(cfg.max_subdivisions), 0.1 * cfg.rel_tol, &error, &l1);
    detail::check_converged(value, error, a, b, cfg);
    return {value, error};
}

/// Tanh-sinh quadrature on [a, b]; tolerates algebraic endpoint singularities.
template <class F>
QuadResult integrate_endpoint_singular(F&& f, double a, double b, const QuadratureConfig& cfg) {
    if (b <= a) return {};
    double error = 0.0;
    double l1 = 0.0;
    std::size_t levels = 0;
    // The integrator caches its abscissae and extends them lazily, so it is
    // kept per thread and per refinement depth.
    using Integrator = boost::math::quadrature::tanh_sinh<double>;
    thread_local std::map<unsigned, Integrator> integrators;
    const unsigned depth = detail::max_depth_for(cfg.max_subdivisions);
    auto it = integrators.find(depth);
    if (it == integrators.end()) it = integrators.emplace(depth, Integrator(depth)).first;
    const double value = it->second.integrate(f, a, b, 0.1 * cfg.rel_tol, &error, &l1, &levels);
    detail::check_converged(value, error, a, b, cfg);
    return {value, error};
}

} // namespace acdiv
