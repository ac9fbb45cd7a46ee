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
#include <string>

#include "acdiv/errors.hpp"

namespace acdiv {

/// Arithmetic Brownian surplus dX = mu dt + sigma dB, discounted at rate q.
///
/// Construct through ModelParams::make (volatility) or ModelParams::from_variance.
/// The derived quantity delta = sqrt(mu^2 + 2 sigma^2 q) is fixed at construction.
class ModelParams {
public:
    static ModelParams make(double mu, double sigma, double q) {
        if (!(mu > 0.0) || !std::isfinite(mu))
            throw InvalidParameter("mu must be finite and > 0, got " + std::to_string(mu));
        if (!(sigma > 0.0) || !std::isfinite(sigma))
            throw InvalidParameter("sigma must be finite and > 0, got " + std::to_string(sigma));
        if (!(q > 0.0) || !std::isfinite(q))
            throw InvalidParameter("q must be finite and > 0, got " + std::to_string(q));
        return ModelParams(mu, sigma, q);
    }

    static ModelParams from_variance(double mu, double sigma2, double q) {
        if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
            throw InvalidParameter("sigma2 must be finite and > 0, got " + std::to_string(sigma2));
        return make(mu, std::sqrt(sigma2), q);
    }

    double mu() const noexcept { return mu_; }
    double sigma() const noexcept { return sigma_; }
    double sigma2() const noexcept { return sigma2_; }
    double q() const noexcept { return q_; }
    double delta() const noexcept { return delta_; }

private:
    ModelParams(double mu, double sigma, double q)
        : mu_(mu), sigma_(sigma), sigma2_(sigma * sigma), q_(q),
          delta_(std::sqrt(mu * mu + 2.0 * sigma2_ * q)) {}

    double mu_;
    double sigma_;
    double sigma2_;
    double q_;
    double delta_;
};

/// Dividend-rate bound K x + S, injection cost beta and ruin penalty P.
struct ProblemParams {
    double K = 0.0;
    double S = 0.0;
    double beta = 0.0;
    double P = 0.0;

    /// Throws InvalidParameter naming the first violated constraint.
    void validate() const {
        if (!(K > 0.0) || !std::isfinite(K))
            throw InvalidParameter("K must be finite and > 0 (K = 0 is unsupported), got " +
                                   std::to_string(K));
        if (!(S >= 0.0) || !std::isfinite(S))
            throw InvalidParameter("S must be finite and >= 0, got " + std::to_string(S));
        if (!(beta > 1.0) || !std::isfinite(beta))
            throw InvalidParameter("beta must be finite and > 1, got " + std::to_string(beta));
        if (!(P >= 0.0) || !std::isfinite(P))
            throw InvalidParameter("P must be finite and >= 0, got " + std::to_string(P));
    }

    ProblemParams with_beta(double b) const { auto c = *this; c.beta = b; return c; }
    ProblemParams with_penalty(double p) const { auto c = *this; c.P = p; return c; }
};

inline ProblemParams make_problem(double K, double S, double beta, double P) {
    ProblemParams p{K, S, beta, P};
    p.validate();
    return p;
}

} // namespace acdiv
