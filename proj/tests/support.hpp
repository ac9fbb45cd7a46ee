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
#include <random>
#include <vector>

#include "acdiv/params.hpp"

namespace acdiv::testing {

/// mu = 0.5, sigma^2 = 1, q = 0.4: the model behind most worked examples.
inline ModelParams base_model() { return ModelParams::from_variance(0.5, 1.0, 0.4); }

/// K = 1, S = 2 with the given beta and P.
inline ProblemParams base_problem(double beta, double P) { return make_problem(1.0, 2.0, beta, P); }

/// A model whose favourability margin is negative for K = 1, S = 2, P = 0.5.
inline ModelParams unfavourable_model() { return ModelParams::from_variance(0.5, 25.0, 0.8); }

/// {0, b/4, b/2, 3b/4, b-, b, b+, 2b, 5b} with b-/+ = b (1 -/+ 1e-6).
inline std::vector<double> junction_grid(double b) {
    return {0.0, 0.25 * b, 0.5 * b, 0.75 * b, b * (1 - 1e-6), b, b * (1 + 1e-6), 2 * b, 5 * b};
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

struct Instance {
    ModelParams model;
    ProblemParams problem;
};

/// mu, sigma^2, q, K log-uniform on [0.1,1], [0.5,4], [0.1,1], [0.2,5];
/// S, P uniform on [0,5], [0,3]; beta uniform on (1,4].
inline Instance random_instance(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto log_uniform = [&](double lo, double hi) { return lo * std::exp(u(rng) * std::log(hi / lo)); };
    const double mu = log_uniform(0.1, 1.0);
    const double sigma2 = log_uniform(0.5, 4.0);
    const double q = log_uniform(0.1, 1.0);
    const double K = log_uniform(0.2, 5.0);
    const double S = 5.0 * u(rng);
    const double beta = 4.0 - 3.0 * u(rng);
    const double P = 3.0 * u(rng);
    return {ModelParams::from_variance(mu, sigma2, q), make_problem(K, S, beta, P)};
}

} // namespace acdiv::testing
