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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "acdiv/simulate.hpp"
#include "acdiv/thresholds.hpp"
#include "acdiv/value_functions.hpp"

namespace acdiv {

/// Acceptance thresholds for a verification run.
struct VerifyTolerances {
    double hjb = 1e-6;
    double c1_gap = 1e-8;
    double c2_gap = 1e-6;
    double boundary = 1e-8;
    double concavity = 1e-8;      ///< f'' above this counts as a violation
    double suboptimality = 1e-8;  ///< non-selected regime may exceed V by at most this
    double h_identity = 1e-6;     ///< ODE-based H''/H versus finite differences
    double mc_sigmas = 3.0;
};

struct VerifyConfig {
    std::size_t grid_points = 400;
    double x_max = 0.0;              ///< 0: max(5, 5 b)
    bool run_mc = true;
    SimConfig sim;
    std::vector<double> mc_points;   ///< empty: {0, 0.5, b, 2b, 5}
    VerifyTolerances tol;
    RootOptions roots;
};

struct McComparison {
    std::string functional;  ///< "J_d" or "J_c"
    double x = 0.0;
    double analytic = 0.0;
    double mc_mean = 0.0;
    double mc_stderr = 0.0;
    double tail_bound = 0.0;
    double discretization_bound = 0.0;
    bool pass = false;

    bool recompute_pass(double sigmas) const noexcept {
        return std::abs(mc_mean - analytic) <= sigmas * mc_stderr + tail_bound + discretization_bound;
    }
};

struct VerificationReport {
    std::string verdict;
    std::string regime;
    double threshold = 0.0;
    bool favourable = false;
    double b_d = 0.0;
    double b_c = 0.0;
    double gamma = 0.0;
    double critical_beta = 0.0;
    double critical_P = 0.0;

    double max_hjb_residual = 0.0;
    double junction_c1_gap = 0.0;
    double junction_c2_gap = 0.0;
    std::map<std::string, double> boundary_residuals;
    long concavity_violations = 0;
    double suboptimality_gap = 0.0;       ///< max over grid of (other regime) - V
    double h_identity_error = 0.0;
    bool dichotomy_consistent = true;     ///< beta and P criteria agree
    bool b_c_below_gamma = true;
    std::vector<McComparison> mc_comparisons;
    std::size_t grid_points = 0;
    VerifyTolerances tolerances;

    bool mc_passed() const noexcept {
        return std::all_of(mc_comparisons.begin(), mc_comparisons.end(),
                           [&](const McComparison& c) { return c.recompute_pass(tolerances.mc_sigmas); });
    }

    bool boundary_passed() const {
        return std::all_of(boundary_residuals.begin(), boundary_residuals.end(),
                           [&](const auto& kv) { return kv.first == "max" ? std::abs(kv.second) <= tolerances.boundary
                                                                          : kv.second <= tolerances.boundary; });
    }

    /// Every check, recomputed from the stored numbers and tolerances.
    bool passed() const {
        return max_hjb_residual <= tolerances.hjb && junction_c1_gap <= tolerances.c1_gap &&
               junction_c2_gap <= tolerances.c2_gap && boundary_passed() && concavity_violations == 0 &&
               suboptimality_gap <= tolerances.suboptimality && h_identity_error <= tolerances.h_identity &&
               dichotomy_consistent && b_c_below_gamma && mc_passed();
    }

    /// Names of the failing checks (empty when passed()).
    std::vector<std::string> failures() const {
        std::vector<std::string> f;
        if (!(max_hjb_residual <= tolerances.hjb)) f.emplace_back("hjb_residual");
        if (!(junction_c1_gap <= tolerances.c1_gap)) f.emplace_back("junction_c1_gap");
        if (!(junction_c2_gap <= tolerances.c2_gap)) f.emplace_back("junction_c2_gap");
        if (!boundary_passed()) f.emplace_back("boundary_residuals");
        if (concavity_violations != 0) f.emplace_back("concavity");
        if (!(suboptimality_gap <= tolerances.suboptimality)) f.emplace_back("suboptimality");
        if (!(h_identity_error <= tolerances.h_identity)) f.emplace_back("h_identity");
        if (!dichotomy_consistent) f.emplace_back("dichotomy_consistent");
        if (!b_c_below_gamma) f.emplace_back("b_c_below_gamma");
        if (!mc_passed()) f.emplace_back("mc_comparisons");
        return f;
    }
};

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

namespace detail {

inline void geometric_fill(std::vector<double>& out, double origin, double sign, double from,
                           double to, std::size_t n) {
    if (n == 0 || !(to > from)) return;
    const double r = std::log(to / from);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
        out.push_back(origin + sign * from * std::exp(r * t));
    }
}

} // namespace detail

/// About n points on [0, x_max], clustered geometrically towards 0 and towards
/// both sides of the threshold b; points within 1e-6 of b are excluded.
inline std::vector<double> verification_grid(double b, double x_max, std::size_t n = 400) {
    if (!(x_max > 0.0)) throw InvalidParameter("x_max must be > 0");
    std::vector<double> g{0.0};
    constexpr double gap = 1e-6;
    if (b > 0.0) {
        const std::size_t k = std::max<std::size_t>(n / 4, 2);
        detail::geometric_fill(g, 0.0, 1.0, std::min(gap, 0.25 * b), 0.5 * b, k);
        detail::geometric_fill(g, b, -1.0, gap, 0.5 * b, k);
        detail::geometric_fill(g, b, 1.0, gap, std::max(0.5 * b, 2.0 * gap), k);
        const double from = 1.5 * b;
        if (x_max > from) {
            const std::size_t rest = n > 3 * k + 1 ? n - 3 * k - 1 : 2;
            for (std::size_t i = 1; i <= rest; ++i)
                g.push_back(from + (x_max - from) * static_cast<double>(i) / static_cast<double>(rest));
        }
    } else {
        detail::geometric_fill(g, 0.0, 1.0, gap, x_max, n - 1);
    }
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    g.erase(std::remove_if(g.begin(), g.end(),
                           [&](double x) { return x < 0.0 || x > x_max || (b > 0.0 && std::abs(x - b) < gap); }),
            g.end());
    return g;
}

// ---------------------------------------------------------------------------
// Individual checks
// ---------------------------------------------------------------------------

/// Branch used for x: lower on [0, b], upper above (upper everywhere when b = 0).
inline Branch branch_of(const PiecewiseForm& f, double x) noexcept {
    return f.b > 0.0 && x <= f.b ? Branch::lower : Branch::upper;
}

/// (A - q) f + sup_{0 <= l <= Kx+S} l (1 - f') at one point, from an analytic jet.
inline double hjb_residual_at(const Problem& pr, double x, const Jet& j) {
    const auto& m = pr.model();
    const auto& p = pr.problem();
    const double control = (p.K * x + p.S) * std::max(0.0, 1.0 - j.d1);
    return m.mu() * j.d1 + 0.5 * m.sigma2() * j.d2 - m.q() * j.value + control;
}

/// Max |HJB residual| over the grid, each point evaluated on its own branch.
inline double hjb_residual(const ValueFn& v, const std::vector<double>& grid) {
    double worst = 0.0;
    for (double x : grid) {
        const Jet j = v.branch(x, branch_of(v.form(), x));
        worst = std::max(worst, std::abs(hjb_residual_at(v.problem(), x, j)));
    }
    return worst;
}

struct JunctionGaps {
    double c0 = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
};

/// One-sided value/derivative mismatches at the threshold (all zero when b = 0).
inline JunctionGaps junction_gaps(const ValueFn& v) {
    const double b = v.threshold();
    if (!(b > 0.0)) return {};
    const Jet lo = v.branch(b, Branch::lower);
    const Jet hi = v.branch(b, Branch::upper);
    return {std::abs(lo.value - hi.value), std::abs(lo.d1 - hi.d1), std::abs(lo.d2 - hi.d2)};
}

/// -(f(0)+P), f'(0)-beta and their max.
inline std::map<std::string, double> boundary_check(const ValueFn& v, const ProblemParams& p) {
    const auto e = v.eval(0.0);
    const double a = -(e.value + p.P);
    const double c = e.derivative - p.beta;
    return {{"value_plus_penalty", a}, {"slope_minus_beta", c}, {"max", std::max(a, c)}};
}

/// Grid points where f'' (central difference of the analytic f' along the
/// point's own branch) exceeds tol.
inline long concavity_violations(const ValueFn& v, const std::vector<double>& grid, double tol) {
    long bad = 0;
    for (double x : grid) {
        const Branch br = branch_of(v.form(), x);
        const double h = 1e-5 * std::max(1.0, x);
        const double lo = std::max(0.0, x - h);
        const double hi = x + h;
        const double f2 = (v.branch(hi, br).d1 - v.branch(lo, br).d1) / (hi - lo);
        if (f2 > tol) ++bad;
    }
    return bad;
}

/// Largest relative mismatch between the ODE expression for H''/H and a
/// finite difference of the analytic H'/H, over the given points.
inline double h_identity_error(const Problem& pr, const std::vector<double>& points) {
    auto ld = [&](double x) { return pr.h().log_eval(x).log_derivative; };
    double worst = 0.0;
    for (double x : points) {
        const double h = 1e-3 * std::max(1.0, x);
        const double d = x >= 2.0 * h
                             ? (ld(x - 2 * h) - 8 * ld(x - h) + 8 * ld(x + h) - ld(x + 2 * h)) / (12 * h)
                             : (-25 * ld(x) + 48 * ld(x + h) - 36 * ld(x + 2 * h) + 16 * ld(x + 3 * h) -
                                3 * ld(x + 4 * h)) / (12 * h);
        const double r = ld(x);
        const double fd = d + r * r;  // (log H)'' + ((log H)')^2
        const double ode = pr.h().second_ratio(x, r);
        worst = std::max(worst, std::abs(fd - ode) / std::max(1.0, std::abs(ode)));
    }
    return worst;
}

/// max over grid of (w(x) - v(x)).
inline double excess_over(const ValueFn& w, const ValueFn& v, const std::vector<double>& grid) {
    double worst = -std::numeric_limits<double>::infinity();
    for (double x : grid) worst = std::max(worst, w.eval(x).value - v.eval(x).value);
    return worst;
}

// ---------------------------------------------------------------------------
// Full report
// ---------------------------------------------------------------------------

inline McComparison compare_mc(const Problem& pr, const ValueFn& v, double x, const VerifyConfig& cfg) {
    McComparison c;
    c.x = x;
    c.analytic = v.eval(x).value;
    const McEstimate e = v.regime() == Regime::bailout
                             ? mc_j_c(pr.model(), pr.problem(), v.threshold(), x, cfg.sim)
                             : mc_j_d(pr.model(), pr.problem(), v.threshold(), x, cfg.sim);
    c.functional = v.regime() == Regime::bailout ? "J_c" : "J_d";
    c.mc_mean = e.mean;
    c.mc_stderr = e.std_error;
    c.tail_bound = e.tail_bound;
    c.discretization_bound = e.discretization_bound;
    c.pass = c.recompute_pass(cfg.tol.mc_sigmas);
    return c;
}

/// Solves the dichotomy and checks the selected value function against the
/// HJB equation, boundary conditions, smooth fit, concavity, the other
/// regime and (optionally) Monte Carlo. Failing checks are report entries.
inline VerificationReport full_report(const Problem& pr, const VerifyConfig& cfg = {}) {
    VerificationReport r;
    r.tolerances = cfg.tol;
    const ThresholdSolution s = decide(pr, cfg.roots);
    r.verdict = to_string(s.verdict);
    r.favourable = s.favourable;
    r.b_d = s.b_d;
    r.b_c = s.b_c;
    r.gamma = s.gamma;
    r.critical_beta = s.critical_beta;
    r.critical_P = s.critical_P;
    r.dichotomy_consistent = s.criteria_consistent();
    r.b_c_below_gamma = s.b_c < s.gamma;

    const ValueFn v = build_value(pr, s);
    r.regime = to_string(v.regime());
    r.threshold = v.threshold();
    const double x_max = cfg.x_max > 0.0 ? cfg.x_max : std::max(5.0, 5.0 * v.threshold());
    const auto grid = verification_grid(v.threshold(), x_max, cfg.grid_points);
    r.grid_points = grid.size();

    r.max_hjb_residual = hjb_residual(v, grid);
    const auto gaps = junction_gaps(v);
    r.junction_c1_gap = gaps.c1;
    r.junction_c2_gap = gaps.c2;
    r.boundary_residuals = boundary_check(v, pr.problem());
    r.concavity_violations = concavity_violations(v, grid, cfg.tol.concavity);

    const ValueFn other = v.regime() == Regime::bailout ? build_v_d(pr, s.b_d) : build_v_c(pr, s.b_c);
    r.suboptimality_gap = std::max(0.0, excess_over(other, v, grid));

    const double hb = std::max(v.threshold(), 1.0);
    r.h_identity_error = h_identity_error(pr, {0.0, 0.5 * hb, hb, 2.0 * hb, 5.0 * hb});

    if (cfg.run_mc) {
        std::vector<double> pts = cfg.mc_points;
        if (pts.empty()) {
            const double b = v.threshold();
            pts = {0.0, 0.5, b, 2.0 * b, 5.0};
            std::sort(pts.begin(), pts.end());
            pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        }
        for (double x : pts) r.mc_comparisons.push_back(compare_mc(pr, v, x, cfg));
    }
    return r;
}

inline VerificationReport full_report(const ModelParams& m, const ProblemParams& p, const SimConfig& sim) {
    VerifyConfig cfg;
    cfg.sim = sim;
    return full_report(Problem(m, p), cfg);
}

// ---------------------------------------------------------------------------
// Serialization: numbers are stored as "%.17g" strings so they round-trip.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw InvalidParameter("not a number: '" + s + "'");
    return v;
}

inline nlohmann::json to_json(const VerifyTolerances& t) {
    return {{"hjb", format_double(t.hjb)},
            {"c1_gap", format_double(t.c1_gap)},
            {"c2_gap", format_double(t.c2_gap)},
            {"boundary", format_double(t.boundary)},
            {"concavity", format_double(t.concavity)},
            {"suboptimality", format_double(t.suboptimality)},
            {"h_identity", format_double(t.h_identity)},
            {"mc_sigmas", format_double(t.mc_sigmas)}};
}

inline nlohmann::json to_json(const VerificationReport& r) {
    nlohmann::json j;
    j["verdict"] = r.verdict;
    j["regime"] = r.regime;
    j["threshold"] = format_double(r.threshold);
    j["favourable"] = r.favourable;
    j["b_d"] = format_double(r.b_d);
    j["b_c"] = format_double(r.b_c);
    j["gamma"] = format_double(r.gamma);
    j["critical_beta"] = format_double(r.critical_beta);
    j["critical_P"] = format_double(r.critical_P);
    j["max_hjb_residual"] = format_double(r.max_hjb_residual);
    j["junction_c1_gap"] = format_double(r.junction_c1_gap);
    j["junction_c2_gap"] = format_double(r.junction_c2_gap);
    nlohmann::json b = nlohmann::json::object();
    for (const auto& [k, v] : r.boundary_residuals) b[k] = format_double(v);
    j["boundary_residuals"] = b;
    j["concavity_violations"] = r.concavity_violations;
    j["suboptimality_gap"] = format_double(r.suboptimality_gap);
    j["h_identity_error"] = format_double(r.h_identity_error);
    j["dichotomy_consistent"] = r.dichotomy_consistent;
    j["b_c_below_gamma"] = r.b_c_below_gamma;
    nlohmann::json mc = nlohmann::json::array();
    for (const auto& c : r.mc_comparisons)
        mc.push_back({{"functional", c.functional},
                      {"x", format_double(c.x)},
                      {"analytic", format_double(c.analytic)},
                      {"mc_mean", format_double(c.mc_mean)},
                      {"mc_stderr", format_double(c.mc_stderr)},
                      {"tail_bound", format_double(c.tail_bound)},
                      {"discretization_bound", format_double(c.discretization_bound)},
                      {"pass", c.pass}});
    j["mc_comparisons"] = mc;
    j["grid_points"] = r.grid_points;
    j["tolerances"] = to_json(r.tolerances);
    j["passed"] = r.passed();
    return j;
}

inline VerificationReport report_from_json(const nlohmann::json& j) {
    auto num = [](const nlohmann::json& v) { return parse_double(v.get<std::string>()); };
    VerificationReport r;
    r.verdict = j.at("verdict").get<std::string>();
    r.regime = j.at("regime").get<std::string>();
    r.threshold = num(j.at("threshold"));
    r.favourable = j.at("favourable").get<bool>();
    r.b_d = num(j.at("b_d"));
    r.b_c = num(j.at("b_c"));
    r.gamma = num(j.at("gamma"));
    r.critical_beta = num(j.at("critical_beta"));
    r.critical_P = num(j.at("critical_P"));
    r.max_hjb_residual = num(j.at("max_hjb_residual"));
    r.junction_c1_gap = num(j.at("junction_c1_gap"));
    r.junction_c2_gap = num(j.at("junction_c2_gap"));
    for (const auto& [k, v] : j.at("boundary_residuals").items()) r.boundary_residuals[k] = num(v);
    r.concavity_violations = j.at("concavity_violations").get<long>();
    r.suboptimality_gap = num(j.at("suboptimality_gap"));
    r.h_identity_error = num(j.at("h_identity_error"));
    r.dichotomy_consistent = j.at("dichotomy_consistent").get<bool>();
    r.b_c_below_gamma = j.at("b_c_below_gamma").get<bool>();
    for (const auto& c : j.at("mc_comparisons")) {
        McComparison m;
        m.functional = c.at("functional").get<std::string>();
        m.x = num(c.at("x"));
        m.analytic = num(c.at("analytic"));
        m.mc_mean = num(c.at("mc_mean"));
        m.mc_stderr = num(c.at("mc_stderr"));
        m.tail_bound = num(c.at("tail_bound"));
        m.discretization_bound = num(c.at("discretization_bound"));
        m.pass = c.at("pass").get<bool>();
        r.mc_comparisons.push_back(m);
    }
    r.grid_points = j.at("grid_points").get<std::size_t>();
    const auto& t = j.at("tolerances");
    r.tolerances.hjb = num(t.at("hjb"));
    r.tolerances.c1_gap = num(t.at("c1_gap"));
    r.tolerances.c2_gap = num(t.at("c2_gap"));
    r.tolerances.boundary = num(t.at("boundary"));
    r.tolerances.concavity = num(t.at("concavity"));
    r.tolerances.suboptimality = num(t.at("suboptimality"));
    r.tolerances.h_identity = num(t.at("h_identity"));
    r.tolerances.mc_sigmas = num(t.at("mc_sigmas"));
    return r;
}

} // namespace acdiv
