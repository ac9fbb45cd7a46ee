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
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "acdiv/thresholds.hpp"
#include "acdiv/verify.hpp"

namespace acdiv::cli {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Process exit codes.
enum ExitCode : int { kSuccess = 0, kUsage = 1, kNumerical = 2, kVerification = 3 };

/// Maps an exception raised while running a command to an exit code.
inline int exit_code_for(const std::exception& e) noexcept {
    if (dynamic_cast<const InvalidParameter*>(&e) != nullptr) return kUsage;
    return kNumerical;
}

// ---------------------------------------------------------------------------
// Value lists
// ---------------------------------------------------------------------------

/// Parses "a,b,c" or "lo:hi:n" (n >= 1 evenly spaced points, endpoints included).
/// The result must be nonempty and strictly increasing.
inline std::vector<double> parse_values(const std::string& text) {
    auto number = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            throw InvalidParameter("value list '" + text + "': '" + s + "' is not a number");
        }
        if (used != s.size() || !std::isfinite(v))
            throw InvalidParameter("value list '" + text + "': '" + s + "' is not a finite number");
        return v;
    };
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string tok; std::getline(ss, tok, ':');) parts.push_back(tok);
        if (parts.size() != 3) throw InvalidParameter("range '" + text + "' must be lo:hi:n");
        const double lo = number(parts[0]);
        const double hi = number(parts[1]);
        const double n = number(parts[2]);
        if (!(n >= 1.0) || n != std::floor(n) || n > 1e7)
            throw InvalidParameter("range '" + text + "': n must be a positive integer");
        const auto count = static_cast<std::size_t>(n);
        if (count == 1) {
            out.push_back(lo);
        } else {
            for (std::size_t i = 0; i < count; ++i)
                out.push_back(i + 1 == count ? hi
                                             : lo + (hi - lo) * static_cast<double>(i) /
                                                        static_cast<double>(count - 1));
        }
    } else {
        std::stringstream ss(text);
        for (std::string tok; std::getline(ss, tok, ',');) out.push_back(number(tok));
    }
    if (out.empty()) throw InvalidParameter("value list '" + text + "' is empty");
    for (std::size_t i = 1; i < out.size(); ++i)
        if (!(out[i] > out[i - 1]))
            throw InvalidParameter("value list '" + text + "' must be strictly increasing");
    return out;
}

// ---------------------------------------------------------------------------
// Solve
// ---------------------------------------------------------------------------

struct TableRow {
    double x = 0.0;
    double v_d = 0.0;
    double v_c = 0.0;
    double v = 0.0;
};

struct SolveResult {
    ThresholdSolution solution;
    Regime regime = Regime::liquidation;
    double threshold = 0.0;
    std::vector<TableRow> table;
};

inline SolveResult solve_instance(const ModelParams& m, const ProblemParams& p,
                                  const std::vector<double>& x_grid, const RootOptions& opt = {}) {
    const Problem pr(m, p);
    SolveResult r;
    r.solution = decide(pr, opt);
    const ValueFn vd = build_v_d(pr, r.solution.b_d);
    const ValueFn vc = build_v_c(pr, r.solution.b_c);
    const ValueFn& v = r.solution.verdict == Verdict::bailout ? vc : vd;
    r.regime = v.regime();
    r.threshold = v.threshold();
    for (double x : x_grid) {
        if (!(x >= 0.0)) throw InvalidParameter("x-grid values must be >= 0");
        TableRow row{x, vd.eval(x).value, vc.eval(x).value, 0.0};
        row.v = &v == &vc ? row.v_c : row.v_d;
        r.table.push_back(row);
    }
    return r;
}

inline nlohmann::json to_json(const ThresholdSolution& s) {
    return {{"favourable", s.favourable},
            {"verdict", to_string(s.verdict)},
            {"dual_verdict", to_string(s.dual_verdict)},
            {"b_d", format_double(s.b_d)},
            {"b_c", format_double(s.b_c)},
            {"gamma", format_double(s.gamma)},
            {"critical_beta", format_double(s.critical_beta)},
            {"critical_P", format_double(s.critical_P)}};
}

inline nlohmann::json to_json(const SolveResult& r) {
    nlohmann::json j = to_json(r.solution);
    j["regime"] = to_string(r.regime);
    j["threshold"] = format_double(r.threshold);
    nlohmann::json t = nlohmann::json::array();
    for (const auto& row : r.table)
        t.push_back({{"x", format_double(row.x)},
                     {"V_d", format_double(row.v_d)},
                     {"V_c", format_double(row.v_c)},
                     {"V", format_double(row.v)}});
    j["table"] = t;
    return j;
}

/// One row per grid point; the solution columns repeat on every row.
inline void write_solve_csv(std::ostream& os, const SolveResult& r) {
    const auto& s = r.solution;
    os << "x,V_d,V_c,V,verdict,favourable,b_d,b_c,gamma,critical_beta,critical_P\n";
    for (const auto& row : r.table)
        os << format_double(row.x) << ',' << format_double(row.v_d) << ',' << format_double(row.v_c)
           << ',' << format_double(row.v) << ',' << to_string(s.verdict) << ','
           << (s.favourable ? "true" : "false") << ',' << format_double(s.b_d) << ','
           << format_double(s.b_c) << ',' << format_double(s.gamma) << ','
           << format_double(s.critical_beta) << ',' << format_double(s.critical_P) << '\n';
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

enum class SweepParam { beta, P, K, S, KS };

inline const char* to_string(SweepParam s) noexcept {
    switch (s) {
    case SweepParam::beta: return "beta";
    case SweepParam::P: return "P";
    case SweepParam::K: return "K";
    case SweepParam::S: return "S";
    case SweepParam::KS: return "KS";
    }
    return "unknown";
}

inline SweepParam parse_sweep_param(const std::string& s) {
    for (auto p : {SweepParam::beta, SweepParam::P, SweepParam::K, SweepParam::S, SweepParam::KS})
        if (s == to_string(p)) return p;
    throw InvalidParameter("sweep parameter must be one of beta, P, K, S, KS; got '" + s + "'");
}

struct SweepSpec {
    SweepParam param = SweepParam::beta;
    std::vector<double> values;     ///< swept values (K values for a KS sweep)
    std::vector<double> values_s;   ///< S values, KS sweep only
    ModelParams model = ModelParams::from_variance(1.0, 1.0, 1.0);
    ProblemParams fixed;
    std::vector<double> x_grid;
    unsigned threads = 0;           ///< 0: hardware concurrency

    void validate() const {
        auto increasing = [](const std::vector<double>& v, const char* what) {
            if (v.empty()) throw InvalidParameter(std::string(what) + " must be nonempty");
            for (std::size_t i = 1; i < v.size(); ++i)
                if (!(v[i] > v[i - 1]))
                    throw InvalidParameter(std::string(what) + " must be strictly increasing");
        };
        increasing(values, "sweep values");
        if (param == SweepParam::KS) increasing(values_s, "S sweep values");
        increasing(x_grid, "x-grid");
        if (x_grid.front() < 0.0) throw InvalidParameter("x-grid values must be >= 0");
        fixed.validate();
    }

    /// Problem parameters at sweep point (a, s); s is used by KS sweeps only.
    ProblemParams at(double a, double s = 0.0) const {
        ProblemParams p = fixed;
        switch (param) {
        case SweepParam::beta: p.beta = a; break;
        case SweepParam::P: p.P = a; break;
        case SweepParam::K: p.K = a; break;
        case SweepParam::S: p.S = a; break;
        case SweepParam::KS: p.K = a; p.S = s; break;
        }
        return p;
    }
};

struct SweepRow {
    double value = 0.0;    ///< swept value (K for KS)
    double value_s = 0.0;  ///< S, KS sweep only
    double x = 0.0;
    double v_d = kNaN, v_c = kNaN, v = kNaN;
    std::string verdict;
    double b_d = kNaN, b_c = kNaN, critical_beta = kNaN, critical_P = kNaN;
    std::string error;
};

struct ContourPoint {
    double K = 0.0;
    double S = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<ContourPoint> contour;
};

/// Runs f(i) for i in [0, n) on a small worker pool; f writes to slot i only.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& f) {
    unsigned t = threads != 0 ? threads : std::max(1u, std::thread::hardware_concurrency());
    t = static_cast<unsigned>(std::min<std::size_t>(t, n));
    if (t <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < t; ++k)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) f(i);
        });
    for (auto& th : pool) th.join();
}

/// Values of S in [S_lo, S_hi] where critical_beta(K, S) crosses beta, for each K.
/// Sign changes on the S grid are refined by bracketed root finding.
inline std::vector<ContourPoint> co_optimality_contour(const ModelParams& m, const ProblemParams& fixed,
                                                       const std::vector<double>& Ks,
                                                       const std::vector<double>& Ss,
                                                       unsigned threads = 0) {
    RootOptions opt;
    auto excess = [&](double K, double S) {
        ProblemParams p = fixed;
        p.K = K;
        p.S = S;
        const Problem pr(m, p);
        if (!favourable_check(pr)) return kNaN;
        return critical_beta(pr, solve_b_d(pr, opt)) - fixed.beta;
    };
    std::vector<std::vector<ContourPoint>> per_k(Ks.size());
    parallel_for(Ks.size(), threads, [&](std::size_t i) {
        const double K = Ks[i];
        std::vector<double> e(Ss.size());
        for (std::size_t j = 0; j < Ss.size(); ++j) {
            try {
                e[j] = excess(K, Ss[j]);
            } catch (const Error&) {
                e[j] = kNaN;
            }
        }
        for (std::size_t j = 0; j < Ss.size(); ++j) {
            if (e[j] == 0.0) {
                per_k[i].push_back({K, Ss[j]});
                continue;
            }
            if (j + 1 == Ss.size() || !std::isfinite(e[j]) || !std::isfinite(e[j + 1])) continue;
            if ((e[j] > 0.0) == (e[j + 1] > 0.0) || e[j + 1] == 0.0) continue;
            RootOptions ro;
            ro.residual_tol = 1e-8;
            try {
                const double S = refine_root([&](double s) { return excess(K, s); }, Ss[j], Ss[j + 1], e[j],
                                             e[j + 1], ro, "co_optimality_contour");
                per_k[i].push_back({K, S});
            } catch (const Error&) {
                // a crossing that cannot be refined is left out of the contour
            }
        }
    });
    std::vector<ContourPoint> out;
    for (auto& v : per_k) out.insert(out.end(), v.begin(), v.end());
    return out;
}

/// Solves every sweep point (in parallel) and tabulates V_d, V_c, V on the
/// x-grid. A point whose solve fails yields one row carrying the error.
inline SweepResult run_sweep(const SweepSpec& spec) {
    spec.validate();
    struct Point {
        double a, s;
    };
    std::vector<Point> points;
    if (spec.param == SweepParam::KS) {
        for (double K : spec.values)
            for (double S : spec.values_s) points.push_back({K, S});
    } else {
        for (double a : spec.values) points.push_back({a, 0.0});
    }
    std::vector<std::vector<SweepRow>> blocks(points.size());
    parallel_for(points.size(), spec.threads, [&](std::size_t i) {
        const auto [a, s] = points[i];
        SweepRow base;
        base.value = a;
        base.value_s = s;
        try {
            const ProblemParams p = spec.at(a, s);
            const SolveResult r = solve_instance(spec.model, p, spec.x_grid);
            base.verdict = to_string(r.solution.verdict);
            base.b_d = r.solution.b_d;
            base.b_c = r.solution.b_c;
            base.critical_beta = r.solution.critical_beta;
            base.critical_P = r.solution.critical_P;
            for (const auto& t : r.table) {
                SweepRow row = base;
                row.x = t.x;
                row.v_d = t.v_d;
                row.v_c = t.v_c;
                row.v = t.v;
                blocks[i].push_back(row);
            }
        } catch (const std::exception& e) {
            base.x = kNaN;
            base.verdict = "error";
            base.error = e.what();
            blocks[i].push_back(base);
        }
    });
    SweepResult out;
    for (auto& b : blocks) out.rows.insert(out.rows.end(), b.begin(), b.end());
    if (spec.param == SweepParam::KS)
        out.contour = co_optimality_contour(spec.model, spec.fixed, spec.values, spec.values_s, spec.threads);
    return out;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

inline std::string num(double v) { return std::isnan(v) ? std::string() : format_double(v); }

} // namespace detail

/// CSV: value,x,V_d,V_c,V,verdict,b_d,b_c,critical_beta,critical_P,error.
/// KS sweeps lead with kind,K,S; contour rows have kind=contour and empty
/// value columns.
inline void write_sweep_csv(std::ostream& os, const SweepSpec& spec, const SweepResult& r) {
    using detail::num;
    const bool ks = spec.param == SweepParam::KS;
    if (ks)
        os << "kind,K,S";
    else
        os << to_string(spec.param);
    os << ",x,V_d,V_c,V,verdict,b_d,b_c,critical_beta,critical_P,error\n";
    for (const auto& row : r.rows) {
        if (ks) os << "grid," << num(row.value) << ',' << num(row.value_s);
        else os << num(row.value);
        os << ',' << num(row.x) << ',' << num(row.v_d) << ',' << num(row.v_c) << ',' << num(row.v) << ','
           << row.verdict << ',' << num(row.b_d) << ',' << num(row.b_c) << ',' << num(row.critical_beta)
           << ',' << num(row.critical_P) << ',' << detail::csv_field(row.error) << '\n';
    }
    for (const auto& c : r.contour)
        os << "contour," << num(c.K) << ',' << num(c.S) << ",,,,,co_optimal,,,"
           << format_double(spec.fixed.beta) << ",,\n";
}

inline nlohmann::json to_json(const SweepSpec& spec, const SweepResult& r) {
    using detail::num;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
        nlohmann::json j;
        if (spec.param == SweepParam::KS) {
            j["K"] = num(row.value);
            j["S"] = num(row.value_s);
        } else {
            j[to_string(spec.param)] = num(row.value);
        }
        j["x"] = num(row.x);
        j["V_d"] = num(row.v_d);
        j["V_c"] = num(row.v_c);
        j["V"] = num(row.v);
        j["verdict"] = row.verdict;
        j["b_d"] = num(row.b_d);
        j["b_c"] = num(row.b_c);
        j["critical_beta"] = num(row.critical_beta);
        j["critical_P"] = num(row.critical_P);
        if (!row.error.empty()) j["error"] = row.error;
        rows.push_back(j);
    }
    nlohmann::json out{{"sweep_param", to_string(spec.param)}, {"rows", rows}};
    if (spec.param == SweepParam::KS) {
        nlohmann::json c = nlohmann::json::array();
        for (const auto& p : r.contour) c.push_back({{"K", num(p.K)}, {"S", num(p.S)}});
        out["contour"] = c;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Simulate
// ---------------------------------------------------------------------------

enum class Strategy { refracted, reflected };

struct SimRow {
    Strategy strategy = Strategy::refracted;
    double b = 0.0;
    double x = 0.0;
    double analytic = 0.0;
    McEstimate value;      ///< J_d or J_c
    McEstimate dividends;
    McEstimate secondary;  ///< ruin discount (refracted) or injections (reflected)
};

/// MC estimates at each x0 for the strategy with barrier b, alongside the closed form.
inline std::vector<SimRow> simulate_grid(const ModelParams& m, const ProblemParams& p, Strategy strategy,
                                         double b, const std::vector<double>& xs, const SimConfig& cfg) {
    const Problem pr(m, p);
    std::vector<SimRow> out;
    for (double x : xs) {
        SimRow row;
        row.strategy = strategy;
        row.b = b;
        row.x = x;
        if (strategy == Strategy::refracted) {
            const auto e = mc_refracted(m, p, b, x, cfg);
            row.value = e.j_d;
            row.dividends = e.dividends;
            row.secondary = e.ruin_discount;
            row.analytic = j_d(pr, b, x).value;
        } else {
            const auto e = mc_reflected(m, p, b, x, cfg);
            row.value = e.j_c;
            row.dividends = e.dividends;
            row.secondary = e.injections;
            row.analytic = j_c(pr, b, x).value;
        }
        out.push_back(row);
    }
    return out;
}

inline void write_sim_csv(std::ostream& os, const std::vector<SimRow>& rows) {
    os << "strategy,b,x,functional,analytic,mc_mean,mc_stderr,tail_bound,discretization_bound,"
          "dividends_mean,dividends_stderr,secondary,secondary_mean,secondary_stderr,n_paths,dt,horizon,seed\n";
    for (const auto& r : rows) {
        const bool rf = r.strategy == Strategy::refracted;
        os << (rf ? "refracted" : "reflected") << ',' << format_double(r.b) << ',' << format_double(r.x) << ','
           << (rf ? "J_d" : "J_c") << ',' << format_double(r.analytic) << ',' << format_double(r.value.mean)
           << ',' << format_double(r.value.std_error) << ',' << format_double(r.value.tail_bound) << ','
           << format_double(r.value.discretization_bound) << ',' << format_double(r.dividends.mean) << ','
           << format_double(r.dividends.std_error) << ',' << (rf ? "ruin_discount" : "injections") << ','
           << format_double(r.secondary.mean) << ',' << format_double(r.secondary.std_error) << ','
           << r.value.n_paths << ',' << format_double(r.value.dt) << ',' << format_double(r.value.horizon)
           << ',' << r.value.seed << '\n';
    }
}

inline nlohmann::json to_json(const McEstimate& e) {
    return {{"mean", format_double(e.mean)},
            {"std_error", format_double(e.std_error)},
            {"tail_bound", format_double(e.tail_bound)},
            {"discretization_bound", format_double(e.discretization_bound)},
            {"n_paths", e.n_paths},
            {"dt", format_double(e.dt)},
            {"horizon", format_double(e.horizon)},
            {"seed", e.seed}};
}

inline nlohmann::json to_json(const std::vector<SimRow>& rows) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& r : rows) {
        const bool rf = r.strategy == Strategy::refracted;
        a.push_back({{"strategy", rf ? "refracted" : "reflected"},
                     {"b", format_double(r.b)},
                     {"x", format_double(r.x)},
                     {"functional", rf ? "J_d" : "J_c"},
                     {"analytic", format_double(r.analytic)},
                     {"estimate", to_json(r.value)},
                     {"dividends", to_json(r.dividends)},
                     {rf ? "ruin_discount" : "injections", to_json(r.secondary)}});
    }
    return a;
}

} // namespace acdiv::cli
