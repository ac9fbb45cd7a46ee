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

// acdiv: solve, sweep, simulate and verify the dividend / capital-injection
// control problem from the command line.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "acdiv/cli.hpp"

namespace {

using namespace acdiv;
using namespace acdiv::cli;

struct Options {
    double mu = 0, sigma2 = 0, q = 0, K = 0, S = 0, beta = 0, P = 0;
    std::string x_grid = "0:5:11";
    std::string out;
    std::string format;
    unsigned threads = 0;

    std::size_t paths = 100000;
    double dt = 1e-3;
    double horizon = 0.0;
    std::uint64_t seed = SimConfig{}.seed;
    std::string scheme;
    bool antithetic = false;
    bool discretization = false;
    bool quick = false;

    std::string sweep_param = "beta";
    std::string sweep_values;
    std::string sweep_values_s;

    std::string strategy = "optimal";
    std::optional<double> barrier;
};

ModelParams model_of(const Options& o) { return ModelParams::from_variance(o.mu, o.sigma2, o.q); }

ProblemParams problem_of(const Options& o) { return make_problem(o.K, o.S, o.beta, o.P); }

SimConfig sim_of(const Options& o, BoundaryScheme default_scheme, bool discretization) {
    SimConfig c;
    c.n_paths = o.quick ? 10000 : o.paths;
    c.dt = o.dt;
    c.horizon = o.horizon;
    c.seed = o.seed;
    c.threads = o.threads;
    c.antithetic = o.antithetic;
    c.estimate_discretization = discretization || o.discretization;
    if (o.scheme.empty()) c.scheme = default_scheme;
    else if (o.scheme == "projection") c.scheme = BoundaryScheme::projection;
    else if (o.scheme == "bridge") c.scheme = BoundaryScheme::bridge;
    else throw InvalidParameter("scheme must be projection or bridge, got '" + o.scheme + "'");
    c.validate();
    return c;
}

/// Writes data to --out (or stdout) and the summary to stdout (or stderr).
void emit(const Options& o, const std::string& data, const std::string& summary) {
    if (o.out.empty()) {
        std::cout << data;
        std::cerr << summary;
        return;
    }
    std::ofstream f(o.out, std::ios::binary);
    if (!f) throw InvalidParameter("cannot open output file '" + o.out + "'");
    f << data;
    if (!f.flush()) throw Error("failed writing '" + o.out + "'");
    std::cout << summary;
}

bool want_json(const Options& o, const char* fallback) {
    const std::string f = o.format.empty() ? fallback : o.format;
    if (f != "csv" && f != "json") throw InvalidParameter("format must be csv or json, got '" + f + "'");
    return f == "json";
}

std::string summary_of(const ThresholdSolution& s) {
    std::ostringstream os;
    os << "verdict " << to_string(s.verdict) << (s.favourable ? "" : " (unfavourable parameters)") << '\n'
       << "b_d " << format_double(s.b_d) << '\n'
       << "b_c " << format_double(s.b_c) << '\n'
       << "gamma " << format_double(s.gamma) << '\n'
       << "critical_beta " << format_double(s.critical_beta) << '\n'
       << "critical_P " << format_double(s.critical_P) << '\n';
    return os.str();
}

int cmd_solve(const Options& o) {
    const auto r = solve_instance(model_of(o), problem_of(o), parse_values(o.x_grid));
    std::ostringstream data;
    if (want_json(o, "csv")) data << to_json(r).dump(2) << '\n';
    else write_solve_csv(data, r);
    emit(o, data.str(), summary_of(r.solution));
    return kSuccess;
}

int cmd_sweep(const Options& o) {
    SweepSpec spec;
    spec.param = parse_sweep_param(o.sweep_param);
    if (o.sweep_values.empty()) throw InvalidParameter("--sweep-values is required");
    spec.values = parse_values(o.sweep_values);
    if (spec.param == SweepParam::KS) {
        if (o.sweep_values_s.empty()) throw InvalidParameter("--sweep-values-S is required for a KS sweep");
        spec.values_s = parse_values(o.sweep_values_s);
    }
    spec.model = model_of(o);
    spec.fixed = problem_of(o);
    spec.x_grid = parse_values(o.x_grid);
    spec.threads = o.threads;
    const auto r = run_sweep(spec);

    std::ostringstream data;
    if (want_json(o, "csv")) data << to_json(spec, r).dump(2) << '\n';
    else write_sweep_csv(data, spec, r);
    std::ostringstream sum;
    std::size_t errors = 0;
    for (const auto& row : r.rows) errors += row.error.empty() ? 0 : 1;
    sum << "sweep " << to_string(spec.param) << ": " << r.rows.size() << " rows, " << errors << " failed points\n";
    for (const auto& c : r.contour)
        sum << "co-optimal at K " << format_double(c.K) << " S " << format_double(c.S) << '\n';
    emit(o, data.str(), sum.str());
    return kSuccess;
}

int cmd_simulate(const Options& o) {
    const auto m = model_of(o);
    const auto p = problem_of(o);
    const SimConfig cfg = sim_of(o, BoundaryScheme::projection, false);
    const auto s = decide(Problem(m, p));
    Strategy st;
    if (o.strategy == "optimal") st = s.verdict == Verdict::bailout ? Strategy::reflected : Strategy::refracted;
    else if (o.strategy == "refracted") st = Strategy::refracted;
    else if (o.strategy == "reflected") st = Strategy::reflected;
    else throw InvalidParameter("strategy must be optimal, refracted or reflected, got '" + o.strategy + "'");
    const double b = o.barrier ? *o.barrier : (st == Strategy::refracted ? s.b_d : s.b_c);
    const auto rows = simulate_grid(m, p, st, b, parse_values(o.x_grid), cfg);

    std::ostringstream data;
    if (want_json(o, "csv")) data << to_json(rows).dump(2) << '\n';
    else write_sim_csv(data, rows);
    std::ostringstream sum;
    for (const auto& r : rows)
        sum << (st == Strategy::refracted ? "J_d" : "J_c") << "(" << format_double(r.x) << "; "
            << format_double(b) << ") analytic " << format_double(r.analytic) << " mc "
            << format_double(r.value.mean) << " +- " << format_double(r.value.std_error)
            << (r.value.covers(r.analytic) ? "" : "  [outside band]") << '\n';
    emit(o, data.str(), sum.str());
    return kSuccess;
}

int cmd_verify(const Options& o) {
    VerifyConfig vc;
    vc.sim = sim_of(o, BoundaryScheme::bridge, true);
    vc.mc_points = {};
    const auto r = full_report(Problem(model_of(o), problem_of(o)), vc);

    std::ostringstream data;
    if (want_json(o, "json")) {
        data << to_json(r).dump(2) << '\n';
    } else {
        const auto& t = r.tolerances;
        data << "check,value,tolerance,pass\n";
        auto row = [&](const char* name, double v, double tol, bool ok) {
            data << name << ',' << format_double(v) << ',' << format_double(tol) << ',' << (ok ? "true" : "false")
                 << '\n';
        };
        row("max_hjb_residual", r.max_hjb_residual, t.hjb, r.max_hjb_residual <= t.hjb);
        row("junction_c1_gap", r.junction_c1_gap, t.c1_gap, r.junction_c1_gap <= t.c1_gap);
        row("junction_c2_gap", r.junction_c2_gap, t.c2_gap, r.junction_c2_gap <= t.c2_gap);
        for (const auto& [k, v] : r.boundary_residuals)
            row(("boundary_" + k).c_str(), v, t.boundary, r.boundary_passed());
        row("concavity_violations", static_cast<double>(r.concavity_violations), 0.0, r.concavity_violations == 0);
        row("suboptimality_gap", r.suboptimality_gap, t.suboptimality, r.suboptimality_gap <= t.suboptimality);
        row("h_identity_error", r.h_identity_error, t.h_identity, r.h_identity_error <= t.h_identity);
        for (const auto& c : r.mc_comparisons) {
            const std::string name = "mc_" + c.functional + "_x" + format_double(c.x);
            row(name.c_str(), c.mc_mean - c.analytic,
                t.mc_sigmas * c.mc_stderr + c.tail_bound + c.discretization_bound, c.pass);
        }
    }
    std::ostringstream sum;
    sum << "verdict " << r.verdict << ", regime " << r.regime << ", threshold " << format_double(r.threshold)
        << '\n'
        << "hjb " << format_double(r.max_hjb_residual) << ", c1 " << format_double(r.junction_c1_gap) << ", c2 "
        << format_double(r.junction_c2_gap) << ", concavity violations " << r.concavity_violations << '\n';
    for (const auto& c : r.mc_comparisons)
        sum << c.functional << "(" << format_double(c.x) << ") analytic " << format_double(c.analytic) << " mc "
            << format_double(c.mc_mean) << " +- " << format_double(c.mc_stderr) << (c.pass ? "  ok" : "  FAIL")
            << '\n';
    const auto failed = r.failures();
    if (failed.empty()) {
        sum << "PASS\n";
    } else {
        sum << "FAIL:";
        for (const auto& f : failed) sum << ' ' << f;
        sum << '\n';
    }
    emit(o, data.str(), sum.str());
    return failed.empty() ? kSuccess : kVerification;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal dividends with capital injection: closed-form solver, sweeps and Monte Carlo checks"};
    app.set_config("--config", "", "Key-value config file (command-line flags take precedence)");
    app.require_subcommand(1);
    app.fallthrough();
    app.option_defaults()->always_capture_default();

    Options o;
    const char* params = "Parameters (all required)";
    app.add_option("--mu", o.mu, "Drift mu > 0")->required()->group(params);
    app.add_option("--sigma2", o.sigma2, "Variance sigma^2 > 0")->required()->group(params);
    app.add_option("--q", o.q, "Discount rate q > 0")->required()->group(params);
    app.add_option("--K", o.K, "Proportional dividend-rate bound K > 0")->required()->group(params);
    app.add_option("--S", o.S, "Constant dividend-rate bound S >= 0")->required()->group(params);
    app.add_option("--beta", o.beta, "Injection cost beta > 1")->required()->group(params);
    app.add_option("--P", o.P, "Ruin penalty P >= 0")->required()->group(params);

    app.add_option("--x-grid", o.x_grid, "Surplus levels: a,b,c or lo:hi:n");
    app.add_option("--out", o.out, "Write data here; summary goes to stdout");
    app.add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--threads", o.threads, "Worker threads (0: all cores)");

    const char* mc = "Monte Carlo";
    app.add_option("--paths", o.paths, "Number of paths")->group(mc);
    app.add_option("--dt", o.dt, "Euler step")->group(mc);
    app.add_option("--horizon", o.horizon, "Simulation horizon (0: from the tail tolerance)")->group(mc);
    app.add_option("--seed", o.seed, "RNG seed")->group(mc);
    app.add_option("--scheme", o.scheme, "Boundary scheme: projection or bridge")->group(mc);
    app.add_flag("--antithetic", o.antithetic, "Antithetic variates")->group(mc);
    app.add_flag("--discretization-bound", o.discretization, "Estimate the time-step bias bound")->group(mc);
    app.add_flag("--quick", o.quick, "10^4 paths")->group(mc);

    auto* solve = app.add_subcommand("solve", "Thresholds, verdict and value functions on the x-grid");
    auto* sweep = app.add_subcommand("sweep", "Solve across a range of one parameter (or a K x S grid)");
    sweep->add_option("--sweep-param", o.sweep_param, "beta, P, K, S or KS")
        ->check(CLI::IsMember({"beta", "P", "K", "S", "KS"}));
    sweep->add_option("--sweep-values", o.sweep_values, "Values (K values for KS): a,b,c or lo:hi:n");
    sweep->add_option("--sweep-values-S", o.sweep_values_s, "S values for a KS sweep");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimates of J_d / J_c on the x-grid");
    simulate->add_option("--strategy", o.strategy, "optimal, refracted or reflected");
    simulate->add_option("--b", o.barrier, "Barrier (default: the optimal threshold)");
    auto* verify = app.add_subcommand("verify", "HJB, smooth-fit, concavity and Monte Carlo checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }

    try {
        if (solve->parsed()) return cmd_solve(o);
        if (sweep->parsed()) return cmd_sweep(o);
        if (simulate->parsed()) return cmd_simulate(o);
        if (verify->parsed()) return cmd_verify(o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return kUsage;
}
