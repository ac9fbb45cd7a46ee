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

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "acdiv/cli.hpp"
#include "support.hpp"

namespace {

using namespace acdiv;
using namespace acdiv::cli;
using acdiv::testing::base_model;
using acdiv::testing::base_problem;

SweepSpec fig1_sweep(SweepParam param, std::vector<double> values) {
    SweepSpec s;
    s.param = param;
    s.values = std::move(values);
    s.model = base_model();
    s.fixed = base_problem(3.0, 1.0);
    s.x_grid = {0.0, 0.5, 1.0, 2.0};
    return s;
}

std::string csv(const SweepSpec& spec) {
    std::ostringstream os;
    write_sweep_csv(os, spec, run_sweep(spec));
    return os.str();
}

TEST(Values, ListsAndRanges) {
    EXPECT_EQ(parse_values("1,2.5,4"), (std::vector<double>{1, 2.5, 4}));
    EXPECT_EQ(parse_values("0:1:5"), (std::vector<double>{0, 0.25, 0.5, 0.75, 1}));
    EXPECT_EQ(parse_values("3:3:1"), (std::vector<double>{3}));
    EXPECT_EQ(parse_values("0.5:2.5:3").back(), 2.5);
    for (const char* bad : {"", "1,,2", "2,1", "1,1", "a", "1:2", "1:2:0", "1:2:2.5", "2:1:3", "1e999"})
        EXPECT_THROW(parse_values(bad), InvalidParameter) << bad;
}

TEST(Values, SweepParameterNames) {
    EXPECT_EQ(parse_sweep_param("beta"), SweepParam::beta);
    EXPECT_EQ(parse_sweep_param("KS"), SweepParam::KS);
    EXPECT_THROW(parse_sweep_param("sigma2"), InvalidParameter);
}

TEST(Solve, SwitchingValuesReported) {
    const auto r3 = solve_instance(base_model(), base_problem(3.0, 1.0), {0.0, 1.0});
    EXPECT_EQ(r3.solution.verdict, Verdict::pure_dividend);
    EXPECT_NEAR(r3.solution.critical_beta, 2.8355, 5e-4);
    EXPECT_NEAR(r3.solution.critical_P, 1.127, 5e-4);
    EXPECT_NEAR(r3.table[0].v, -1.0, 1e-14);
    for (const auto& row : r3.table) EXPECT_EQ(row.v, row.v_d);
    const auto r2 = solve_instance(base_model(), base_problem(2.0, 1.0), {0.0, 1.0});
    for (const auto& row : r2.table) EXPECT_EQ(row.v, row.v_c);
}

TEST(Solve, CsvHasSeventeenDigits) {
    std::ostringstream os;
    write_solve_csv(os, solve_instance(base_model(), base_problem(3.0, 1.0), {1.0}));
    const std::string s = os.str();
    EXPECT_NE(s.find("2.8355029676787411"), std::string::npos) << s;
    EXPECT_EQ(s.substr(0, s.find('\n')), "x,V_d,V_c,V,verdict,favourable,b_d,b_c,gamma,critical_beta,critical_P");
}

TEST(Sweep, VerdictFlipsAtSwitchingValue) {
    auto spec = fig1_sweep(SweepParam::beta, {2, 2.5, 2.8355, 2.8356, 3, 4});
    spec.x_grid = {1.0};
    const auto r = run_sweep(spec);
    ASSERT_EQ(r.rows.size(), 6u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r.rows[i].verdict, "bailout");
    for (std::size_t i = 3; i < 6; ++i) EXPECT_EQ(r.rows[i].verdict, "pure_dividend");
}

TEST(Sweep, SingleValueReducesToSolve) {
    const auto spec = fig1_sweep(SweepParam::P, {1.0});
    const auto r = run_sweep(spec);
    const auto s = solve_instance(spec.model, spec.fixed, spec.x_grid);
    ASSERT_EQ(r.rows.size(), s.table.size());
    for (std::size_t i = 0; i < s.table.size(); ++i) {
        EXPECT_EQ(r.rows[i].x, s.table[i].x);
        EXPECT_EQ(r.rows[i].v, s.table[i].v);
        EXPECT_EQ(r.rows[i].v_c, s.table[i].v_c);
    }
}

TEST(Sweep, OutputIndependentOfThreads) {
    auto spec = fig1_sweep(SweepParam::K, {0.5, 1.0, 1.5, 2.0, 3.0});
    spec.threads = 1;
    const auto one = csv(spec);
    spec.threads = 4;
    EXPECT_EQ(one, csv(spec));
    EXPECT_EQ(one, csv(spec));
}

TEST(Sweep, FailedPointsBecomeErrorRows) {
    // beta = 1 is invalid; the sweep carries on.
    const auto r = run_sweep(fig1_sweep(SweepParam::beta, {1.0, 2.0}));
    ASSERT_EQ(r.rows.size(), 1u + 4u);
    EXPECT_EQ(r.rows[0].verdict, "error");
    EXPECT_NE(r.rows[0].error.find("beta"), std::string::npos);
    EXPECT_EQ(r.rows[1].verdict, "bailout");
}

TEST(Sweep, RejectsInvalidSpec) {
    auto spec = fig1_sweep(SweepParam::beta, {3.0, 2.0});
    EXPECT_THROW(run_sweep(spec), InvalidParameter);
    spec = fig1_sweep(SweepParam::KS, {1.0});
    EXPECT_THROW(run_sweep(spec), InvalidParameter);  // no S values
}

TEST(Contour, CoOptimalityPassesThroughReferencePoint) {
    const auto m = base_model();
    const double beta = 1.663369830139;  // critical beta at K = 1, S = 2, P = 0
    const auto c = co_optimality_contour(m, make_problem(1, 2, beta, 0.0), {0.5, 1.0, 1.5}, {1.0, 1.5, 2.5, 3.0});
    bool hit = false;
    for (const auto& p : c)
        if (p.K == 1.0) {
            EXPECT_NEAR(p.S, 2.0, 1e-6);
            hit = true;
        }
    EXPECT_TRUE(hit);
    const auto rounded = co_optimality_contour(m, make_problem(1, 2, 1.6633, 0.0), {1.0}, {1.0, 3.0});
    ASSERT_EQ(rounded.size(), 1u);
    EXPECT_NEAR(rounded[0].S, 2.0, 1e-2);
}

TEST(Contour, AppearsInKsSweepCsv) {
    SweepSpec spec;
    spec.param = SweepParam::KS;
    spec.values = {1.0};
    spec.values_s = {1.0, 3.0};
    spec.model = base_model();
    spec.fixed = make_problem(1, 2, 1.6633, 0.0);
    spec.x_grid = {0.0};
    const auto text = csv(spec);
    EXPECT_EQ(text.substr(0, text.find('\n')), "kind,K,S,x,V_d,V_c,V,verdict,b_d,b_c,critical_beta,critical_P,error");
    EXPECT_NE(text.find("\ncontour,1,1.99"), std::string::npos) << text;
}

// ---------------------------------------------------------------------------
// The executable
// ---------------------------------------------------------------------------

struct Run {
    int code;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = std::string(ACDIV_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    std::string out;
    char buf[4096];
    for (std::size_t n; (n = fread(buf, 1, sizeof buf, pipe)) > 0;) out.append(buf, n);
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

const std::string kFig1 = "--mu 0.5 --sigma2 1 --q 0.4 --K 1 --S 2 --P 1";

TEST(Executable, SolvePrintsTable) {
    const auto r = run("solve " + kFig1 + " --beta 3 --x-grid 0,1");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("pure_dividend"), std::string::npos);
    EXPECT_NE(r.out.find("2.8355029676787411"), std::string::npos);
}

TEST(Executable, UsageErrors) {
    EXPECT_EQ(run("solve " + kFig1).code, 1);                            // beta missing
    EXPECT_EQ(run("solve " + kFig1 + " --beta 0.5").code, 1);            // beta <= 1
    EXPECT_EQ(run("solve " + kFig1 + " --beta 3 --format xml").code, 1);
    EXPECT_EQ(run("sweep " + kFig1 + " --beta 3 --sweep-values 3,2").code, 1);
    EXPECT_EQ(run("").code, 1);
}

TEST(Executable, ConfigFileWithFlagOverride) {
    const auto path = std::filesystem::temp_directory_path() / "acdiv_cli_test.ini";
    {
        std::ofstream f(path);
        f << "mu = 0.5\nsigma2 = 1\nq = 0.4\nK = 1\nS = 2\nbeta = 2\nP = 1\n";
    }
    const auto from_file = run("--config " + path.string() + " solve --x-grid 1");
    EXPECT_EQ(from_file.code, 0);
    EXPECT_NE(from_file.out.find("bailout"), std::string::npos);
    const auto overridden = run("--config " + path.string() + " solve --x-grid 1 --beta 3");
    EXPECT_NE(overridden.out.find("pure_dividend"), std::string::npos);
    std::filesystem::remove(path);
}

TEST(Executable, SweepIsByteIdenticalAcrossRuns) {
    const std::string args = "sweep " + kFig1 + " --beta 3 --sweep-param P --sweep-values 0:2:5 --x-grid 0:2:3";
    const auto a = run(args + " --threads 1");
    const auto b = run(args + " --threads 3");
    EXPECT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
}

TEST(Executable, VerifyQuickPassesWithJsonReport) {
    const auto r = run("verify " + kFig1 + " --beta 3 --quick");
    EXPECT_EQ(r.code, 0);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_TRUE(j.at("passed").get<bool>());
    EXPECT_EQ(j.at("mc_comparisons").size(), 5u);
}

TEST(Executable, SimulateCsv) {
    const auto r = run("simulate " + kFig1 + " --beta 3 --quick --x-grid 1 --horizon 2");
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out.rfind("strategy,b,x,functional", 0), 0u);
    EXPECT_NE(r.out.find("refracted,1.35"), std::string::npos);
}

} // namespace
