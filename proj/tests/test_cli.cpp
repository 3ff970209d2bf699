#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
  fs::path dir;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> v;
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

std::string field(const std::string& row, int index) {
  std::stringstream ss(row);
  std::string f;
  for (int i = 0; i <= index; ++i) std::getline(ss, f, ',');
  return f;
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / "singlab_cli_tests" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Runs `singlab <cmd> --config <json> --out <dir>/out`, capturing streams.
Run run(const std::string& name, const std::string& cmd, const std::string& config, const std::string& extra = "") {
  fs::path dir = scratch(name);
  std::string args = cmd + " --out " + (dir / "out").string() + " " + extra;
  if (!config.empty()) {
    std::ofstream(dir / "config.json") << config;
    args += " --config " + (dir / "config.json").string();
  }
  std::string line = std::string(SINGLAB_CLI_PATH) + " " + args + " > " + (dir / "stdout").string() + " 2> " +
                     (dir / "stderr").string();
  int status = std::system(line.c_str());
  int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return {code, slurp(dir / "stdout"), slurp(dir / "stderr"), dir / "out"};
}

const char* kCaseA = R"({"N": 3, "alpha": 1, "beta": 0, "p": 1, "q": 1, "potential": {"family": "Constant", "a": 1}})";

}  // namespace

// ---- classify ------------------------------------------------------------------------

TEST(CliClassify, CaseAVerdictJson) {
  auto r = run("classify_a", "classify", kCaseA);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out), json::parse(R"({"verdict":"SingularProfileExists","recipe":"CaseA"})"));
  EXPECT_EQ(json::parse(slurp(r.dir / "verdict.json")), json::parse(r.out));
}

TEST(CliClassify, CriticalSumWitness) {
  auto r = run("classify_crit", "classify", R"({"N": 3, "alpha": 1, "beta": 0, "p": 2.5, "q": 2.5})");
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = json::parse(r.out);
  EXPECT_EQ(j["verdict"], "NoSingularSolution");
  EXPECT_EQ(j["witness"], "critical_sum_beta");
  EXPECT_FALSE(j.contains("recipe"));
}

TEST(CliClassify, MalformedConfigsExitOne) {
  EXPECT_EQ(run("classify_neg", "classify", R"({"N": 3, "alpha": 1, "p": -1, "q": 1})").code, 1);
  EXPECT_EQ(run("classify_key", "classify", R"({"N": 3, "alpha": 1, "p": 1, "q": 1, "colour": 2})").code, 1);
  EXPECT_EQ(run("classify_json", "classify", R"({"N": 3,)").code, 1);
  EXPECT_EQ(run("classify_fam", "classify", R"({"N": 3, "p": 1, "q": 1, "potential": {"family": "Cubic"}})").code, 1);
  EXPECT_EQ(run("classify_missing", "classify", R"({"N": 3, "p": 1})").code, 1);
  EXPECT_EQ(run("classify_nocfg", "classify", "").code, 1);
}

TEST(CliClassify, TabulatedPotentialIsInconclusive) {
  auto dir = scratch("classify_tab_data");
  std::ofstream(dir / "v.csv") << "r,value\n0.01,2\n0.1,1.5\n1,1\n";
  std::string cfg = R"({"N": 3, "alpha": 1, "p": 1, "q": 1, "potential": {"family": "Tabulated", "csv": ")" +
                    (dir / "v.csv").string() + "\"}}";
  auto r = run("classify_tab", "classify", cfg);
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(json::parse(r.out)["verdict"], "Inconclusive");
}

// ---- audit ----------------------------------------------------------------------------

TEST(CliAudit, DefaultGridRowCountAndSchema) {
  auto r = run("audit_default", "audit-estimates", "");
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = lines(r.dir / "audit.csv");
  ASSERT_EQ(rows.size(), 36u);
  EXPECT_EQ(rows[0], "alpha,beta,gamma,r,I_value,envelope,ratio");
  auto sum = lines(r.dir / "audit_summary.csv");
  ASSERT_EQ(sum.size(), 6u);
  EXPECT_EQ(sum[0], "regime,alpha,beta,gamma,min_ratio,max_ratio,spread,verdict");
  EXPECT_EQ(sum[1].substr(0, sum[1].find(',')), "Supercritical");
  EXPECT_EQ(sum[1].substr(sum[1].rfind(',') + 1), "bounded");
  for (std::size_t i = 1; i < sum.size(); ++i) EXPECT_EQ(sum[i].substr(sum[i].rfind(',') + 1), "bounded") << sum[i];
}

TEST(CliAudit, DivergentGammaIsRefused) {
  auto r = run("audit_div", "audit-estimates", R"({"N": 3, "sets": [{"alpha": 1, "beta": 0, "gamma": 3}]})");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("diverges"), std::string::npos) << r.err;
}

TEST(CliAudit, RadiiOutsideRangeAreRefused) {
  EXPECT_EQ(run("audit_radii", "audit-estimates", R"({"radii": [0.5]})").code, 1);
}

// ---- solve ----------------------------------------------------------------------------

TEST(CliSolve, CaseAInstance) {
  std::string cfg = R"({"N": 3, "alpha": 1, "beta": 0, "p": 1, "q": 1, "m": 0.1, "schedule": [16, 32],
                        "potential": {"family": "Constant", "a": 1}})";
  auto r = run("solve_a", "solve", cfg);
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = json::parse(slurp(r.dir / "mass.json"));
  EXPECT_EQ(j["recipe"], "CaseA");
  double m = j["params"]["m"];
  double est = j["profile_coefficient"]["m_est"];
  EXPECT_GE(est, m);
  EXPECT_LE(est, 2 * m);
  EXPECT_TRUE(j["converged"].get<bool>());
  EXPECT_EQ(j["continuation"].size(), 2u);
  EXPECT_TRUE(j["continuation"][0]["change"].is_null());
  EXPECT_EQ(lines(r.dir / "solution.csv")[0], "r,u,ratio_to_E");
  EXPECT_EQ(lines(r.dir / "iterations.csv")[0], "iter,residual,min_gap_sub,min_gap_super");
  EXPECT_EQ(lines(r.dir / "solution.csv").size(), 1u + j["nodes"].get<std::size_t>());
}

TEST(CliSolve, CoarseGridExitsThree) {
  std::string cfg = R"({"N": 3, "alpha": 1, "beta": 0, "p": 1, "q": 1, "total_nodes": 8, "schedule": [32],
                        "lambda_mode": "GivenLambda", "lambda": 100,
                        "potential": {"family": "PowerLog", "A": 1, "gamma": 0, "tau": -1}})";
  auto r = run("solve_coarse", "solve", cfg);
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_NE(r.err.find("8 nodes"), std::string::npos) << r.err;
}

TEST(CliSolve, PlanarLogLogInstance) {
  std::string cfg = R"({"N": 2, "alpha": 1, "beta": 0, "p": 1, "q": 2, "m": 0.1, "schedule": [32],
                        "potential": {"family": "LogLog"}})";
  auto r = run("solve_n2", "solve", cfg);
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = json::parse(slurp(r.dir / "mass.json"));
  EXPECT_EQ(j["recipe"], "N2_Log");
  double m = j["params"]["m"];
  double est = j["profile_coefficient"]["m_est"];
  EXPECT_GE(est, m);
  EXPECT_LE(est, 2 * m);
}

TEST(CliSolve, NoRecipeExitsFive) {
  auto r = run("solve_none", "solve", R"({"N": 3, "alpha": 1, "beta": 0, "p": 2.5, "q": 2.5})");
  EXPECT_EQ(r.code, 5) << r.err;
}

TEST(CliSolve, IterationBudgetExitsFour) {
  std::string cfg = R"({"N": 3, "alpha": 1, "beta": 0, "p": 1, "q": 1, "schedule": [16], "max_iter": 1,
                        "nodes_per_octave": 8})";
  EXPECT_EQ(run("solve_budget", "solve", cfg).code, 4);
}

// ---- sweep ----------------------------------------------------------------------------

TEST(CliSweep, DeterministicBytesAcrossRunsAndThreads) {
  std::string cfg = R"({"N": 3, "alpha": 1, "beta": 0, "p": {"lo": 0, "hi": 4, "count": 40},
                        "q": {"lo": 0, "hi": 4, "count": 40}})";
  auto a = run("sweep_a", "sweep", cfg);
  auto b = run("sweep_b", "sweep", cfg, "--threads 3");
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  std::string sa = slurp(a.dir / "sweep.csv");
  EXPECT_EQ(sa, slurp(b.dir / "sweep.csv"));
  auto rows = lines(a.dir / "sweep.csv");
  ASSERT_EQ(rows.size(), 1601u);
  EXPECT_EQ(rows[0], "N,alpha,beta,p,q,verdict,witness");
  // p-major order: the first 40 rows share p, then p steps
  EXPECT_EQ(field(rows[1], 3), field(rows[40], 3));
  EXPECT_NE(field(rows[40], 3), field(rows[41], 3));
  EXPECT_EQ(field(rows[1], 4), field(rows[41], 4));
}

TEST(CliSweep, CriticalSegmentFlipsWithBeta) {
  auto zero = run("sweep_b0", "sweep", R"({"N": 3, "alpha": 1, "beta": 0, "p": [2.5], "q": [2.5]})");
  auto neg = run("sweep_bm2", "sweep", R"({"N": 3, "alpha": 1, "beta": -2, "p": [2.5], "q": [2.5]})");
  auto r0 = lines(zero.dir / "sweep.csv"), r2 = lines(neg.dir / "sweep.csv");
  ASSERT_EQ(r0.size(), 2u);
  ASSERT_EQ(r2.size(), 2u);
  EXPECT_NE(r0[1].find("NoSingularSolution,critical_sum_beta"), std::string::npos) << r0[1];
  EXPECT_NE(r2[1].find("SingularProfileExists,CaseA"), std::string::npos) << r2[1];
}

TEST(CliSweep, FloatFormattingRoundTrips) {
  auto r = run("sweep_fmt", "sweep", R"({"N": 3, "alpha": 1, "beta": 0, "p": [0.1], "q": [0.3]})");
  auto rows = lines(r.dir / "sweep.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].substr(0, rows[1].find(",Sing")),
            "3,1.0000000000000000e+00,0.0000000000000000e+00,1.0000000000000001e-01,2.9999999999999999e-01");
}

TEST(CliSweep, InvalidAxesExitOne) {
  EXPECT_EQ(run("sweep_bad", "sweep", R"({"N": 3, "p": [0, 1], "q": [1]})").code, 1);
  EXPECT_EQ(run("sweep_bad2", "sweep", R"({"N": 3, "p": {"lo": 1, "hi": 0, "count": 3}, "q": [1]})").code, 1);
}

// ---- self-test ----------------------------------------------------------------------------

TEST(CliSelftest, MeanValueIdentity) {
  auto r = run("selftest", "selftest-meanvalue", "");
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = lines(r.dir / "meanvalue.csv");
  ASSERT_EQ(rows.size(), 101u);
  EXPECT_EQ(rows[0], "N,r,s,mean,expected,rel_error");
}

TEST(CliSelftest, ImpossibleToleranceExitsSix) {
  EXPECT_EQ(run("selftest_tight", "selftest-meanvalue", R"({"cases": 20, "tol": 1e-30})").code, 6);
}

TEST(Cli, UnknownSubcommandExitsOne) { EXPECT_EQ(run("unknown", "frobnicate", "").code, 1); }
