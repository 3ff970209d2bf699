// Batch entry points: classify, audit-estimates, solve, sweep, selftest-meanvalue.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <singlab/singlab.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
using namespace singlab;

namespace {

enum Exit {
  kOk = 0,
  kInvalid = 1,
  kInconclusive = 2,
  kMonotonicity = 3,
  kNonConvergence = 4,
  kNoRecipe = 5,
  kSelftestFailed = 6,
};

struct ConfigError : Error {
  using Error::Error;
};

void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  return j.at(key).get<T>();
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

PotentialSpec parse_potential(const json& j) {
  if (!j.is_object()) throw ConfigError("potential: expected an object");
  std::string fam = require<std::string>(j, "family", "potential");
  PotentialSpec V;
  if (fam == "Constant") {
    allow_keys(j, {"family", "a", "holder_smooth"}, "potential");
    V = PotentialSpec::constant(require<double>(j, "a", "potential"));
  } else if (fam == "PowerLog") {
    allow_keys(j, {"family", "A", "gamma", "tau", "holder_smooth"}, "potential");
    V = PotentialSpec::power_log(get_or(j, "A", 1.0), require<double>(j, "gamma", "potential"),
                                 get_or(j, "tau", 0.0));
  } else if (fam == "LogLog") {
    allow_keys(j, {"family", "holder_smooth"}, "potential");
    V = PotentialSpec::loglog();
  } else if (fam == "Tabulated") {
    allow_keys(j, {"family", "csv", "sidecar", "holder_smooth"}, "potential");
    V = PotentialSpec::tabulated(
        RadialProfile::read(require<std::string>(j, "csv", "potential"), get_or<std::string>(j, "sidecar", "")));
  } else {
    throw ConfigError("potential: unknown family '" + fam + "'");
  }
  V.holder_smooth = get_or(j, "holder_smooth", true);
  return V;
}

LambdaMode parse_mode(const std::string& s) {
  if (s == "SmallLambda") return LambdaMode::SmallLambda;
  if (s == "LargeLambda") return LambdaMode::LargeLambda;
  if (s == "GivenLambda") return LambdaMode::GivenLambda;
  throw ConfigError("unknown lambda_mode '" + s + "'");
}

ExistenceQuery parse_query(const json& j) {
  ExistenceQuery q;
  q.N = require<int>(j, "N", "config");
  q.kernel = KernelParams{q.N, get_or(j, "alpha", 0.0), get_or(j, "beta", 0.0)};
  q.p = require<double>(j, "p", "config");
  q.q = require<double>(j, "q", "config");
  q.potential = j.contains("potential") ? parse_potential(j.at("potential")) : PotentialSpec::constant(1.0);
  q.lambda_mode = parse_mode(get_or<std::string>(j, "lambda_mode", "SmallLambda"));
  q.lambda_value = get_or(j, "lambda", 0.0);
  q.validate();
  return q;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

ojson verdict_json(const Verdict& v) {
  ojson j;
  j["verdict"] = verdict_name(v.tag);
  if (v.recipe) j["recipe"] = recipe_name(*v.recipe);
  if (!v.witness.empty()) j["witness"] = v.witness;
  return j;
}

// ---- commands ------------------------------------------------------------------

int cmd_classify(const json& cfg, const fs::path& out) {
  allow_keys(cfg, {"N", "alpha", "beta", "p", "q", "potential", "lambda_mode", "lambda"}, "config");
  ExistenceQuery q = parse_query(cfg);
  try {
    ojson j = verdict_json(classify(q));
    std::cout << j.dump() << '\n';
    write_text(out / "verdict.json", j.dump(2) + "\n");
    return kOk;
  } catch (const Inconclusive& e) {
    ojson j;
    j["verdict"] = "Inconclusive";
    j["reason"] = e.what();
    std::cout << j.dump() << '\n';
    write_text(out / "verdict.json", j.dump(2) + "\n");
    return kInconclusive;
  }
}

struct AuditSet {
  double alpha, beta, gamma;
};

int cmd_audit(const json& cfg, const fs::path& out) {
  allow_keys(cfg, {"N", "sets", "radii", "threshold", "rel_tol"}, "config");
  int N = get_or(cfg, "N", 3);
  std::vector<AuditSet> sets;
  if (cfg.contains("sets")) {
    for (const auto& s : cfg.at("sets")) {
      allow_keys(s, {"alpha", "beta", "gamma"}, "sets[]");
      sets.push_back({require<double>(s, "alpha", "sets[]"), get_or(s, "beta", 0.0), require<double>(s, "gamma", "sets[]")});
    }
  } else {
    if (N != 3) throw ConfigError("the default parameter sets are for N = 3; give 'sets' explicitly");
    sets = {{2, 0, 2.5}, {1, 0, 2}, {1, -1, 2}, {1, -2, 2}, {1, 0, 1}};
  }
  std::vector<double> radii;
  if (cfg.contains("radii")) {
    radii = cfg.at("radii").get<std::vector<double>>();
  } else {
    for (int i = 0; i < 7; ++i) radii.push_back(std::pow(10.0, -1.0 - 0.5 * i));
  }
  double threshold = get_or(cfg, "threshold", 50.0);
  QuadratureConfig qc;
  qc.rel_tol = get_or(cfg, "rel_tol", qc.rel_tol);
  qc.validate();
  for (double r : radii)
    if (!(r > 0.0 && r <= 1.0 / 3.0 + 1e-12)) throw ConfigError("radii must lie in (0, 1/3]");
  for (const auto& s : sets) {
    if (s.gamma >= N)
      throw ConfigError("gamma = " + fmt_double(s.gamma) +
                        " >= N: the integral I diverges at the origin, no envelope exists");
    check_estimate_domain(N, s.alpha, s.gamma);
  }

  std::string rows = "alpha,beta,gamma,r,I_value,envelope,ratio\n";
  std::string summary = "regime,alpha,beta,gamma,min_ratio,max_ratio,spread,verdict\n";
  for (const auto& s : sets) {
    Envelope env = envelope_I(N, s.alpha, s.beta, s.gamma);
    std::vector<AuditSample> samples;
    bool flagged = false;
    for (double r : radii) {
      double I = std::numeric_limits<double>::quiet_NaN();
      try {
        I = integral_I(N, s.alpha, s.beta, s.gamma, r, 0.0, qc);
        samples.push_back({r, I});
      } catch (const NonConvergence&) {
        flagged = true;
      }
      double phi = env(r);
      rows += fmt_double(s.alpha) + ',' + fmt_double(s.beta) + ',' + fmt_double(s.gamma) + ',' + fmt_double(r) +
              ',' + fmt_double(I) + ',' + fmt_double(phi) + ',' + fmt_double(I / phi) + '\n';
    }
    std::string verdict = "flagged";
    AuditSummary sm;
    if (!samples.empty()) sm = audit_two_sided(samples, env);
    if (!flagged) verdict = sm.bounded(threshold) ? "bounded" : "unbounded";
    summary += std::string(regime_name(classify_regime(N, s.alpha, s.beta, s.gamma))) + ',' + fmt_double(s.alpha) +
               ',' + fmt_double(s.beta) + ',' + fmt_double(s.gamma) + ',' + fmt_double(sm.min_ratio) + ',' +
               fmt_double(sm.max_ratio) + ',' + fmt_double(sm.spread) + ',' + verdict + '\n';
  }
  write_text(out / "audit.csv", rows);
  write_text(out / "audit_summary.csv", summary);
  std::cout << summary;
  return kOk;
}

ojson mass_json(const SingularMass& s) {
  ojson j;
  j["m_est"] = s.m_est;
  j["fit_window"] = {s.window_lo, s.window_hi};
  j["fit_spread"] = s.fit_spread;
  return j;
}

int cmd_solve(const json& cfg, const fs::path& out, int threads) {
  allow_keys(cfg,
             {"N", "alpha", "beta", "p", "q", "potential", "lambda_mode", "lambda", "m", "schedule",
              "nodes_per_octave", "total_nodes", "tol", "max_iter", "tol_mono", "lambda_floor", "lambda_ceiling"},
             "config");
  ExistenceQuery q = parse_query(cfg);
  SolverConfig sc;
  sc.m = get_or(cfg, "m", sc.m);
  sc.nodes_per_octave = get_or(cfg, "nodes_per_octave", sc.nodes_per_octave);
  sc.total_nodes = get_or(cfg, "total_nodes", sc.total_nodes);
  sc.tol = get_or(cfg, "tol", sc.tol);
  sc.max_iter = get_or(cfg, "max_iter", sc.max_iter);
  sc.tol_mono = get_or(cfg, "tol_mono", sc.tol_mono);
  sc.lambda_floor = get_or(cfg, "lambda_floor", sc.lambda_floor);
  sc.lambda_ceiling = get_or(cfg, "lambda_ceiling", sc.lambda_ceiling);
  sc.conv.threads = threads;
  std::vector<int> schedule = get_or(cfg, "schedule", std::vector<int>{64});
  sc.validate();

  SolverSetup setup;
  try {
    setup = prepare_solver(q, schedule, sc);
  } catch (const RecipeUnavailable& e) {
    std::cerr << "solve: " << e.what() << '\n';
    return kNoRecipe;
  }
  IterationConfig ic{sc.tol, sc.max_iter, sc.tol_mono};
  std::vector<ContinuationStep> steps;
  try {
    steps = continuation_shrink(setup, schedule, ic);
  } catch (const MonotonicityViolation& e) {
    std::cerr << "solve: " << e.what() << '\n';
    return kMonotonicity;
  } catch (const NonConvergence& e) {
    std::cerr << "solve: " << e.what() << '\n';
    return kNonConvergence;
  }
  const auto& last = steps.back().state;
  write_solution_csv((out / "solution.csv").string(), last.current, q.N);
  write_iteration_log((out / "iterations.csv").string(), last);

  ojson j;
  j["recipe"] = pair_case_name(setup.pair.case_tag);
  j["lambda"] = setup.lambda;
  j["lambda_trials"] = setup.lambda_trials;
  const auto& pp = setup.pair.params;
  j["params"] = {{"m", pp.m}, {"k", pp.k}, {"sigma", pp.sigma}, {"M", pp.M}, {"mu", pp.mu}};
  j["nodes"] = last.current.size();
  j["iterations"] = last.iterate_index;
  j["converged"] = last.converged;
  j["monotone_ok"] = last.monotone_ok;
  j["sandwich_ok"] = last.sandwich_ok;
  try {
    j["singular_mass"] = mass_json(extract_singular_mass(last.current, q.N));
    j["profile_coefficient"] = mass_json(profile_coefficient(last.current, q.N));
  } catch (const WindowTooSmall& e) {
    j["singular_mass"] = nullptr;
    j["profile_coefficient"] = nullptr;
    j["mass_note"] = e.what();
  }
  ojson cont = ojson::array();
  for (const auto& s : steps) {
    ojson c;
    c["k"] = s.k;
    c["iterations"] = s.state.iterate_index;
    c["change"] = std::isnan(s.change) ? ojson(nullptr) : ojson(s.change);
    cont.push_back(c);
  }
  j["continuation"] = cont;
  write_text(out / "mass.json", j.dump(2) + "\n");
  std::cout << j.dump() << '\n';
  return last.converged && last.monotone_ok && last.sandwich_ok ? kOk : kMonotonicity;
}

std::vector<double> parse_axis(const json& j, const char* name) {
  if (j.is_array()) return j.get<std::vector<double>>();
  allow_keys(j, {"lo", "hi", "count"}, name);
  double lo = get_or(j, "lo", 0.0), hi = require<double>(j, "hi", name);
  int count = require<int>(j, "count", name);
  if (!(hi > lo) || count < 1) throw ConfigError(std::string(name) + ": need hi > lo and count >= 1");
  std::vector<double> v;
  for (int i = 1; i <= count; ++i) v.push_back(lo + (hi - lo) * i / count);
  return v;
}

int cmd_sweep(const json& cfg, const fs::path& out, int threads) {
  allow_keys(cfg, {"N", "alpha", "beta", "p", "q", "potential", "lambda_mode", "lambda"}, "config");
  int N = require<int>(cfg, "N", "config");
  double alpha = get_or(cfg, "alpha", 0.0), beta = get_or(cfg, "beta", 0.0);
  auto ps = parse_axis(require<json>(cfg, "p", "config"), "p");
  auto qs = parse_axis(require<json>(cfg, "q", "config"), "q");
  for (double x : ps)
    if (!(x > 0.0)) throw ConfigError("p values must be positive");
  for (double x : qs)
    if (!(x > 0.0)) throw ConfigError("q values must be positive");
  PotentialSpec V = cfg.contains("potential") ? parse_potential(cfg.at("potential")) : PotentialSpec::constant(1.0);
  LambdaMode mode = parse_mode(get_or<std::string>(cfg, "lambda_mode", "SmallLambda"));
  double lambda = get_or(cfg, "lambda", 0.0);
  ExistenceQuery probe{N, KernelParams{N, alpha, beta}, ps[0], qs[0], V, mode, lambda};
  probe.validate();
  std::vector<SweepRow> rows;
  try {
    rows = run_sweep(N, alpha, beta, ps, qs, V, mode, lambda, threads);
  } catch (const Inconclusive& e) {
    std::cerr << "sweep: " << e.what() << '\n';
    return kInconclusive;
  }
  std::string text = "N,alpha,beta,p,q,verdict,witness\n";
  for (const auto& r : rows)
    text += std::to_string(r.N) + ',' + fmt_double(r.alpha) + ',' + fmt_double(r.beta) + ',' + fmt_double(r.p) +
            ',' + fmt_double(r.q) + ',' + r.verdict + ',' + r.witness + '\n';
  write_text(out / "sweep.csv", text);
  std::cout << rows.size() << " rows\n";
  return kOk;
}

// Random mean-value checks: the angular mean of E at radius s equals
// E(max(r, s)).
int cmd_selftest(const json& cfg, const fs::path& out) {
  allow_keys(cfg, {"cases", "seed", "tol"}, "config");
  int cases = get_or(cfg, "cases", 100);
  auto seed = get_or<std::uint64_t>(cfg, "seed", 20240601u);
  double tol = get_or(cfg, "tol", 1e-8);
  if (cases < 1) throw ConfigError("cases must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim(2, 5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::string text = "N,r,s,mean,expected,rel_error\n";
  int failures = 0;
  double worst = 0.0;
  for (int c = 0; c < cases; ++c) {
    int N = dim(rng);
    double r = std::pow(10.0, -3.0 * unit(rng)), s = std::pow(10.0, -3.0 * unit(rng));
    if (r == s) s *= 0.5;
    double mean = angular_mean(N, r, s, [N](double d) { return fundamental_laplace(N, d); });
    double expected = fundamental_laplace(N, std::max(r, s));
    double err = std::fabs(mean - expected) / std::fabs(expected);
    worst = std::max(worst, err);
    if (!(err < tol)) ++failures;
    text += std::to_string(N) + ',' + fmt_double(r) + ',' + fmt_double(s) + ',' + fmt_double(mean) + ',' +
            fmt_double(expected) + ',' + fmt_double(err) + '\n';
  }
  write_text(out / "meanvalue.csv", text);
  std::printf("%d cases, worst relative error %.3e, %d above %.1e\n", cases, worst, failures, tol);
  return failures == 0 ? kOk : kSelftestFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical lab for singular solutions of Choquard-type equations on the punctured ball"};
  app.require_subcommand(1);
  std::string config, outdir = ".";
  int threads = 1;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config, "JSON run configuration");
    if (config_required) opt->required();
    sub->add_option("--out", outdir, "output directory (created if missing)");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  };
  auto* c_classify = app.add_subcommand("classify", "existence verdict for one query");
  auto* c_audit = app.add_subcommand("audit-estimates", "two-sided envelope audit of I");
  auto* c_solve = app.add_subcommand("solve", "monotone iteration for a singular solution");
  auto* c_sweep = app.add_subcommand("sweep", "verdicts over a (p,q) grid");
  auto* c_self = app.add_subcommand("selftest-meanvalue", "mean-value identity self-test");
  add_common(c_classify, true);
  add_common(c_audit, false);
  add_common(c_solve, true);
  add_common(c_sweep, true);
  add_common(c_self, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kInvalid;
  }

  try {
    json cfg = config.empty() ? json::object() : load_config(config);
    fs::path out(outdir);
    fs::create_directories(out);
    if (c_classify->parsed()) return cmd_classify(cfg, out);
    if (c_audit->parsed()) return cmd_audit(cfg, out);
    if (c_solve->parsed()) return cmd_solve(cfg, out, threads);
    if (c_sweep->parsed()) return cmd_sweep(cfg, out, threads);
    if (c_self->parsed()) return cmd_selftest(cfg, out);
  } catch (const Inconclusive& e) {
    std::cerr << "inconclusive: " << e.what() << '\n';
    return kInconclusive;
  } catch (const json::exception& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kInvalid;
  } catch (const DomainError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kInvalid;
  } catch (const ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  }
  return kInvalid;
}
