#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "asymptotic_estimates.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "radial_profile.hpp"
#include "special_functions.hpp"

namespace singlab {

// A r^{-gamma} log^tau(e/r)
struct PowerLog {
  double A = 1.0;
  double gamma = 0.0;
  double tau = 0.0;
};
struct ConstantPotential {
  double a = 0.0;
};
// log log(2e/r)
struct LogLogPotential {};
struct TabulatedPotential {
  RadialProfile profile;
};

struct PotentialSpec {
  std::variant<PowerLog, ConstantPotential, LogLogPotential, TabulatedPotential> family;
  bool holder_smooth = true;

  static PotentialSpec power_log(double A, double gamma, double tau) {
    if (!(A > 0.0) || !std::isfinite(gamma) || !std::isfinite(tau))
      throw DomainError("PowerLog potential needs A > 0 and finite exponents");
    return {PowerLog{A, gamma, tau}};
  }
  static PotentialSpec constant(double a) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw DomainError("constant potential must be >= 0");
    return {ConstantPotential{a}};
  }
  static PotentialSpec loglog() { return {LogLogPotential{}}; }
  static PotentialSpec tabulated(RadialProfile p) {
    for (double v : p.values())
      if (v < 0.0) throw DomainError("tabulated potential must be nonnegative");
    return {TabulatedPotential{std::move(p)}};
  }

  double operator()(double r) const {
    if (!(r > 0.0)) throw DomainError("potential: r must be positive");
    if (auto* p = std::get_if<PowerLog>(&family)) {
      double v = p->A * (p->gamma == 0.0 ? 1.0 : std::pow(r, -p->gamma));
      if (p->tau != 0.0) v *= std::pow(std::log(kE / r), p->tau);
      return v;
    }
    if (auto* c = std::get_if<ConstantPotential>(&family)) return c->a;
    if (std::holds_alternative<LogLogPotential>(family)) return std::log(log2e(r));
    return std::get<TabulatedPotential>(family).profile(r);
  }

  std::string name() const {
    static const char* names[] = {"PowerLog", "Constant", "LogLog", "Tabulated"};
    return names[family.index()];
  }

  bool is_constant() const { return std::holds_alternative<ConstantPotential>(family); }

  // sup of V on (0,1]; infinity when V is unbounded near 0
  double sup() const {
    if (auto* c = std::get_if<ConstantPotential>(&family)) return c->a;
    if (std::holds_alternative<LogLogPotential>(family)) return std::numeric_limits<double>::infinity();
    if (auto* p = std::get_if<PowerLog>(&family)) {
      bool bounded = p->gamma < 0.0 || (p->gamma == 0.0 && p->tau <= 0.0);
      if (!bounded) return std::numeric_limits<double>::infinity();
    }
    if (auto* t = std::get_if<TabulatedPotential>(&family)) {
      SingExp s = t->profile.sing_exp();
      if (s.a > 0.0 || (s.a == 0.0 && s.b > 0.0)) return std::numeric_limits<double>::infinity();
    }
    double best = 0.0;
    for (int i = 0; i <= 4000; ++i) best = std::max(best, (*this)(std::pow(10.0, -12.0 * i / 4000.0)));
    return best;
  }
};

enum class LambdaMode { SmallLambda, LargeLambda, GivenLambda };

inline const char* lambda_mode_name(LambdaMode m) {
  switch (m) {
    case LambdaMode::SmallLambda: return "SmallLambda";
    case LambdaMode::LargeLambda: return "LargeLambda";
    case LambdaMode::GivenLambda: return "GivenLambda";
  }
  return "?";
}

struct ExistenceQuery {
  int N = 3;
  KernelParams kernel{3, 0.0, 0.0};
  double p = 1.0;
  double q = 1.0;
  PotentialSpec potential = PotentialSpec::constant(1.0);
  LambdaMode lambda_mode = LambdaMode::SmallLambda;
  double lambda_value = 0.0;

  void validate() const {
    if (N < 2) throw DomainError("query: N must be >= 2");
    if (kernel.dim != N) throw DomainError("query: kernel dimension must equal N");
    kernel.validate();
    if (!(p > 0.0 && std::isfinite(p)) || !(q > 0.0 && std::isfinite(q)))
      throw DomainError("query: p and q must be positive");
    if (lambda_mode == LambdaMode::GivenLambda && !(lambda_value > 0.0))
      throw DomainError("query: a given lambda must be positive");
  }
};

enum class VerdictTag { SingularProfileExists, NoSingularSolution, RemovableOnly, OutOfScope };
enum class Recipe { N2Log, CaseA, CaseB, CaseC, ConstantPotential };

inline const char* verdict_name(VerdictTag t) {
  switch (t) {
    case VerdictTag::SingularProfileExists: return "SingularProfileExists";
    case VerdictTag::NoSingularSolution: return "NoSingularSolution";
    case VerdictTag::RemovableOnly: return "RemovableOnly";
    case VerdictTag::OutOfScope: return "OutOfScope";
  }
  return "?";
}

inline const char* recipe_name(Recipe r) {
  switch (r) {
    case Recipe::N2Log: return "N2Log";
    case Recipe::CaseA: return "CaseA";
    case Recipe::CaseB: return "CaseB";
    case Recipe::CaseC: return "CaseC";
    case Recipe::ConstantPotential: return "ConstantPotential";
  }
  return "?";
}

struct Verdict {
  VerdictTag tag;
  std::optional<Recipe> recipe;
  std::string witness;
};

// ---- divergence detector ---------------------------------------------------

struct DivergenceVerdict {
  enum class Kind { Converges, Diverges, Inconclusive };
  enum class Rate { None, Log, Power };
  Kind kind = Kind::Inconclusive;
  Rate rate = Rate::None;
  double value = 0.0;               // extrapolated integral when converging
  std::vector<double> annuli;        // A_j over [2^{-j-1}, 2^{-j}]

  bool converges() const { return kind == Kind::Converges; }
  bool diverges() const { return kind == Kind::Diverges; }
  std::string label() const {
    if (kind == Kind::Converges) return "Converges";
    if (kind == Kind::Diverges) return rate == Rate::Log ? "Diverges(log)" : "Diverges(power)";
    return "Inconclusive";
  }
};

struct DivergenceConfig {
  int depth = 40;
  double ratio_threshold = 0.95;
  int tail = 10;  // ratios inspected at the deep end
};

// Decides whether int_0^{1/2} h(r) dr is finite from dyadic pieces.
template <class H>
DivergenceVerdict dyadic_divergence_test(H&& h, const DivergenceConfig& dc = {}) {
  DivergenceVerdict out;
  QuadratureConfig qc{1e-10, 1e-300, 2000};
  for (int j = 1; j <= dc.depth; ++j) {
    double lo = std::log(std::ldexp(1.0, -j - 1)), hi = std::log(std::ldexp(1.0, -j));
    auto g = [&](double t) {
      double r = std::exp(t);
      return h(r) * r;
    };
    out.annuli.push_back(integrate_adaptive(g, lo, hi, SingularEnds::None, qc).value);
  }
  const auto& A = out.annuli;
  bool all_zero = true;
  for (double a : A) {
    if (!std::isfinite(a) || a < 0.0) return out;  // sign changes: not decidable here
    if (a != 0.0) all_zero = false;
  }
  if (all_zero) {
    out.kind = DivergenceVerdict::Kind::Converges;
    return out;
  }
  const int n = static_cast<int>(A.size());
  double qmin = std::numeric_limits<double>::infinity(), qmax = 0.0;
  for (int j = n - dc.tail; j < n; ++j) {
    if (A[j - 1] == 0.0) return out;
    double q = A[j] / A[j - 1];
    qmin = std::min(qmin, q);
    qmax = std::max(qmax, q);
  }
  double last = A[n - 1] / A[n - 2];
  if (qmax < dc.ratio_threshold) {
    double sum = 0.0;
    for (double a : A) sum += a;
    out.kind = DivergenceVerdict::Kind::Converges;
    out.value = sum + A[n - 1] * last / (1.0 - last);
    return out;
  }
  if (qmin >= dc.ratio_threshold) {
    out.kind = DivergenceVerdict::Kind::Diverges;
    out.rate = last > 1.05 && qmin > 1.0 ? DivergenceVerdict::Rate::Power : DivergenceVerdict::Rate::Log;
    return out;
  }
  return out;
}

// L^1 test of g on B_{1/2} in dimension N.
template <class G>
DivergenceVerdict l1loc_divergence_test(G&& g, int N, const DivergenceConfig& dc = {}) {
  const double sigma = surface_area(N);
  return dyadic_divergence_test([&](double r) { return g(r) * sigma * std::pow(r, N - 1); }, dc);
}

inline DivergenceVerdict l1loc_divergence_test(const RadialProfile& g, int N, const DivergenceConfig& dc = {}) {
  return l1loc_divergence_test([&](double r) { return g(r); }, N, dc);
}

// ---- predicates --------------------------------------------------------------

inline bool dini_check(int N, const PotentialSpec& V) {
  if (N < 2) throw DomainError("dini_check: N must be >= 2");
  if (auto* p = std::get_if<PowerLog>(&V.family)) {
    int c = compare_critical(p->gamma, 2.0);
    if (c < 0) return true;
    if (c > 0) return false;
    return N == 2 ? compare_critical(p->tau, -2.0) < 0 : compare_critical(p->tau, -1.0) < 0;
  }
  if (!std::holds_alternative<TabulatedPotential>(V.family)) return true;
  auto v = N == 2 ? dyadic_divergence_test([&](double s) { return s * std::log(1.0 / s) * V(s); })
                  : dyadic_divergence_test([&](double s) { return s * V(s); });
  if (v.kind == DivergenceVerdict::Kind::Inconclusive)
    throw Inconclusive("dini_check: tabulated potential extrapolation is inconclusive");
  return v.converges();
}

// Empty when the exponent window for u ~ r^{2-N} holds, otherwise the
// identifier of the violated condition.
inline std::optional<std::string> exponent_condition_failure(int N, double alpha, double beta, double p,
                                                             double q) {
  if (N < 3) throw DomainError("exponent conditions need N >= 3");
  if (!(p > 0.0 && q > 0.0)) throw DomainError("exponent conditions need p, q > 0");
  if (!(alpha >= 0.0 && alpha < N)) throw DomainError("exponent conditions need 0 <= alpha < N");
  if (compare_critical(std::max(p, q), N / (N - 2.0)) >= 0) return "max_exponent";
  int c = compare_critical(p + q, (2.0 * N - alpha) / (N - 2.0));
  if (c > 0) return "sum_exponent";
  if (c == 0 && compare_critical(beta, -1.0) >= 0) return "critical_sum_beta";
  return std::nullopt;
}

inline bool exponent_conditions_hold(int N, double alpha, double beta, double p, double q) {
  return !exponent_condition_failure(N, alpha, beta, p, q).has_value();
}

// V = o(r^{-(q-1)(N-2)}) for q > 1, V = O(1) for q <= 1.
inline bool potential_growth_check(int N, double q, const PotentialSpec& V) {
  if (N < 3) throw DomainError("potential_growth_check: N must be >= 3");
  if (!(q > 0.0)) throw DomainError("potential_growth_check: q must be positive");
  if (std::holds_alternative<TabulatedPotential>(V.family))
    throw Inconclusive("potential growth of a tabulated potential is not decided");
  const bool superlinear = compare_critical(q, 1.0) > 0;
  if (std::holds_alternative<ConstantPotential>(V.family)) return true;
  if (std::holds_alternative<LogLogPotential>(V.family)) return superlinear;
  const auto& p = std::get<PowerLog>(V.family);
  if (superlinear) {
    int c = compare_critical(p.gamma, (q - 1.0) * (N - 2));
    return c < 0 || (c == 0 && p.tau < 0.0);
  }
  int c = compare_critical(p.gamma, 0.0);
  return c < 0 || (c == 0 && p.tau <= 0.0);
}

// V = O(log^eps(2e/r)) for every eps > 0.
inline bool n2_slowgrowth_check(const PotentialSpec& V) {
  if (std::holds_alternative<TabulatedPotential>(V.family))
    throw Inconclusive("slow growth of a tabulated potential is not decided");
  if (!std::holds_alternative<PowerLog>(V.family)) return true;
  const auto& p = std::get<PowerLog>(V.family);
  int c = compare_critical(p.gamma, 0.0);
  if (c < 0) return true;
  if (c > 0) return false;
  return p.tau <= 0.0;
}

inline Verdict classify(const ExistenceQuery& query) {
  query.validate();
  const int N = query.N;
  const double p = query.p, q = query.q;
  if (N == 2) {
    if (compare_critical(q, 1.0) <= 0) return {VerdictTag::OutOfScope, std::nullopt, "q_at_most_one"};
    if (!n2_slowgrowth_check(query.potential)) {
      if (dini_check(2, query.potential)) return {VerdictTag::RemovableOnly, std::nullopt, "slow_growth"};
      return {VerdictTag::OutOfScope, std::nullopt, "slow_growth"};
    }
    if (query.lambda_mode != LambdaMode::SmallLambda)
      return {VerdictTag::OutOfScope, std::nullopt, "lambda_mode"};
    return {VerdictTag::SingularProfileExists, Recipe::N2Log, ""};
  }
  const auto& k = query.kernel;
  if (auto fail = exponent_condition_failure(N, k.alpha, k.beta, p, q))
    return {VerdictTag::NoSingularSolution, std::nullopt, *fail};
  if (!potential_growth_check(N, q, query.potential))
    return {VerdictTag::NoSingularSolution, std::nullopt, "potential_growth"};
  if (!dini_check(N, query.potential)) return {VerdictTag::NoSingularSolution, std::nullopt, "dini"};
  int c = compare_critical(p + q, 1.0);
  if (query.lambda_mode == LambdaMode::GivenLambda && query.potential.is_constant() && c != 0)
    return {VerdictTag::SingularProfileExists, Recipe::ConstantPotential, ""};
  if (c > 0) return {VerdictTag::SingularProfileExists, Recipe::CaseA, ""};
  if (c < 0) return {VerdictTag::SingularProfileExists, Recipe::CaseB, ""};
  return {VerdictTag::SingularProfileExists, Recipe::CaseC, ""};
}

// ---- (p,q) sweeps ------------------------------------------------------------

struct SweepRow {
  int N;
  double alpha, beta, p, q;
  std::string verdict;
  std::string witness;
};

inline std::vector<SweepRow> run_sweep(int N, double alpha, double beta, const std::vector<double>& ps,
                                       const std::vector<double>& qs, const PotentialSpec& V,
                                       LambdaMode mode = LambdaMode::SmallLambda, double lambda = 0.0,
                                       int threads = 1) {
  std::vector<SweepRow> rows(ps.size() * qs.size());
  parallel_for(rows.size(), threads, [&](std::size_t idx) {
    std::size_t i = idx / qs.size(), j = idx % qs.size();
    ExistenceQuery qy{N, KernelParams{N, alpha, beta}, ps[i], qs[j], V, mode, lambda};
    Verdict v = classify(qy);
    rows[idx] = {N, alpha, beta, ps[i], qs[j], verdict_name(v.tag),
                 v.recipe ? recipe_name(*v.recipe) : v.witness};
  });
  return rows;
}

}  // namespace singlab
