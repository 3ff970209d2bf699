#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "convolution.hpp"
#include "errors.hpp"
#include "special_functions.hpp"

namespace singlab {

// Tolerance for landing exactly on a critical line (alpha+gamma = N,
// beta = -1, p = (N-alpha)/(N-2), ...).
inline constexpr double kCriticalTol = 1e-9;

inline int compare_critical(double x, double crit) {
  double scale = std::max(1.0, std::fabs(crit));
  if (std::fabs(x - crit) <= kCriticalTol * scale) return 0;
  return x < crit ? -1 : 1;
}

enum class Regime { Supercritical, CriticalAbove, CriticalLog, CriticalBelow, Subcritical };

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::Supercritical: return "Supercritical";
    case Regime::CriticalAbove: return "CriticalAbove";
    case Regime::CriticalLog: return "CriticalLog";
    case Regime::CriticalBelow: return "CriticalBelow";
    case Regime::Subcritical: return "Subcritical";
  }
  return "?";
}

// Phi(r) = r^{r_exp} log^{log_exp}(2e/r) (log log(2e/r))^{loglog_exp}
struct Envelope {
  std::string label;
  double r_exp = 0.0;
  double log_exp = 0.0;
  double loglog_exp = 0.0;

  double operator()(double r) const {
    if (!(r > 0.0 && r < 1.0 + 1e-12)) throw DomainError("envelope: r must lie in (0, 1)");
    double L = log2e(r);
    double v = r_exp == 0.0 ? 1.0 : std::pow(r, r_exp);
    if (log_exp != 0.0) v *= std::pow(L, log_exp);
    if (loglog_exp != 0.0) v *= std::pow(std::log(L), loglog_exp);
    return v;
  }
};

inline void check_estimate_domain(int N, double alpha, double gamma) {
  if (N < 2) throw DomainError("N must be >= 2");
  if (!(alpha >= 0.0 && alpha < N)) throw DomainError("alpha must satisfy 0 <= alpha < N");
  if (gamma >= N)
    throw DomainError("gamma >= N: the integral diverges at the origin, use the divergence guard");
  if (!(gamma >= 0.0)) throw DomainError("gamma must be nonnegative");
}

inline Regime classify_regime(int N, double alpha, double beta, double gamma) {
  check_estimate_domain(N, alpha, gamma);
  int c = compare_critical(alpha + gamma, N);
  if (c > 0) return Regime::Supercritical;
  if (c < 0) return Regime::Subcritical;
  int b = compare_critical(beta, -1.0);
  if (b > 0) return Regime::CriticalAbove;
  if (b == 0) return Regime::CriticalLog;
  return Regime::CriticalBelow;
}

inline Envelope envelope_I(int N, double alpha, double beta, double gamma) {
  Regime reg = classify_regime(N, alpha, beta, gamma);
  Envelope e;
  e.label = regime_name(reg);
  switch (reg) {
    case Regime::Supercritical:
      e.r_exp = N - alpha - gamma;
      e.log_exp = beta;
      break;
    case Regime::CriticalAbove: e.log_exp = 1.0 + beta; break;
    case Regime::CriticalLog: e.loglog_exp = 1.0; break;
    case Regime::CriticalBelow:
    case Regime::Subcritical: break;
  }
  return e;
}

inline Envelope envelope_J(int N, double alpha, double /*beta*/, double theta) {
  if (N < 2 || !(alpha >= 0.0 && alpha < N)) throw DomainError("envelope_J: need 0 <= alpha < N");
  if (!(theta >= 0.0)) throw DomainError("envelope_J: theta must be nonnegative");
  return Envelope{"Bounded"};
}

// Profile of (K * u^p) u^q for u ~ r^{2-N}.
inline Envelope psi_profile(int N, double alpha, double beta, double p, double q) {
  if (N < 3) throw DomainError("psi_profile: N must be >= 3");
  if (!(p > 0.0 && q > 0.0)) throw DomainError("psi_profile: p and q must be positive");
  if (!(alpha >= 0.0 && alpha < N)) throw DomainError("psi_profile: need 0 <= alpha < N");
  const double pstar = (N - alpha) / (N - 2.0);
  Envelope e;
  e.r_exp = -q * (N - 2);
  int c = compare_critical(p, pstar);
  if (c < 0) {
    e.label = "p<p*";
  } else if (c == 0) {
    int b = compare_critical(beta, -1.0);
    if (b < 0) {
      e.label = "p=p*,beta<-1";
    } else if (b == 0) {
      e.label = "p=p*,beta=-1";
      e.loglog_exp = 1.0;
    } else {
      e.label = "p=p*,beta>-1";
      e.log_exp = 1.0 + beta;
    }
  } else {
    e.label = "p>p*";
    e.r_exp = N - alpha - (p + q) * (N - 2);
    e.log_exp = beta;
  }
  return e;
}

struct AuditSample {
  double r;
  double value;
};

struct AuditSummary {
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  double spread = 0.0;
  bool bounded(double threshold) const { return spread < threshold; }
};

inline AuditSummary audit_two_sided(const std::vector<AuditSample>& samples, const Envelope& env) {
  if (samples.empty()) throw DomainError("audit_two_sided: no samples");
  AuditSummary s{std::numeric_limits<double>::infinity(), 0.0, 0.0};
  for (const auto& x : samples) {
    double ratio = x.value / env(x.r);
    s.min_ratio = std::min(s.min_ratio, ratio);
    s.max_ratio = std::max(s.max_ratio, ratio);
  }
  s.spread = s.max_ratio / s.min_ratio;
  return s;
}

// I_{alpha,beta,gamma}(rho, x) at |x| = r
inline double integral_I(int N, double alpha, double beta, double gamma, double r, double rho = 0.0,
                         const QuadratureConfig& cfg = {}) {
  if (gamma >= N && rho == 0.0)
    throw DivergentIntegrand("gamma >= N: the integral is infinite");
  KernelParams kp{N, alpha, beta};
  return convolve_radial(
      kp, [gamma](double s) { return std::pow(s, -gamma); }, SingExp{gamma, 0.0}, r, rho, cfg);
}

// J_{alpha,beta,theta}(rho, x) at |x| = r
inline double integral_J(int N, double alpha, double beta, double theta, double r, double rho = 0.0,
                         const QuadratureConfig& cfg = {}) {
  KernelParams kp{N, alpha, beta};
  return convolve_radial(
      kp, [theta](double s) { return std::pow(log2e(s), theta); }, SingExp{0.0, theta}, r, rho, cfg);
}

struct AuditRow {
  double alpha, beta, gamma, r, value, envelope, ratio;
};

struct RegimeAudit {
  Regime regime;
  std::vector<AuditRow> rows;
  AuditSummary summary;
};

inline RegimeAudit run_regime_audit(int N, double alpha, double beta, double gamma,
                                    const std::vector<double>& radii, const QuadratureConfig& cfg = {}) {
  Envelope env = envelope_I(N, alpha, beta, gamma);
  RegimeAudit out{classify_regime(N, alpha, beta, gamma), {}, {}};
  std::vector<AuditSample> samples;
  for (double r : radii) {
    if (!(r > 0.0 && r <= 1.0 / 3.0 + 1e-12)) throw DomainError("audit radii must lie in (0, 1/3]");
    double I = integral_I(N, alpha, beta, gamma, r, 0.0, cfg);
    double phi = env(r);
    out.rows.push_back({alpha, beta, gamma, r, I, phi, I / phi});
    samples.push_back({r, I});
  }
  out.summary = audit_two_sided(samples, env);
  return out;
}

struct HolderProbe {
  double sup_ratio = 0.0;
  std::vector<double> separations;
  std::vector<double> ratios;
  // growth of the supremum once separations below 2^-6 are added;
  // a bounded modulus keeps this near 1
  double sup_drift() const {
    double coarse = 0.0;
    for (std::size_t i = 0; i < ratios.size(); ++i)
      if (separations[i] >= 1.0 / 64.0) coarse = std::max(coarse, ratios[i]);
    return coarse > 0.0 ? sup_ratio / coarse : 1.0;
  }
};

// Samples |If(x) - If(y)| / (|x-y|^{N/s'-alpha} log^{beta+}(2e/|x-y|)) along a
// ray, for dyadic separations 2^-3 .. 2^-10 from base radii inside the ball.
template <class F>
HolderProbe holder_modulus_probe(const KernelParams& kp, F&& f, SingExp sing, double s_exp, int pair_budget,
                                 const QuadratureConfig& cfg = {}) {
  kp.validate();
  if (!(s_exp > 1.0)) throw DomainError("holder probe: integrability exponent must exceed 1");
  const double s_conj = s_exp / (s_exp - 1.0);
  const double expo = kp.dim / s_conj - kp.alpha;
  if (!(expo > 0.0 && expo < 1.0))
    throw DomainError("holder probe: need alpha < N/s' < alpha + 1");
  if (pair_budget < 1) throw DomainError("holder probe: pair budget must be positive");
  const double beta_plus = std::max(kp.beta, 0.0);
  const std::vector<double> bases{0.5, 0.25};
  HolderProbe out;
  int used = 0;
  for (double x : bases) {
    double Ix = convolve_radial(kp, f, sing, x, 0.0, cfg);
    for (int k = 3; k <= 10 && used < pair_budget; ++k, ++used) {
      double d = std::ldexp(1.0, -k);
      double Iy = convolve_radial(kp, f, sing, x + d, 0.0, cfg);
      double modulus = std::pow(d, expo) * std::pow(log2e(d), beta_plus);
      double ratio = std::fabs(Ix - Iy) / modulus;
      out.separations.push_back(d);
      out.ratios.push_back(ratio);
      out.sup_ratio = std::max(out.sup_ratio, ratio);
    }
  }
  return out;
}

}  // namespace singlab
