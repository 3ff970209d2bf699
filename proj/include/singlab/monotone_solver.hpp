#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "classification.hpp"
#include "convolution.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "parallel.hpp"
#include "radial_profile.hpp"
#include "special_functions.hpp"

namespace singlab {

// ---- grids -------------------------------------------------------------------

// r_i = exp(-h (n - i)), i = 0..n. Grids with the same step nest: the nodes
// of a smaller annulus are a suffix of the nodes of a larger one.
inline std::vector<double> geometric_grid(double inner, int intervals) {
  if (!(inner > 0.0 && inner < 1.0)) throw DomainError("grid: inner radius must lie in (0, 1)");
  if (intervals < 2) throw DomainError("grid: need at least 3 nodes");
  const double h = -std::log(inner) / intervals;
  std::vector<double> r(intervals + 1);
  for (int i = 0; i <= intervals; ++i) r[i] = std::exp(-h * (intervals - i));
  return r;
}

// index of the node equal to `inner` on a geometric grid, or -1
inline long lattice_index(const std::vector<double>& grid, double inner) {
  const std::size_t n = grid.size() - 1;
  const double h = std::log(grid[n] / grid[0]) / n;
  double steps = -std::log(inner) / h;
  long s = std::lround(steps);
  if (std::fabs(steps - s) > 1e-6 || s < 2 || s > static_cast<long>(n)) return -1;
  return static_cast<long>(n) - s;
}

// ---- radial operator -------------------------------------------------------------

// Finite-volume form of -v'' - (N-1)/r v' + c(r) v. Face conductances are
// 1 / int s^{1-N} ds over each cell, so radial harmonic functions are
// reproduced exactly; node volumes integrate s^{N-1} over the dual cell
// bounded by geometric midpoints. Off-diagonals are negative for any step,
// which gives an M-matrix whenever c >= 0.
class RadialStencil {
 public:
  RadialStencil(int N, std::vector<double> nodes) : N_(N), r_(std::move(nodes)) {
    if (N < 2) throw DomainError("stencil: N must be >= 2");
    if (r_.size() < 3) throw DomainError("stencil: need at least 3 nodes");
    for (std::size_t i = 1; i < r_.size(); ++i)
      if (!(r_[i] > r_[i - 1] && r_[i - 1] > 0.0)) throw DomainError("stencil: nodes must increase");
    const std::size_t n = r_.size() - 1;
    cond_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double l = std::log(r_[i + 1] / r_[i]);
      double integral = N == 2 ? l : -std::pow(r_[i], 2.0 - N) * std::expm1((2.0 - N) * l) / (N - 2);
      cond_[i] = 1.0 / integral;
    }
    vol_.assign(n + 1, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
      double lo = std::sqrt(r_[i - 1] * r_[i]), hi = std::sqrt(r_[i] * r_[i + 1]);
      vol_[i] = std::pow(lo, N) * std::expm1(N * std::log(hi / lo)) / N;
    }
  }

  int dim() const { return N_; }
  const std::vector<double>& nodes() const { return r_; }

  // (L v)_i at interior node i; c holds the zeroth-order coefficient at nodes
  double apply(const std::vector<double>& v, const std::vector<double>& c, std::size_t i,
               std::size_t offset = 0) const {
    std::size_t k = i - offset;
    double flux = cond_[i - 1] * (v[k] - v[k - 1]) + cond_[i] * (v[k] - v[k + 1]);
    return flux / vol_[i] + c[i] * v[k];
  }

  // Dirichlet solve on nodes first..n; c and rhs are indexed on the full grid.
  std::vector<double> solve(const std::vector<double>& c, const std::vector<double>& rhs, double left,
                            double right, std::size_t first = 0) const {
    const std::size_t n = r_.size() - 1;
    if (first + 2 > n) throw DomainError("stencil: annulus needs an interior node");
    const std::size_t m = n - first - 1;
    std::vector<double> diag(m), upper(m), b(m);
    for (std::size_t j = 0; j < m; ++j) {
      std::size_t i = first + 1 + j;
      diag[j] = cond_[i - 1] + cond_[i] + vol_[i] * c[i];
      upper[j] = -cond_[i];
      b[j] = vol_[i] * rhs[i];
    }
    b[0] += cond_[first] * left;
    b[m - 1] += cond_[n - 1] * right;
    for (std::size_t j = 1; j < m; ++j) {
      if (!(diag[j - 1] > 0.0) || !std::isfinite(diag[j - 1]))
        throw SingularSystem("radial solve: non-positive pivot");
      double w = -cond_[first + j] / diag[j - 1];
      diag[j] -= w * upper[j - 1];
      b[j] -= w * b[j - 1];
    }
    if (!(diag[m - 1] > 0.0) || !std::isfinite(diag[m - 1]))
      throw SingularSystem("radial solve: non-positive pivot");
    std::vector<double> v(m + 2);
    v[0] = left;
    v[m + 1] = right;
    v[m] = b[m - 1] / diag[m - 1];
    for (std::size_t j = m - 1; j-- > 0;) v[j + 1] = (b[j] - upper[j] * v[j + 2]) / diag[j];
    for (double x : v)
      if (!std::isfinite(x)) throw SingularSystem("radial solve: non-finite solution");
    return v;
  }

 private:
  int N_;
  std::vector<double> r_, cond_, vol_;
};

// -v'' - (N-1)/r v' + lambda V v = rhs on (inner, 1), Dirichlet data at both
// ends. The grid is the node set of `rhs`, which must span [inner, 1].
inline RadialProfile linear_bvp_solve(int N, double lambda, const PotentialSpec& V, const RadialProfile& rhs,
                                      double inner, std::pair<double, double> boundary) {
  const auto& r = rhs.nodes();
  if (!(inner > 0.0 && inner < 1.0)) throw DomainError("linear_bvp_solve: inner radius must lie in (0, 1)");
  if (std::fabs(r.front() - inner) > 1e-12 * inner || std::fabs(r.back() - 1.0) > 1e-12)
    throw DomainError("linear_bvp_solve: grid must span [inner, 1]");
  if (!(lambda >= 0.0)) throw DomainError("linear_bvp_solve: lambda must be nonnegative");
  RadialStencil st(N, r);
  std::vector<double> c(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    c[i] = lambda * V(r[i]);
    if (c[i] < 0.0) throw DomainError("linear_bvp_solve: potential must be nonnegative");
  }
  return RadialProfile(r, st.solve(c, rhs.values(), boundary.first, boundary.second));
}

// ---- convolution over the annulus ------------------------------------------------

// Fixed-node rule for x -> int_{a<|y|<1} K(x-y) u(|y|)^p dy at the grid nodes,
// with u interpolated log-log between nodes. Each cell carries Gauss points
// in t = log s; the two cells touching the row's own node get a rule graded
// towards that node. The weights are nonnegative, so the map is monotone in u.
struct ConvolutionOptions {
  int levels = 8;  // geometric refinements towards the diagonal node
  QuadratureConfig quad{1e-10, 1e-300, 2000};
  int threads = 1;
};

class ConvolutionOperator {
 public:
  ConvolutionOperator(const KernelParams& kp, std::vector<double> nodes, ConvolutionOptions opt = {})
      : kp_(kp), r_(std::move(nodes)) {
    kp_.validate();
    if (r_.size() < 3) throw DomainError("convolution operator: need at least 3 nodes");
    if (opt.levels < 1) throw DomainError("convolution operator: grading levels must be >= 1");
    using GL = boost::math::quadrature::gauss<double, kGauss>;
    for (std::size_t j = 0; j < GL::abscissa().size(); ++j) {
      double x = GL::abscissa()[j], w = GL::weights()[j];
      gx_.push_back(0.5 * (1.0 - x));
      gw_.push_back(0.5 * w);
      if (x != 0.0) {
        gx_.push_back(0.5 * (1.0 + x));
        gw_.push_back(0.5 * w);
      }
    }
    std::vector<Point> graded;  // on [0,1], refined towards 0
    double hi = 1.0;
    for (int l = 0; l <= opt.levels; ++l) {
      double lo = l == opt.levels ? 0.0 : hi / 4.0;
      for (std::size_t j = 0; j < gx_.size(); ++j) graded.push_back({lo + (hi - lo) * gx_[j], (hi - lo) * gw_[j]});
      hi = lo;
    }
    const std::size_t n = r_.size() - 1, g = gx_.size();
    logr_.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) logr_[i] = std::log(r_[i]);
    base_.assign(n + 1, std::vector<double>(n * g, 0.0));
    near_.resize(n + 1);
    const double sigma = surface_area(kp_.dim);
    const QuadratureConfig qc = opt.quad;
    auto kernel = [this](double d) { return kernel_eval(kp_, d); };
    auto weight = [&](std::size_t i, std::size_t c, double th, double w) {
      double dt = logr_[c + 1] - logr_[c];
      double s = std::exp(logr_[c] + th * dt);
      return sigma * std::pow(s, kp_.dim) * angular_mean(kp_.dim, r_[i], s, kernel, qc) * dt * w;
    };
    parallel_for(n + 1, opt.threads, [&](std::size_t i) {
      for (std::size_t c = 0; c < n; ++c) {
        if (c + 1 == i || c == i) continue;
        for (std::size_t j = 0; j < g; ++j) base_[i][c * g + j] = weight(i, c, gx_[j], gw_[j]);
      }
      if (i > 0)
        for (const auto& pt : graded) {
          double th = 1.0 - pt.theta;
          near_[i][0].push_back({th, weight(i, i - 1, th, pt.weight)});
        }
      if (i < n)
        for (const auto& pt : graded) near_[i][1].push_back({pt.theta, weight(i, i, pt.theta, pt.weight)});
    });
  }

  const std::vector<double>& nodes() const { return r_; }
  const KernelParams& kernel() const { return kp_; }

  // u holds values on nodes first..n; returns the convolution of u^p over
  // the annulus [r_first, 1] at the same nodes.
  std::vector<double> apply(const std::vector<double>& u, double p, std::size_t first = 0) const {
    const std::size_t n = r_.size() - 1, g = gx_.size();
    if (first >= n || u.size() != n + 1 - first) throw DomainError("convolution operator: size mismatch");
    std::vector<double> lu(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
      if (!(u[k] > 0.0)) throw DomainError("convolution operator: values must be positive");
      lu[k] = p * std::log(u[k]);
    }
    auto at = [&](std::size_t c, double th) {
      return std::exp((1.0 - th) * lu[c - first] + th * lu[c + 1 - first]);
    };
    std::vector<double> bv(n * g, 0.0);
    for (std::size_t c = first; c < n; ++c)
      for (std::size_t j = 0; j < g; ++j) bv[c * g + j] = at(c, gx_[j]);
    std::vector<double> out(u.size(), 0.0);
    for (std::size_t i = first; i <= n; ++i) {
      const auto& w = base_[i];
      double acc = 0.0;
      for (std::size_t k = first * g; k < n * g; ++k) acc += w[k] * bv[k];
      if (i > first)
        for (const auto& pt : near_[i][0]) acc += pt.weight * at(i - 1, pt.theta);
      if (i < n)
        for (const auto& pt : near_[i][1]) acc += pt.weight * at(i, pt.theta);
      out[i - first] = acc;
    }
    return out;
  }

 private:
  static constexpr int kGauss = 6;
  struct Point {
    double theta;
    double weight;
  };
  KernelParams kp_;
  std::vector<double> r_, logr_, gx_, gw_;
  std::vector<std::vector<double>> base_;
  std::vector<std::array<std::vector<Point>, 2>> near_;
};

// ---- sub/super pairs -------------------------------------------------------------

enum class PairCase { N2_Log, CaseA, CaseB, CaseC, Cor15 };

inline const char* pair_case_name(PairCase c) {
  switch (c) {
    case PairCase::N2_Log: return "N2_Log";
    case PairCase::CaseA: return "CaseA";
    case PairCase::CaseB: return "CaseB";
    case PairCase::CaseC: return "CaseC";
    case PairCase::Cor15: return "ConstantPotential";
  }
  return "?";
}

struct PairParams {
  double m = 0.0;      // amplitude of the sub-solution profile
  double k = 0.0;      // exponent of the r^{-k} correction, 0 if unused
  double sigma = 0.0;  // log exponent of the correction, 0 if unused
  double M = 0.0;      // amplitude of the super-solution when decoupled from m
  double mu = 0.0;     // Schrodinger mass of the sub-solution
};

struct SubSuperPair {
  PairCase case_tag;
  RadialProfile sub;
  RadialProfile super;
  PairParams params;

  void validate() const {
    if (sub.size() != super.size()) throw DomainError("pair: sub and super grids differ");
    for (std::size_t i = 0; i < sub.size(); ++i)
      if (!(sub.values()[i] > 0.0 && sub.values()[i] <= super.values()[i]))
        throw DomainError("pair: need 0 < sub <= super at every node");
  }

  SubSuperPair restrict_to(std::size_t first) const {
    auto cut = [first](const RadialProfile& f) {
      std::vector<double> r(f.nodes().begin() + first, f.nodes().end());
      std::vector<double> v(f.values().begin() + first, f.values().end());
      return RadialProfile(std::move(r), std::move(v), f.sing_exp());
    };
    return {case_tag, cut(sub), cut(super), params};
  }
};

// k window max{q(N-2), (p+q)(N-2)-N+alpha} - 2 < k < N-2, clipped to k > 0
inline double correction_exponent(int N, double alpha, double p, double q) {
  double lo = std::max(q * (N - 2), (p + q) * (N - 2) - N + alpha) - 2.0;
  lo = std::max(lo, 0.0);
  double hi = N - 2.0;
  if (!(lo < hi)) throw RecipeUnavailable("empty window for the correction exponent");
  return 0.5 * (lo + hi);
}

// 0 < sigma < min{log 2, -(beta+1)}, midpoint
inline double correction_log_exponent(double beta) {
  double hi = std::min(std::log(2.0), -(beta + 1.0));
  if (!(hi > 0.0)) throw RecipeUnavailable("empty window for the log exponent (needs beta < -1)");
  return 0.5 * hi;
}

inline bool critical_sum(int N, double alpha, double p, double q) {
  return compare_critical(p + q, (2.0 * N - alpha) / (N - 2.0)) == 0;
}

// Solution of the homogeneous problem with zeroth-order coefficient mu and
// Schrodinger (or Laplace, mu = 0) boundary data.
inline std::vector<double> discrete_fundamental(int N, double mu, const std::vector<double>& r) {
  RadialStencil st(N, r);
  std::vector<double> c(r.size(), mu), zero(r.size(), 0.0);
  FundamentalSolutionKind G{mu > 0.0 ? FundamentalSolutionKind::Kind::Schrodinger
                                     : FundamentalSolutionKind::Kind::Laplace,
                            mu};
  return st.solve(c, zero, G(N, r.front()), G(N, r.back()));
}

inline double potential_bound(const PotentialSpec& V, const std::vector<double>& r) {
  double v0 = V.sup();
  for (double x : r) v0 = std::max(v0, V(x));
  if (!std::isfinite(v0)) throw RecipeUnavailable("the potential is unbounded; no Schrodinger sub-solution");
  return v0;
}

struct PairOptions {
  double sigma_n2 = 0.5;  // log exponent of the two-dimensional super-solution
  double margin = 1.1;    // super >= margin * sub when the amplitude is free
  int max_doublings = 60;
};

inline SubSuperPair build_subsuper(const ExistenceQuery& query, double lambda, double m_or_M,
                                   const std::vector<double>& r, const PairOptions& opt = {}) {
  Verdict v = classify(query);
  if (v.tag != VerdictTag::SingularProfileExists || !v.recipe)
    throw RecipeUnavailable(std::string("no construction: verdict ") + verdict_name(v.tag) +
                            (v.witness.empty() ? "" : " (" + v.witness + ")"));
  if (!(m_or_M > 0.0)) throw DomainError("pair amplitude must be positive");
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
  const int N = query.N;
  const double alpha = query.kernel.alpha, beta = query.kernel.beta, p = query.p, q = query.q;
  const std::size_t n = r.size();
  std::vector<double> sub(n), sup(n);
  PairParams prm;
  auto power = [N](double x) { return std::pow(x, 2.0 - N); };

  switch (*v.recipe) {
    case Recipe::N2Log: {
      prm.m = m_or_M;
      prm.sigma = opt.sigma_n2;
      for (std::size_t i = 0; i < n; ++i) {
        double L = log2e(r[i]);
        sub[i] = prm.m * L;
        sup[i] = prm.m * (L + std::pow(L, prm.sigma));
      }
      SubSuperPair pr{PairCase::N2_Log, RadialProfile(r, sub, {0.0, 1.0}), RadialProfile(r, sup, {0.0, 1.0}), prm};
      pr.validate();
      return pr;
    }
    case Recipe::CaseA: {
      prm.m = m_or_M;
      bool crit = critical_sum(N, alpha, p, q);
      if (crit)
        prm.sigma = correction_log_exponent(beta);
      else
        prm.k = correction_exponent(N, alpha, p, q);
      for (std::size_t i = 0; i < n; ++i) {
        double e = power(r[i]);
        sub[i] = prm.m * e;
        sup[i] = crit ? prm.m * (e + e * std::pow(log2e(r[i]), -prm.sigma)) : prm.m * (e + std::pow(r[i], -prm.k));
      }
      SubSuperPair pr{PairCase::CaseA, RadialProfile(r, sub, {N - 2.0, 0.0}),
                      RadialProfile(r, sup, {N - 2.0, 0.0}), prm};
      pr.validate();
      return pr;
    }
    case Recipe::CaseB:
    case Recipe::CaseC: {
      prm.k = correction_exponent(N, alpha, p, q);
      prm.mu = lambda * potential_bound(query.potential, r);
      sub = discrete_fundamental(N, prm.mu, r);
      prm.m = 1.0;
      prm.M = m_or_M;
      for (int d = 0;; ++d) {
        bool ok = true;
        for (std::size_t i = 0; i < n; ++i) {
          sup[i] = prm.M * (power(r[i]) + std::pow(r[i], -prm.k));
          ok = ok && sup[i] >= opt.margin * sub[i];
        }
        if (ok) break;
        if (d == opt.max_doublings) throw RecipeUnavailable("super-solution amplitude does not dominate");
        prm.M *= 2.0;
      }
      SubSuperPair pr{*v.recipe == Recipe::CaseB ? PairCase::CaseB : PairCase::CaseC,
                      RadialProfile(r, sub, {N - 2.0, 0.0}), RadialProfile(r, sup, {N - 2.0, 0.0}), prm};
      pr.validate();
      return pr;
    }
    case Recipe::ConstantPotential: {
      const double a = std::get<ConstantPotential>(query.potential.family).a;
      bool crit = critical_sum(N, alpha, p, q);
      if (crit)
        prm.sigma = correction_log_exponent(beta);
      else
        prm.k = correction_exponent(N, alpha, p, q);
      prm.mu = lambda * a;
      prm.M = m_or_M;
      prm.m = m_or_M;
      auto G = discrete_fundamental(N, prm.mu, r);
      for (std::size_t i = 0; i < n; ++i) {
        sub[i] = prm.M * G[i];
        double extra = crit ? power(r[i]) * std::pow(log2e(r[i]), -prm.sigma) : std::pow(r[i], -prm.k);
        sup[i] = prm.M * (G[i] + extra);
      }
      SubSuperPair pr{PairCase::Cor15, RadialProfile(r, sub, {N - 2.0, 0.0}), RadialProfile(r, sup, {N - 2.0, 0.0}),
                      prm};
      pr.validate();
      return pr;
    }
  }
  throw RecipeUnavailable("unknown recipe");
}

// ---- discrete inequalities ---------------------------------------------------------

struct PairCheck {
  bool sub_ok = true;
  bool super_ok = true;
  double sub_margin = std::numeric_limits<double>::infinity();    // min (F(sub) - L sub) / scale
  double super_margin = std::numeric_limits<double>::infinity();  // min (L super - F(super)) / scale
};

// Checks L sub <= F(sub) and L super >= F(super) at interior nodes of the
// annulus starting at node `first`, and super >= sub everywhere on it.
inline PairCheck check_pair(const RadialStencil& st, const ConvolutionOperator& op, const std::vector<double>& c,
                            double p, double q, const SubSuperPair& full, std::size_t first) {
  const auto& sv = full.sub.values();
  const auto& Sv = full.super.values();
  const std::size_t n = sv.size() - 1;
  std::vector<double> s(sv.begin() + first, sv.end()), S(Sv.begin() + first, Sv.end());
  auto Fs = op.apply(s, p, first), FS = op.apply(S, p, first);
  PairCheck out;
  for (std::size_t i = first + 1; i < n; ++i) {
    std::size_t k = i - first;
    double ls = st.apply(s, c, i, first), fs = Fs[k] * std::pow(s[k], q);
    double lS = st.apply(S, c, i, first), fS = FS[k] * std::pow(S[k], q);
    double as = (fs - ls) / (std::fabs(fs) + std::fabs(ls) + 1e-300);
    double aS = (lS - fS) / (std::fabs(fS) + std::fabs(lS) + 1e-300);
    out.sub_margin = std::min(out.sub_margin, as);
    out.super_margin = std::min(out.super_margin, aS);
  }
  out.sub_ok = out.sub_margin >= -1e-12;
  out.super_ok = out.super_margin >= -1e-12;
  for (std::size_t k = 0; k < s.size(); ++k)
    if (S[k] < s[k]) out.super_ok = false;
  return out;
}

// ---- solver setup -----------------------------------------------------------------

struct SolverConfig {
  int nodes_per_octave = 16;
  int total_nodes = 0;  // > 0 fixes the node count of the smallest annulus instead
  double m = 0.1;       // starting amplitude of the pair
  double tol = 1e-8;
  int max_iter = 200;
  double tol_mono = 1e-10;  // relative to the largest super-solution value
  double lambda_start = 1.0;
  double lambda_floor = 1e-12;
  double lambda_ceiling = 1e8;
  int max_amplitude_steps = 30;
  PairOptions pair{};
  ConvolutionOptions conv{};

  void validate() const {
    if (total_nodes == 0 && nodes_per_octave < 1) throw DomainError("solver: nodes_per_octave must be >= 1");
    if (total_nodes != 0 && total_nodes < 3) throw DomainError("solver: total_nodes must be >= 3");
    if (!(m > 0.0)) throw DomainError("solver: m must be positive");
    if (!(tol > 0.0) || max_iter < 1) throw DomainError("solver: bad iteration tolerance or budget");
    if (!(tol_mono >= 0.0)) throw DomainError("solver: tol_mono must be nonnegative");
    if (!(lambda_floor > 0.0 && lambda_floor <= lambda_start && lambda_start <= lambda_ceiling))
      throw DomainError("solver: lambda range must satisfy 0 < floor <= start <= ceiling");
  }
};

struct SolverSetup {
  ExistenceQuery query;
  std::vector<int> schedule;  // inner radii 1/k, k increasing
  double lambda = 0.0;
  int lambda_trials = 0;
  std::vector<double> grid;  // smallest annulus
  std::shared_ptr<const RadialStencil> stencil;
  std::shared_ptr<const ConvolutionOperator> op;
  std::vector<double> coeff;  // lambda V at nodes
  SubSuperPair pair;          // on the full grid
  std::vector<PairCheck> checks;

  std::size_t first_index(int k) const {
    long i = lattice_index(grid, 1.0 / k);
    if (i < 0) throw DomainError("inner radius 1/" + std::to_string(k) + " is not a grid node");
    return static_cast<std::size_t>(i);
  }
};

inline std::vector<double> solver_grid(const std::vector<int>& schedule, const SolverConfig& cfg) {
  const int kmax = schedule.back();
  int intervals = cfg.total_nodes > 0
                      ? cfg.total_nodes - 1
                      : static_cast<int>(std::lround(std::log2(static_cast<double>(kmax)) * cfg.nodes_per_octave));
  auto g = geometric_grid(1.0 / kmax, std::max(intervals, 2));
  for (int k : schedule)
    if (lattice_index(g, 1.0 / k) < 0)
      throw DomainError("inner radius 1/" + std::to_string(k) + " does not fall on the grid of 1/" +
                        std::to_string(kmax));
  return g;
}

// Builds the grid and operators, then fixes lambda and the pair amplitude so
// that the discrete sub and super inequalities hold on every annulus of the
// schedule. With a given lambda only the super-solution side is enforced; a
// failing sub-solution shows up later as a monotonicity violation.
inline SolverSetup prepare_solver(const ExistenceQuery& query, std::vector<int> schedule, const SolverConfig& cfg) {
  cfg.validate();
  query.validate();
  if (schedule.empty()) throw DomainError("solver: empty inner-radius schedule");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i] < 3) throw DomainError("solver: inner index k must be >= 3");
    if (i > 0 && schedule[i] <= schedule[i - 1]) throw DomainError("solver: schedule must shrink the inner radius");
  }
  Verdict v = classify(query);
  if (v.tag != VerdictTag::SingularProfileExists || !v.recipe)
    throw RecipeUnavailable(std::string("no construction: verdict ") + verdict_name(v.tag) +
                            (v.witness.empty() ? "" : " (" + v.witness + ")"));
  SolverSetup s;
  s.query = query;
  s.schedule = schedule;
  s.grid = solver_grid(schedule, cfg);
  s.stencil = std::make_shared<RadialStencil>(query.N, s.grid);
  s.op = std::make_shared<ConvolutionOperator>(query.kernel, s.grid, cfg.conv);
  std::vector<double> Vn(s.grid.size());
  for (std::size_t i = 0; i < Vn.size(); ++i) Vn[i] = query.potential(s.grid[i]);

  const Recipe recipe = *v.recipe;
  const int pq = compare_critical(query.p + query.q, 1.0);
  const bool given = query.lambda_mode == LambdaMode::GivenLambda;
  // amplitude direction that helps the super-solution inequality
  double amp_step = 1.0;
  if (recipe == Recipe::N2Log || recipe == Recipe::CaseA || (recipe == Recipe::ConstantPotential && pq > 0))
    amp_step = 0.5;
  else if (recipe == Recipe::CaseB || (recipe == Recipe::ConstantPotential && pq < 0))
    amp_step = 2.0;

  std::vector<double> lambdas;
  if (given || recipe == Recipe::ConstantPotential) {
    if (!given) throw RecipeUnavailable("constant-potential recipe needs a given lambda");
    lambdas.push_back(query.lambda_value);
  } else if (recipe == Recipe::CaseC) {
    for (double l = cfg.lambda_start; l <= cfg.lambda_ceiling; l *= 4.0) lambdas.push_back(l);
  } else {
    for (double l = cfg.lambda_start; l >= cfg.lambda_floor; l /= 4.0) lambdas.push_back(l);
  }

  for (double lambda : lambdas) {
    ++s.lambda_trials;
    std::vector<double> c(Vn.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = lambda * Vn[i];
    double amp = cfg.m;
    for (int step = 0; step <= cfg.max_amplitude_steps; ++step) {
      SubSuperPair pr = build_subsuper(query, lambda, amp, s.grid, cfg.pair);
      std::vector<PairCheck> checks;
      bool sub_ok = true, super_ok = true;
      for (int k : schedule) {
        checks.push_back(check_pair(*s.stencil, *s.op, c, query.p, query.q, pr, s.first_index(k)));
        sub_ok = sub_ok && checks.back().sub_ok;
        super_ok = super_ok && checks.back().super_ok;
      }
      if ((sub_ok || given) && super_ok) {
        s.lambda = lambda;
        s.coeff = c;
        s.pair = std::move(pr);
        s.checks = std::move(checks);
        return s;
      }
      if (!sub_ok && !given) break;  // a smaller (or larger) lambda is needed
      if (amp_step == 1.0) break;
      amp = (amp_step == 2.0 ? pr.params.M : amp) * amp_step;
    }
  }
  throw RecipeUnavailable("no lambda in the search range satisfies the discrete sub/super inequalities");
}

// ---- monotone iteration ----------------------------------------------------------

struct AnnulusProblem {
  int N = 3;
  double lambda = 0.0;
  PotentialSpec potential = PotentialSpec::constant(0.0);
  KernelParams kernel{3, 0.0, 0.0};
  double p = 1.0, q = 1.0;
  int inner_index = 3;                             // inner radius 1/k
  std::vector<double> grid;                        // nodes on [1/k, 1]
  std::shared_ptr<const ConvolutionOperator> op;  // on a grid whose suffix is `grid`; built when null
  double nonlinear_weight = 1.0;                   // scales the right-hand side; 0 gives the linear problem

  static AnnulusProblem from_setup(const SolverSetup& s, int k) {
    std::size_t first = s.first_index(k);
    AnnulusProblem a;
    a.N = s.query.N;
    a.lambda = s.lambda;
    a.potential = s.query.potential;
    a.kernel = s.query.kernel;
    a.p = s.query.p;
    a.q = s.query.q;
    a.inner_index = k;
    a.grid.assign(s.grid.begin() + first, s.grid.end());
    a.op = s.op;
    return a;
  }
};

struct IterationRecord {
  int iter;
  double residual;
  double min_gap_sub;
  double min_gap_super;
};

struct IterationState {
  int iterate_index = 0;
  RadialProfile current;
  std::vector<double> residual_history;
  std::vector<IterationRecord> log;
  bool monotone_ok = true;
  bool sandwich_ok = true;
  bool converged = false;
};

struct IterationConfig {
  double tol = 1e-8;
  int max_iter = 200;
  double tol_mono = 1e-10;
};

inline IterationState monotone_iterate(const AnnulusProblem& pb, const SubSuperPair& pair,
                                       const IterationConfig& cfg = {}) {
  const auto& r = pb.grid;
  if (r.size() < 3) throw DomainError("monotone_iterate: grid too small");
  if (std::fabs(r.front() * pb.inner_index - 1.0) > 1e-9 || std::fabs(r.back() - 1.0) > 1e-12)
    throw DomainError("monotone_iterate: grid must span [1/k, 1]");
  if (pair.sub.nodes() != r) throw DomainError("monotone_iterate: pair lives on a different grid");
  pair.validate();
  std::shared_ptr<const ConvolutionOperator> op = pb.op;
  if (!op) op = std::make_shared<ConvolutionOperator>(pb.kernel, r);
  const auto& full = op->nodes();
  if (full.size() < r.size() || !std::equal(r.begin(), r.end(), full.end() - r.size()))
    throw DomainError("monotone_iterate: operator grid does not contain the annulus grid");
  const std::size_t first = full.size() - r.size();
  RadialStencil st(pb.N, full);
  std::vector<double> c(full.size(), 0.0);
  for (std::size_t i = first; i < full.size(); ++i) c[i] = pb.lambda * pb.potential(full[i]);

  const auto& lo = pair.sub.values();
  const auto& hi = pair.super.values();
  const double scale = *std::max_element(hi.begin(), hi.end());
  const double tm = cfg.tol_mono * scale;
  const int nodes = static_cast<int>(r.size());

  IterationState state;
  std::vector<double> u = lo;
  std::vector<double> rhs(full.size(), 0.0);
  for (int it = 1; it <= cfg.max_iter; ++it) {
    auto conv = op->apply(u, pb.p, first);
    for (std::size_t k = 0; k < u.size(); ++k) rhs[first + k] = pb.nonlinear_weight * conv[k] * std::pow(u[k], pb.q);
    auto next = st.solve(c, rhs, lo.front(), lo.back(), first);
    double diff = 0.0, size = 0.0, gap_sub = std::numeric_limits<double>::infinity(), gap_sup = gap_sub;
    bool mono = true, sand = true;
    for (std::size_t k = 0; k < u.size(); ++k) {
      diff = std::max(diff, std::fabs(next[k] - u[k]));
      size = std::max(size, std::fabs(next[k]));
      gap_sub = std::min(gap_sub, next[k] - lo[k]);
      gap_sup = std::min(gap_sup, hi[k] - next[k]);
      if (next[k] < u[k] - tm) mono = false;
      if (next[k] < lo[k] - tm || next[k] > hi[k] + tm) sand = false;
    }
    double res = size > 0.0 ? diff / size : diff;
    state.iterate_index = it;
    state.residual_history.push_back(res);
    state.log.push_back({it, res, gap_sub, gap_sup});
    if (!mono || !sand) {
      state.monotone_ok = mono;
      state.sandwich_ok = sand;
      state.current = RadialProfile(r, next, pair.sub.sing_exp());
      throw MonotonicityViolation(std::string(mono ? "sandwich" : "monotonicity") + " violated at iteration " +
                                      std::to_string(it) + " on a grid of " + std::to_string(nodes) + " nodes",
                                  it, nodes);
    }
    u = std::move(next);
    if (res < cfg.tol) {
      state.converged = true;
      state.current = RadialProfile(r, u, pair.sub.sing_exp());
      return state;
    }
  }
  throw NonConvergence("monotone iteration did not reach tolerance within " + std::to_string(cfg.max_iter) +
                       " iterations");
}

// ---- continuation in the inner radius -------------------------------------------

struct ContinuationStep {
  int k;
  double inner;
  IterationState state;
  double change;  // relative sup change against the previous step on [max(1/8, previous inner), 1]; NaN first
};

inline std::vector<ContinuationStep> continuation_shrink(const SolverSetup& s, const std::vector<int>& schedule,
                                                         const IterationConfig& cfg = {}) {
  std::vector<ContinuationStep> out;
  for (std::size_t j = 0; j < schedule.size(); ++j) {
    int k = schedule[j];
    if (j > 0 && k <= schedule[j - 1]) throw DomainError("continuation: schedule must shrink the inner radius");
    AnnulusProblem pb = AnnulusProblem::from_setup(s, k);
    auto pair = s.pair.restrict_to(s.first_index(k));
    ContinuationStep step{k, 1.0 / k, monotone_iterate(pb, pair, cfg), std::numeric_limits<double>::quiet_NaN()};
    if (!out.empty()) {
      const auto& prev = out.back().state.current;
      const auto& cur = step.state.current;
      const double cut = std::max(0.125, out.back().inner);
      std::size_t off = cur.size() - prev.size();
      double diff = 0.0, size = 0.0;
      for (std::size_t i = 0; i < prev.size(); ++i) {
        if (prev.nodes()[i] < cut * (1.0 - 1e-12)) continue;
        diff = std::max(diff, std::fabs(cur.values()[i + off] - prev.values()[i]));
        size = std::max(size, std::fabs(cur.values()[i + off]));
      }
      step.change = diff / size;
    }
    out.push_back(std::move(step));
  }
  return out;
}

// ---- singular mass -------------------------------------------------------------

struct SingularMass {
  double m_est = 0.0;
  double window_lo = 0.0, window_hi = 0.0;
  double fit_spread = 1.0;
};

namespace detail {

template <class Ref>
SingularMass fit_ratio(const RadialProfile& u, Ref&& ref) {
  const double lo = u.nodes().front(), hi = 10.0 * lo;
  std::vector<double> ratios;
  for (std::size_t i = 0; i < u.size() && u.nodes()[i] <= hi * (1.0 + 1e-12); ++i)
    ratios.push_back(u.values()[i] / ref(u.nodes()[i]));
  if (ratios.size() < 5)
    throw WindowTooSmall("innermost decade holds " + std::to_string(ratios.size()) + " nodes, need 5");
  SingularMass s;
  double sum = 0.0, mn = ratios[0], mx = ratios[0];
  for (double x : ratios) {
    sum += x;
    mn = std::min(mn, x);
    mx = std::max(mx, x);
  }
  if (!(mn > 0.0)) throw DomainError("singular mass: profile must be positive near the inner boundary");
  s.m_est = sum / ratios.size();
  s.window_lo = lo;
  s.window_hi = std::min(hi, u.nodes().back());
  s.fit_spread = mx / mn;
  return s;
}

}  // namespace detail

// constant least-squares fit of u/E over the innermost decade
inline SingularMass extract_singular_mass(const RadialProfile& u, int N) {
  return detail::fit_ratio(u, [N](double r) { return fundamental_laplace(N, r); });
}

// same fit against r^{2-N}, or log(2e/r) in the plane
inline SingularMass profile_coefficient(const RadialProfile& u, int N) {
  if (N == 2) return detail::fit_ratio(u, [](double r) { return log2e(r); });
  return detail::fit_ratio(u, [N](double r) { return std::pow(r, 2.0 - N); });
}

// ---- exports ------------------------------------------------------------------

inline void write_solution_csv(const std::string& path, const RadialProfile& u, int N) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "r,u,ratio_to_E\n";
  for (std::size_t i = 0; i < u.size(); ++i) {
    double r = u.nodes()[i], v = u.values()[i];
    out << fmt_double(r) << ',' << fmt_double(v) << ',' << fmt_double(v / fundamental_laplace(N, r)) << '\n';
  }
}

inline void write_iteration_log(const std::string& path, const IterationState& s) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "iter,residual,min_gap_sub,min_gap_super\n";
  for (const auto& rec : s.log)
    out << rec.iter << ',' << fmt_double(rec.residual) << ',' << fmt_double(rec.min_gap_sub) << ','
        << fmt_double(rec.min_gap_super) << '\n';
}

}  // namespace singlab
