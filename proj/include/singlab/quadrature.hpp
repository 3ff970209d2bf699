#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include "errors.hpp"

namespace singlab {

struct QuadratureConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-12;
  int max_subdivisions = 2000;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
      throw DomainError("quadrature: tolerances must be positive");
    if (max_subdivisions < 10) throw DomainError("quadrature: max_subdivisions must be >= 10");
  }
};

struct QuadResult {
  double value = 0.0;
  double err_est = 0.0;
  int subdivisions = 0;
};

enum class SingularEnds : unsigned { None = 0, Lower = 1, Upper = 2, Both = 3 };

inline bool has_end(SingularEnds e, SingularEnds bit) {
  return (static_cast<unsigned>(e) & static_cast<unsigned>(bit)) != 0;
}

namespace detail {

// 15-point Kronrod nodes on [0,1] of the symmetric rule, with 7-point Gauss weights.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, err;
  bool operator<(const Segment& o) const { return err < o.err; }
};

template <class F>
double checked(F& f, double x) {
  double y = f(x);
  if (!std::isfinite(y)) throw NonFinite("integrand returned a non-finite value at x = " + std::to_string(x));
  return y;
}

// One G7K15 panel with the QUADPACK error heuristic.
template <class F>
Segment gk15(F& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double fc = checked(f, c);
  double resk = fc * kWgk[7], resg = fc * kWg[3], resabs = std::fabs(resk);
  std::array<double, 7> f1{}, f2{};
  for (int j = 0; j < 7; ++j) {
    double dx = h * kXgk[j];
    f1[j] = checked(f, c - dx);
    f2[j] = checked(f, c + dx);
    resk += kWgk[j] * (f1[j] + f2[j]);
    resabs += kWgk[j] * (std::fabs(f1[j]) + std::fabs(f2[j]));
    if (j % 2 == 1) resg += kWg[j / 2] * (f1[j] + f2[j]);
  }
  double mean = 0.5 * resk;
  double resasc = kWgk[7] * std::fabs(fc - mean);
  for (int j = 0; j < 7; ++j) resasc += kWgk[j] * (std::fabs(f1[j] - mean) + std::fabs(f2[j] - mean));
  resk *= h;
  resabs *= std::fabs(h);
  resasc *= std::fabs(h);
  double err = std::fabs((resk - resg * h));
  if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) err = std::max(50.0 * eps * resabs, err);
  return {a, b, resk, err};
}

// Global adaptive bisection over a set of starting panels.
template <class F>
QuadResult adapt(F& f, const std::vector<double>& cuts, const QuadratureConfig& cfg) {
  std::priority_queue<Segment> heap;
  double total = 0.0, err = 0.0, frozen_err = 0.0, frozen_val = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (!(cuts[i + 1] > cuts[i])) continue;
    Segment s = gk15(f, cuts[i], cuts[i + 1]);
    total += s.value;
    err += s.err;
    heap.push(s);
  }
  int subdivisions = 0;
  auto target = [&] { return std::max(cfg.abs_tol, cfg.rel_tol * std::fabs(total)); };
  while (err > target() && !heap.empty()) {
    if (subdivisions >= cfg.max_subdivisions) {
      throw NonConvergence("quadrature: subdivision budget exhausted (value " + std::to_string(total) +
                           ", error estimate " + std::to_string(err) + ")");
    }
    Segment s = heap.top();
    heap.pop();
    double mid = 0.5 * (s.a + s.b);
    if (!(mid > s.a && mid < s.b) || (s.b - s.a) < 64.0 * std::numeric_limits<double>::epsilon() *
                                                          std::max(std::fabs(s.a), std::fabs(s.b))) {
      // panel at roundoff width: keep it but stop refining
      frozen_err += s.err;
      frozen_val += s.value;
      if (frozen_err > target()) throw NonConvergence("quadrature: roundoff limits refinement");
      continue;
    }
    Segment l = gk15(f, s.a, mid), r = gk15(f, mid, s.b);
    total += l.value + r.value - s.value;
    err += l.err + r.err - s.err;
    heap.push(l);
    heap.push(r);
    ++subdivisions;
  }
  (void)frozen_val;
  return {total, err, subdivisions};
}

}  // namespace detail

// Adaptive Gauss-Kronrod integration of f over (lo, hi). Infinite bounds are
// mapped to (0,1). A flagged singular end is moved to infinity by
// x = end +- w exp(-v), which turns algebraic and logarithmic endpoint
// singularities into exponentially decaying tails. Extra breakpoints seed
// the initial panels.
template <class F>
QuadResult integrate_adaptive(F&& f, double lo, double hi, SingularEnds ends = SingularEnds::None,
                              const QuadratureConfig& cfg = {}, std::vector<double> breakpoints = {}) {
  cfg.validate();
  if (!(lo < hi)) throw DomainError("integrate_adaptive: need lo < hi");
  const bool lo_inf = std::isinf(lo), hi_inf = std::isinf(hi);

  if (lo_inf && hi_inf) {
    auto a = integrate_adaptive(f, lo, 0.0, SingularEnds::None, cfg);
    auto b = integrate_adaptive(f, 0.0, hi, SingularEnds::None, cfg);
    return {a.value + b.value, a.err_est + b.err_est, a.subdivisions + b.subdivisions};
  }
  if (lo_inf || hi_inf) {
    // x = anchor -+ u/(1-u), u in [0,1)
    const double anchor = lo_inf ? hi : lo;
    const double sign = lo_inf ? -1.0 : 1.0;
    auto g = [&](double u) {
      double v = u / (1.0 - u);
      double x = anchor + sign * v;
      if (!std::isfinite(x)) return 0.0;
      double j = 1.0 / ((1.0 - u) * (1.0 - u));
      return f(x) * j;
    };
    std::vector<double> cuts{0.0};
    for (double bp : breakpoints) {
      double v = sign * (bp - anchor);
      if (v > 0.0 && std::isfinite(v)) cuts.push_back(v / (1.0 + v));
    }
    cuts.push_back(1.0);
    std::sort(cuts.begin(), cuts.end());
    return detail::adapt(g, cuts, cfg);
  }

  if (ends == SingularEnds::Both) {
    double mid = 0.5 * (lo + hi);
    std::vector<double> left, right;
    for (double bp : breakpoints) (bp < mid ? left : right).push_back(bp);
    auto a = integrate_adaptive(f, lo, mid, SingularEnds::Lower, cfg, left);
    auto b = integrate_adaptive(f, mid, hi, SingularEnds::Upper, cfg, right);
    return {a.value + b.value, a.err_est + b.err_est, a.subdivisions + b.subdivisions};
  }
  if (ends == SingularEnds::Lower || ends == SingularEnds::Upper) {
    const bool lower = ends == SingularEnds::Lower;
    const double end = lower ? lo : hi;
    const double w = hi - lo;
    // x = end + dir * w * exp(-v), v = t/(1-t)
    const double dir = lower ? 1.0 : -1.0;
    auto g = [&](double t) {
      double v = t / (1.0 - t);
      double step = w * std::exp(-v);
      double x = end + dir * step;
      if (step == 0.0 || x == end) return 0.0;
      return f(x) * step / ((1.0 - t) * (1.0 - t));
    };
    std::vector<double> cuts{0.0};
    for (double bp : breakpoints) {
      double step = dir * (bp - end);
      if (step > 0.0 && step < w) {
        double v = std::log(w / step);
        cuts.push_back(v / (1.0 + v));
      }
    }
    cuts.push_back(1.0);
    std::sort(cuts.begin(), cuts.end());
    return detail::adapt(g, cuts, cfg);
  }

  std::vector<double> cuts{lo};
  for (double bp : breakpoints)
    if (bp > lo && bp < hi) cuts.push_back(bp);
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return detail::adapt(f, cuts, cfg);
}

}  // namespace singlab
