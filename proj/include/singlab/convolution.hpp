#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "errors.hpp"
#include "quadrature.hpp"
#include "radial_profile.hpp"
#include "special_functions.hpp"

namespace singlab {

// Normalizer of the polar-angle weight: int_0^pi sin^{N-2}(theta) dtheta.
inline double polar_weight_norm(int N) {
  if (N == 2) return kPi;
  return std::sqrt(kPi) * std::tgamma(0.5 * (N - 1)) / std::tgamma(0.5 * N);
}

// Mean of k(|r e - s w|) over unit directions w.
template <class K>
double angular_mean(int N, double r, double s, K&& k, const QuadratureConfig& cfg = {}) {
  if (N < 2) throw DomainError("angular_mean: N must be >= 2");
  if (!(r > 0.0 && s > 0.0)) throw DomainError("angular_mean: radii must be positive");
  const double two_root_rs = 2.0 * std::sqrt(r * s);
  auto g = [&](double th) {
    // hypot: sin^2 underflows near theta = 0 when r = s
    double d = std::hypot(r - s, two_root_rs * std::sin(0.5 * th));
    double w = 1.0;
    if (N > 2) {
      double st = std::sin(th);
      for (int i = 0; i < N - 2; ++i) w *= st;
    }
    return k(d) * w;
  };
  // the integrand peaks in a layer of width |r-s|/sqrt(rs) around theta = 0
  std::vector<double> seeds;
  SingularEnds ends = SingularEnds::None;
  if (r == s) {
    ends = SingularEnds::Lower;
  } else {
    double thc = std::fabs(r - s) / std::sqrt(r * s);
    for (double t = thc; t < kPi; t *= 4.0) seeds.push_back(t);
  }
  auto res = integrate_adaptive(g, 0.0, kPi, ends, cfg, seeds);
  return res.value / polar_weight_norm(N);
}

namespace detail {

inline QuadratureConfig inner_config(const QuadratureConfig& cfg) {
  QuadratureConfig c = cfg;
  c.rel_tol = std::max(cfg.rel_tol * 0.1, 1e-13);
  c.abs_tol = cfg.abs_tol * 0.1;
  return c;
}

inline void check_integrable(int N, SingExp sing) {
  if (sing.a > N || (sing.a == N && sing.b >= -1.0))
    throw DivergentIntegrand("density singularity r^{-" + std::to_string(sing.a) + "} log^" +
                             std::to_string(sing.b) + " is not integrable at the origin in dimension " +
                             std::to_string(N));
}

}  // namespace detail

// int_{rho<|y|<1} K(x-y) f(|y|) dy at |x| = r, as an outer integral in
// t = log s of sigma_N s^N f(s) times the angular mean of the kernel.
// `sing` describes f near 0 and is used for the divergence guard and for
// the far tail; `breaks` lists radii where f has kinks.
template <class F>
double convolve_radial(const KernelParams& kp, F&& f, SingExp sing, double r, double rho,
                       const QuadratureConfig& cfg = {}, const std::vector<double>& breaks = {}) {
  kp.validate();
  cfg.validate();
  const int N = kp.dim;
  if (!(r > 0.0 && r <= 1.0)) throw DomainError("convolve_radial: r must lie in (0, 1]");
  if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("convolve_radial: cutoff must lie in [0, 1)");
  if (rho == 0.0) detail::check_integrable(N, sing);

  const QuadratureConfig icfg = detail::inner_config(cfg);
  const double sigma = surface_area(N);
  const double tr = std::log(r);
  auto kernel = [&](double d) { return kernel_eval(kp, d); };

  // below t_far the density is replaced by its leading singular form,
  // evaluated in log space so s^N f(s) never overflows
  const double t_far = -600.0 / N;
  const double f_far = rho == 0.0 ? f(std::exp(t_far)) : 0.0;
  const double mean_far = rho == 0.0 ? angular_mean(N, r, std::exp(t_far), kernel, icfg) : 0.0;
  auto h = [&](double t) {
    if (t > t_far) {
      double s = std::exp(t);
      if (s == r) return 0.0;
      return sigma * std::exp(N * t) * f(s) * angular_mean(N, r, s, kernel, icfg);
    }
    // s is negligible against r here, the angular mean is frozen
    const double mean = mean_far;
    double lr = sing.b == 0.0 ? 1.0 : std::pow((1.0 - t + std::log(2.0)) / (1.0 - t_far + std::log(2.0)), sing.b);
    return sigma * f_far * std::exp(N * t - sing.a * (t - t_far)) * lr * mean;
  };

  const double t_lo = rho == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(rho);
  std::vector<double> cuts;
  auto add = [&](double t) {
    if (t > t_lo && t < 0.0) cuts.push_back(t);
  };
  add(tr);
  add(tr + std::log(0.99));
  add(tr + std::log(1.01));
  for (double b : breaks)
    if (b > 0.0) add(std::log(b));
  add(tr + std::log(0.5));
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  cuts.insert(cuts.begin(), t_lo);
  cuts.push_back(0.0);

  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double a = cuts[i], b = cuts[i + 1];
    unsigned e = 0;
    if (a == tr) e |= static_cast<unsigned>(SingularEnds::Lower);
    if (b == tr) e |= static_cast<unsigned>(SingularEnds::Upper);
    total += integrate_adaptive(h, a, b, static_cast<SingularEnds>(e), cfg).value;
  }
  return total;
}

inline double convolve_radial(const KernelParams& kp, const RadialProfile& f, double r, double rho,
                              const QuadratureConfig& cfg = {}) {
  return convolve_radial(
      kp, [&](double s) { return f(s); }, f.sing_exp(), r, rho, cfg, f.nodes());
}

}  // namespace singlab
