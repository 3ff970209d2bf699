#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "errors.hpp"

namespace singlab {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kE = std::numbers::e;
inline constexpr double kTwoE = 2.0 * std::numbers::e;

struct KernelParams {
  int dim = 3;
  double alpha = 0.0;
  double beta = 0.0;

  void validate() const {
    if (dim < 2) throw DomainError("kernel: dimension must be >= 2");
    if (!(alpha >= 0.0 && alpha < dim))
      throw DomainError("kernel: alpha must satisfy 0 <= alpha < N");
    if (!std::isfinite(beta)) throw DomainError("kernel: beta must be finite");
  }
};

// log(2e/d), the weight that appears in every envelope
inline double log2e(double d) { return std::log(kTwoE / d); }

inline double kernel_eval(const KernelParams& k, double d) {
  if (!(d > 0.0 && d <= 2.0)) throw DomainError("kernel: distance must lie in (0, 2]");
  double v = k.alpha == 0.0 ? 1.0 : std::pow(d, -k.alpha);
  if (k.beta != 0.0) v *= std::pow(log2e(d), k.beta);
  return v;
}

// Area of the unit sphere S^{N-1}.
inline double surface_area(int N) {
  if (N < 2) throw DomainError("surface_area: N must be >= 2");
  return 2.0 * std::pow(kPi, 0.5 * N) / std::tgamma(0.5 * N);
}

inline double fundamental_laplace(int N, double r) {
  if (N < 2) throw DomainError("fundamental_laplace: N must be >= 2");
  if (!(r > 0.0)) throw DomainError("fundamental_laplace: r must be positive");
  if (N == 2) return std::log(kE / r) / (2.0 * kPi);
  return std::pow(r, 2.0 - N) / ((N - 2) * surface_area(N));
}

namespace detail {

// K_{n+1/2}(z) = sqrt(pi/(2z)) e^{-z} sum_k (n+k)!/(k!(n-k)!) (2z)^{-k}
inline double bessel_k_half_integer(int n, double z) {
  double term = 1.0, sum = 1.0;
  for (int k = 0; k < n; ++k) {
    term *= double(n + k + 1) * double(n - k) / (double(k + 1) * 2.0 * z);
    sum += term;
  }
  return std::sqrt(kPi / (2.0 * z)) * std::exp(-z) * sum;
}

}  // namespace detail

// Modified Bessel function of the second kind. Throws std::overflow_error
// when z is below the radius where K_nu(z) exceeds the double range.
inline double bessel_k(double nu, double z) {
  if (!(z > 0.0)) throw DomainError("bessel_k: z must be positive");
  if (!(nu >= 0.0)) throw DomainError("bessel_k: order must be nonnegative");
  double twice = 2.0 * nu;
  double v;
  if (twice == std::floor(twice) && std::fmod(twice, 2.0) == 1.0)
    v = detail::bessel_k_half_integer(static_cast<int>(nu - 0.5), z);
  else
    v = std::cyl_bessel_k(nu, z);
  if (!std::isfinite(v)) throw std::overflow_error("bessel_k: argument below underflow radius");
  return v;
}

// Fundamental solution of -Delta + mu in R^N, N >= 3.
inline double fundamental_schrodinger(int N, double mu, double r) {
  if (N < 3) throw DomainError("fundamental_schrodinger: N must be >= 3");
  if (!(mu > 0.0)) throw DomainError("fundamental_schrodinger: mu must be positive");
  if (!(r > 0.0)) throw DomainError("fundamental_schrodinger: r must be positive");
  double nu = 0.5 * (N - 2);
  double z = std::sqrt(mu) * r;
  double kz;
  if (N % 2 == 1) {
    // z^nu K_nu(z) with the z^{-1/2} folded in, keeps small z exact
    int n = (N - 3) / 2;
    double term = 1.0, sum = 1.0;
    for (int k = 0; k < n; ++k) {
      term *= double(n + k + 1) * double(n - k) / (double(k + 1) * 2.0 * z);
      sum += term;
    }
    kz = std::sqrt(kPi / 2.0) * std::pow(z, nu - 0.5) * std::exp(-z) * sum;
  } else {
    kz = bessel_k(nu, z) * std::pow(z, nu);
  }
  return std::pow(r, 2.0 - N) / std::pow(2.0 * kPi, 0.5 * N) * kz;
}

struct FundamentalSolutionKind {
  enum class Kind { Laplace, Schrodinger };
  Kind kind = Kind::Laplace;
  double mu = 0.0;

  static FundamentalSolutionKind laplace() { return {}; }
  static FundamentalSolutionKind schrodinger(double mu) {
    if (!(mu > 0.0)) throw DomainError("Schrodinger kind needs mu > 0");
    return {Kind::Schrodinger, mu};
  }

  double operator()(int N, double r) const {
    return kind == Kind::Laplace ? fundamental_laplace(N, r) : fundamental_schrodinger(N, mu, r);
  }
};

}  // namespace singlab
