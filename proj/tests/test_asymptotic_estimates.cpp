#include <cmath>

#include <gtest/gtest.h>

#include <singlab/asymptotic_estimates.hpp>

using namespace singlab;

TEST(Regime, Examples) {
  EXPECT_EQ(classify_regime(3, 2.0, 0.0, 2.0), Regime::Supercritical);
  EXPECT_EQ(classify_regime(3, 1.0, -1.0, 2.0), Regime::CriticalLog);
  EXPECT_EQ(classify_regime(3, 0.0, 5.0, 0.0), Regime::Subcritical);
  EXPECT_EQ(classify_regime(3, 1.0, 0.5, 2.0), Regime::CriticalAbove);
  EXPECT_EQ(classify_regime(3, 1.0, -1.5, 2.0), Regime::CriticalBelow);
}

TEST(Regime, TotalPartitionOnAGrid) {
  for (int N = 2; N <= 5; ++N)
    for (double a = 0.0; a < N; a += 0.25)
      for (double g = 0.0; g < N; g += 0.25)
        for (double b : {-3.0, -1.0, -0.5, 0.0, 2.0}) {
          Regime r = classify_regime(N, a, b, g);
          bool crit = std::fabs(a + g - N) < 1e-12;
          if (a + g > N && !crit) {
            EXPECT_EQ(r, Regime::Supercritical);
          }
          if (a + g < N && !crit) {
            EXPECT_EQ(r, Regime::Subcritical);
          }
          if (crit) {
            Regime want = b > -1 ? Regime::CriticalAbove : (b == -1 ? Regime::CriticalLog : Regime::CriticalBelow);
            EXPECT_EQ(r, want);
          }
        }
}

TEST(Regime, DivergentCaseIsRefused) {
  EXPECT_THROW(classify_regime(3, 1.0, 0.0, 3.0), DomainError);
  EXPECT_THROW(envelope_I(3, 1.0, 0.0, 3.5), DomainError);
  EXPECT_THROW(integral_I(3, 1.0, 0.0, 3.0, 0.1), DivergentIntegrand);
}

TEST(Envelope, SupercriticalFormula) {
  Envelope e = envelope_I(3, 2.0, 1.0, 2.0);
  // r^{N-alpha-gamma} log^beta(2e/r) at r = 1/10
  EXPECT_NEAR(e(0.1), 10.0 * std::log(20.0 * M_E), 1e-12);
  Envelope e0 = envelope_I(3, 2.0, 0.0, 2.5);
  for (double r : {0.3, 1e-2, 1e-5}) EXPECT_NEAR(e0(r) * std::pow(r, 2.0 + 2.5 - 3.0), 1.0, 1e-13);
}

TEST(Envelope, CriticalAndSubcriticalBranches) {
  EXPECT_DOUBLE_EQ(envelope_I(3, 1.0, -2.0, 2.0)(0.01), 1.0);
  EXPECT_DOUBLE_EQ(envelope_I(3, 1.0, 0.0, 1.0)(0.01), 1.0);
  EXPECT_NEAR(envelope_I(3, 1.0, 0.5, 2.0)(0.01), std::pow(std::log(200.0 * M_E), 1.5), 1e-12);
  EXPECT_NEAR(envelope_I(3, 1.0, -1.0, 2.0)(0.01), std::log(std::log(200.0 * M_E)), 1e-14);
}

TEST(Envelope, PositiveAndContinuous) {
  for (auto [a, b, g] : std::vector<std::tuple<double, double, double>>{
           {2, 0, 2.5}, {1, 0, 2}, {1, -1, 2}, {1, -2, 2}, {1, 0, 1}, {2, 3, 2}, {2, -3, 2}}) {
    Envelope e = envelope_I(3, a, b, g);
    double prev = e(1.0 / 3.0);
    for (int i = 1; i <= 2000; ++i) {
      double r = (1.0 / 3.0) * std::pow(1e-4 * 3.0, i / 2000.0);
      double v = e(r);
      ASSERT_GT(v, 0.0);
      ASSERT_LT(std::fabs(v - prev), 0.05 * std::max(v, prev));
      prev = v;
    }
  }
}

TEST(Envelope, JIsBoundedConstant) {
  Envelope e = envelope_J(2, 1.0, -2.0, 3.0);
  EXPECT_DOUBLE_EQ(e(0.5), 1.0);
  EXPECT_THROW(envelope_J(3, 3.0, 0.0, 1.0), DomainError);
  EXPECT_THROW(envelope_J(3, 1.0, 0.0, -1.0), DomainError);
}

TEST(Audit, ConstantDataHasUnitSpread) {
  std::vector<AuditSample> s{{0.1, 2.0}, {0.01, 2.0}, {0.001, 2.0}};
  auto sm = audit_two_sided(s, Envelope{"one"});
  EXPECT_DOUBLE_EQ(sm.spread, 1.0);
  EXPECT_TRUE(sm.bounded(1.5));
  EXPECT_THROW(audit_two_sided({}, Envelope{"one"}), DomainError);
}

TEST(Audit, SupercriticalMatchedAndMismatched) {
  std::vector<double> radii{1e-1, 1e-2, 1e-3, 1e-4};
  auto audit = run_regime_audit(3, 2.0, 0.0, 2.0, radii);
  EXPECT_EQ(audit.regime, Regime::Supercritical);
  EXPECT_LT(audit.summary.spread, 50.0);
  // the subcritical envelope fed with supercritical data: ratio grows like 1/r
  std::vector<AuditSample> samples;
  for (const auto& row : audit.rows) samples.push_back({row.r, row.value});
  for (std::size_t i = 1; i < samples.size(); ++i) EXPECT_GT(samples[i].value / samples[i - 1].value, 10.0);
  EXPECT_GT(audit_two_sided(samples, envelope_I(3, 1.0, 0.0, 1.0)).spread, 1e3);
}

TEST(Audit, FiveRegimesStayBounded) {
  std::vector<double> radii{1e-1, 1e-2, 1e-3};
  for (auto [a, b, g] : std::vector<std::tuple<double, double, double>>{
           {2, 0, 2.5}, {1, 0, 2}, {1, -1, 2}, {1, -2, 2}, {1, 0, 1}}) {
    auto audit = run_regime_audit(3, a, b, g, radii);
    EXPECT_LT(audit.summary.spread, 50.0) << regime_name(audit.regime);
    EXPECT_EQ(audit.rows.size(), radii.size());
  }
}

TEST(Audit, RadiiOutsideTheLemmaRangeAreRefused) {
  EXPECT_THROW(run_regime_audit(3, 1.0, 0.0, 1.0, {0.5}), DomainError);
}

TEST(IntegralJ, TwoDimensionalSpread) {
  double lo = 1e300, hi = 0.0;
  for (double r : {1e-1, 1e-3})
    for (double rho : {0.0, 0.2}) {
      double v = integral_J(2, 1.0, -2.0, 3.0, r, rho);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  EXPECT_LT(hi / lo, 20.0);
}

TEST(IntegralJ, UnitKernelGivesShellVolume) {
  double lo = 1e300, hi = 0.0;
  for (double rho : {0.0, 0.1, 0.2, 1.0 / 3.0}) {
    double v = integral_J(3, 0.0, 0.0, 0.0, 0.05, rho);
    EXPECT_NEAR(v, 4.0 * M_PI / 3.0 * (1.0 - rho * rho * rho), 1e-8);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_LT(hi / lo, 1.04);
}

TEST(Psi, Branches) {
  EXPECT_DOUBLE_EQ(psi_profile(3, 1.0, 0.0, 1.0, 1.0)(0.01), 100.0);
  Envelope e = psi_profile(3, 1.0, -1.0, 2.0, 1.0);
  EXPECT_NEAR(e(0.01), 100.0 * std::log(std::log(200.0 * M_E)), 1e-10);
  EXPECT_NEAR(psi_profile(3, 1.0, 0.0, 3.0, 1.0)(0.1), 100.0, 1e-10);
  EXPECT_NEAR(psi_profile(3, 1.0, 0.5, 2.0, 1.0)(0.1), 10.0 * std::pow(std::log(20 * M_E), 1.5), 1e-10);
  EXPECT_NEAR(psi_profile(3, 1.0, -2.0, 2.0, 1.0)(0.1), 10.0, 1e-12);
  EXPECT_THROW(psi_profile(2, 1.0, 0.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(psi_profile(3, 1.0, 0.0, 0.0, 1.0), DomainError);
}

TEST(Psi, BranchSelectionByRecomputation) {
  const int N = 3;
  const double alpha = 1.0, q = 1.5;
  for (double p : {0.5, 1.0, 2.0, 2.5, 3.5})
    for (double beta : {-2.0, -1.0, 0.0, 1.0}) {
      Envelope e = psi_profile(N, alpha, beta, p, q);
      double pstar = (N - alpha) / (N - 2.0);
      double r = 0.01, L = std::log(2 * M_E / r);
      double want = std::pow(r, -q * (N - 2));
      if (p == pstar && beta == -1.0) want *= std::log(L);
      if (p == pstar && beta > -1.0) want *= std::pow(L, 1 + beta);
      if (p > pstar) want = std::pow(r, N - alpha - (p + q) * (N - 2)) * std::pow(L, beta);
      EXPECT_NEAR(e(r), want, 1e-12 * want) << "p=" << p << " beta=" << beta;
    }
}

TEST(Holder, ConstantDensityHasStableModulus) {
  KernelParams kp{3, 1.0, 0.0};
  auto probe = holder_modulus_probe(kp, [](double) { return 1.0; }, SingExp{}, 2.0, 16);
  EXPECT_EQ(probe.ratios.size(), 16u);
  EXPECT_TRUE(std::isfinite(probe.sup_ratio));
  EXPECT_LT(probe.sup_drift(), 2.0);
}

TEST(Holder, SingularDensityHasFiniteSupremum) {
  KernelParams kp{3, 1.0, 0.0};
  auto probe = holder_modulus_probe(kp, [](double s) { return 1.0 / s; }, SingExp{1.0, 0.0}, 2.0, 16);
  EXPECT_TRUE(std::isfinite(probe.sup_ratio));
  EXPECT_GT(probe.sup_ratio, 0.0);
  EXPECT_LT(probe.sup_drift(), 2.0);
}

TEST(Holder, CoincidentPointsHaveZeroDifference) {
  KernelParams kp{3, 1.0, 0.0};
  auto f = [](double s) { return 1.0 / s; };
  double a = convolve_radial(kp, f, SingExp{1.0, 0.0}, 0.4, 0.0);
  double b = convolve_radial(kp, f, SingExp{1.0, 0.0}, 0.4, 0.0);
  EXPECT_EQ(a - b, 0.0);
}

TEST(Holder, WindowPreconditions) {
  KernelParams kp{3, 1.0, 0.0};
  auto one = [](double) { return 1.0; };
  EXPECT_THROW(holder_modulus_probe(kp, one, SingExp{}, 1.0, 4), DomainError);
  EXPECT_THROW(holder_modulus_probe(kp, one, SingExp{}, 1.2, 4), DomainError);  // N/s' = 0.5 < alpha
  EXPECT_THROW(holder_modulus_probe(kp, one, SingExp{}, 2.0, 0), DomainError);
}

TEST(CriticalComparison, Tolerance) {
  EXPECT_EQ(compare_critical(1.0 + 1e-12, 1.0), 0);
  EXPECT_EQ(compare_critical(1.0 + 1e-6, 1.0), 1);
  EXPECT_EQ(compare_critical(-1.0 - 1e-6, -1.0), -1);
}
