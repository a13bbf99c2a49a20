#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "trunc_ellipse/polar.hpp"

using namespace trunc_ellipse;

namespace {

constexpr double kPi = std::numbers::pi;

// E[f(Psi)] for Psi uniform on (psi*, pi/2), by adaptive quadrature
template <class F>
double psi_mean(double rho, F f) {
  const double lo = std::atan(-rho / std::sqrt(1 - rho * rho));
  const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, kPi / 2, 20, 1e-15);
  return v / (kPi / 2 - lo);
}

}  // namespace

TEST(Polar, PsiStar) {
  EXPECT_EQ(psi_star(0.0), 0.0);
  EXPECT_NEAR(psi_star(-1 / std::sqrt(2.0)), kPi / 4, 1e-15);
  EXPECT_NEAR(psi_star(0.5), -kPi / 6, 1e-15);
  EXPECT_THROW(psi_star(1.0), DomainError);
  EXPECT_THROW(psi_star(-1.5), DomainError);
}

TEST(Polar, HFunctionConstants) {
  const HValues h0 = h_functions(0.0);
  EXPECT_NEAR(h0.h1, 1 / kPi, 1e-12);
  EXPECT_NEAR(h0.h2, 2 / kPi, 1e-12);
  EXPECT_NEAR(h0.h3, 2 / kPi, 1e-12);
  const HValues h = h_functions(-1 / std::sqrt(2.0));
  EXPECT_NEAR(h.h1, std::sqrt(2.0) * (4 - kPi) / (4 * kPi), 1e-12);
  EXPECT_THROW(h_functions(1.0), DomainError);
}

TEST(Polar, HFunctionsMatchQuadrature) {
  for (int i = 0; i < 100; ++i) {
    const double rho = -0.99 + 1.98 * i / 99.0;
    const double s = std::sqrt(1 - rho * rho);
    const HValues h = h_functions(rho);
    const double h1 = psi_mean(rho, [&](double x) { return rho * std::cos(x) * std::cos(x) + s * std::sin(x) * std::cos(x); });
    const double h2 = psi_mean(rho, [&](double x) { return std::cos(x); });
    const double h3 = psi_mean(rho, [&](double x) { return rho * std::cos(x) + s * std::sin(x); });
    EXPECT_NEAR(h.h1, h1, 1e-12) << rho;
    EXPECT_NEAR(h.h2, h2, 1e-12) << rho;
    EXPECT_NEAR(h.h3, h3, 1e-12) << rho;
  }
}

TEST(Polar, RadialMomentRatios) {
  EXPECT_NEAR(radial_moments(GeneratorSpec::normal()).ratio_b, 4 / kPi, 1e-12);
  EXPECT_NEAR(radial_moments(GeneratorSpec::student_t(4)).ratio_b, 16 / (kPi * kPi), 1e-12);
  for (double tau : {2.5, 3.0, 7.0, 30.0}) {
    const double expect = 4 * std::tgamma(tau / 2) * std::tgamma((tau - 2) / 2) /
                          (kPi * std::pow(std::tgamma((tau - 1) / 2), 2));
    EXPECT_NEAR(radial_moments(GeneratorSpec::student_t(tau)).ratio_b, expect, 1e-12 * expect) << tau;
  }
  for (double k : {1.0, 2.275, 5.0}) EXPECT_NEAR(radial_moments(GeneratorSpec::gamma_radial(k)).ratio_b, (k + 1) / k, 1e-13);
  EXPECT_NEAR(radial_moments(GeneratorSpec::gamma_radial(2.275)).ratio_b, 1.4395604395604, 1e-12);
  EXPECT_THROW(radial_moments(GeneratorSpec::student_t(2.0)), DomainError);
  EXPECT_THROW(radial_moments(GeneratorSpec::student_t(1.5)), DomainError);
}

TEST(Polar, AnalyticMomentsMatchNumericIntegration) {
  const std::vector<GeneratorSpec> gens{GeneratorSpec::normal(), GeneratorSpec::student_t(5),
                                        GeneratorSpec::kotz(2.0, 0.8, 0.7), GeneratorSpec::gamma_radial(2.275, 1.3)};
  for (const auto& g : gens) {
    const RadialMoments m = radial_moments(g);
    const GeneratorSpec bound = g.with_dimension(2);
    EXPECT_NEAR(m.e_r, radial_moment_numeric(bound, 2, 1.0), 1e-8 * m.e_r) << g.describe();
    EXPECT_NEAR(m.e_r2, radial_moment_numeric(bound, 2, 2.0), 1e-8 * m.e_r2) << g.describe();
    EXPECT_GE(m.ratio_b, 1.0);
  }
}

TEST(Polar, TabulatedUsesNumericMoments) {
  // tabulated exp(-t/2) reproduces the normal ratio up to interpolation error
  std::vector<double> t, g;
  for (int i = 0; i <= 400; ++i) {
    t.push_back(i * 0.1);
    g.push_back(std::exp(-0.05 * i));
  }
  const RadialMoments m = radial_moments(GeneratorSpec::tabulated(t, g));
  EXPECT_NEAR(m.ratio_b, 4 / kPi, 1e-5);
}

TEST(Polar, StudentTRatioDecreasesToNormal) {
  double prev = kInf;
  for (double tau : {2.2, 2.5, 3.0, 4.0, 6.0, 10.0, 20.0, 50.0, 100.0, 1000.0}) {
    const double b = radial_moments(GeneratorSpec::student_t(tau)).ratio_b;
    EXPECT_LT(b, prev) << tau;
    EXPECT_GT(b, 4 / kPi) << tau;
    prev = b;
  }
  EXPECT_NEAR(prev, 4 / kPi, 1e-3);
}

TEST(Polar, TruncatedCovariance) {
  EXPECT_NEAR(truncated_cov_at_mean(GeneratorSpec::normal(), 0.0), 0.0, 1e-12);
  for (double tau : {2.5, 3.0, 5.0, 20.0, 100.0}) EXPECT_GT(truncated_cov_at_mean(GeneratorSpec::student_t(tau), 0.0), 0.0) << tau;
  // the normal keeps a positive covariance for positive rho
  EXPECT_GT(truncated_cov_at_mean(GeneratorSpec::normal(), 0.5), 0.0);
}

TEST(Polar, ZeroCorrelationConstruction) {
  const double rho = -1 / std::sqrt(2.0);
  const ZeroCorrSolution z = solve_zero_corr(rho);
  EXPECT_NEAR(z.b_required, 16 * (3 * std::sqrt(2.0) - 4) / (kPi * (4 - kPi)), 1e-12);
  EXPECT_NEAR(z.b_required, 1.44, 5e-3);
  EXPECT_TRUE(z.gamma_feasible);
  EXPECT_NEAR(z.gamma_shape, 2.27, 5e-3);
  EXPECT_NEAR(truncated_cov_at_mean(GeneratorSpec::gamma_radial(z.gamma_shape), rho), 0.0, 1e-12);

  const ZeroCorrSolution z0 = solve_zero_corr(0.0);
  EXPECT_NEAR(z0.b_required, 4 / kPi, 1e-12);
  EXPECT_NEAR(z0.gamma_shape, 1 / (4 / kPi - 1), 1e-9);
  EXPECT_THROW(solve_zero_corr(1.0), DomainError);
}

TEST(Polar, ZeroCorrInfeasibleForStrongPositiveCorrelation) {
  // b < 1 is impossible for any radial law (Cauchy-Schwarz), so no generator decorrelates
  for (double rho : {0.9, 0.99}) {
    const ZeroCorrSolution z = solve_zero_corr(rho);
    EXPECT_LT(z.b_required, 1.0) << rho;
    EXPECT_FALSE(z.gamma_feasible);
    EXPECT_TRUE(std::isnan(z.gamma_shape));
  }
  for (double rho : {-0.99, -0.5, 0.5}) {
    const ZeroCorrSolution z = solve_zero_corr(rho);
    ASSERT_TRUE(z.gamma_feasible) << rho;
    EXPECT_NEAR(truncated_cov_at_mean(GeneratorSpec::gamma_radial(z.gamma_shape), rho), 0.0, 1e-12) << rho;
  }
}
