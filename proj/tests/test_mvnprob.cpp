#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "trunc_ellipse/mvnprob.hpp"
#include "trunc_ellipse/radial.hpp"

using namespace trunc_ellipse;
using boost::math::quadrature::gauss_kronrod;

namespace {

constexpr double kPi = std::numbers::pi;

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Matrix equicorrelated(int p, double rho) {
  Matrix s = Matrix::Constant(p, p, rho);
  s.diagonal().setOnes();
  return s;
}

// Plackett: d/drho P(X1 <= b1, X2 <= b2) = phi2(b1, b2; rho)
double bivariate_cdf_oracle(double b1, double b2, double rho) {
  auto phi2 = [&](double r) {
    const double d = 1.0 - r * r;
    return std::exp(-(b1 * b1 - 2 * r * b1 * b2 + b2 * b2) / (2 * d)) / (2 * kPi * std::sqrt(d));
  };
  const double base = normal_cdf(b1) * normal_cdf(b2);
  return base + gauss_kronrod<double, 31>::integrate(phi2, 0.0, rho, 15, 1e-14);
}

}  // namespace

TEST(RectProb, Univariate) {
  const auto r = rect_prob(vec({0}), Matrix::Identity(1, 1), vec({0}));
  EXPECT_EQ(r.method, RectMethod::closed_form_1d);
  EXPECT_NEAR(r.value, 0.5, 1e-15);
  EXPECT_NEAR(rect_prob(vec({1}), 4 * Matrix::Identity(1, 1), vec({-2})).value, normal_cdf(1.5), 1e-15);
}

TEST(RectProb, BivariateOrthants) {
  EXPECT_NEAR(rect_prob(vec({0, 0}), Matrix::Identity(2, 2), vec({0, 0})).value, 0.25, 1e-10);
  const auto r = rect_prob(vec({0, 0}), equicorrelated(2, 0.5), vec({0, 0}));
  EXPECT_EQ(r.method, RectMethod::quadrature_2d_3d);
  EXPECT_NEAR(r.value, 1.0 / 3.0, 1e-10);
  EXPECT_TRUE(r.accuracy_met);
  for (double rho : {-0.95, -0.5, 0.2, 0.9, 0.99})
    EXPECT_NEAR(rect_prob(vec({0, 0}), equicorrelated(2, rho), vec({0, 0})).value,
                0.25 + std::asin(rho) / (2 * kPi), 1e-10)
        << rho;
}

TEST(RectProb, BivariateGeneralBoundsMatchPlackett) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-2.5, 2.5), ur(-0.95, 0.95), us(0.5, 2.0);
  for (int rep = 0; rep < 40; ++rep) {
    const double s1 = us(gen), s2 = us(gen), rho = ur(gen);
    const Vector mean = vec({u(gen), u(gen)});
    const Vector lower = vec({u(gen), u(gen)});
    const Matrix sigma = (Matrix(2, 2) << s1 * s1, rho * s1 * s2, rho * s1 * s2, s2 * s2).finished();
    // P(X >= lower) = P(-X <= -lower), standardized
    const double b1 = (mean(0) - lower(0)) / s1, b2 = (mean(1) - lower(1)) / s2;
    EXPECT_NEAR(rect_prob(mean, sigma, lower).value, bivariate_cdf_oracle(b1, b2, rho), 1e-10);
  }
}

TEST(RectProb, TrivariateOrthantFormula) {
  Matrix s(3, 3);
  s << 1, 0.3, -0.4, 0.3, 1, 0.6, -0.4, 0.6, 1;
  const double expect = 0.125 + (std::asin(0.3) + std::asin(-0.4) + std::asin(0.6)) / (4 * kPi);
  const auto r = rect_prob(Vector::Zero(3), s, Vector::Zero(3));
  EXPECT_NEAR(r.value, expect, 1e-10);
  EXPECT_LE(r.abs_error_estimate, 1e-10);
}

TEST(RectProb, QmcFourDimensionalEquicorrelated) {
  const auto r = rect_prob(Vector::Zero(4), equicorrelated(4, 0.5), Vector::Zero(4));
  EXPECT_EQ(r.method, RectMethod::qmc);
  EXPECT_TRUE(r.accuracy_met);
  EXPECT_LE(r.abs_error_estimate, 1e-6);
  EXPECT_NEAR(r.value, 0.2, 3e-6);
}

TEST(RectProb, QmcAgreesWithQuadratureInThreeDimensions) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    Matrix a(3, 3);
    for (int i = 0; i < 9; ++i) a(i) = u(gen);
    const Matrix s = a * a.transpose() + 0.3 * Matrix::Identity(3, 3);
    const Vector lower = vec({u(gen), u(gen), u(gen)});
    RectProbOptions q;
    q.force_qmc = true;
    q.seed = 5;
    const double vq = rect_prob(Vector::Zero(3), s, lower, q).value;
    const double vd = rect_prob(Vector::Zero(3), s, lower).value;
    EXPECT_NEAR(vq, vd, 1e-5);
  }
}

TEST(RectProb, MonotoneInLowerBounds) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int p : {2, 3}) {
    for (int rep = 0; rep < 20; ++rep) {
      Matrix a(p, p);
      for (int i = 0; i < p * p; ++i) a(i) = u(gen);
      const Matrix s = a * a.transpose() + 0.2 * Matrix::Identity(p, p);
      Vector lower(p);
      for (int i = 0; i < p; ++i) lower(i) = u(gen);
      const double base = rect_prob(Vector::Zero(p), s, lower).value;
      for (int i = 0; i < p; ++i) {
        Vector raised = lower;
        raised(i) += 0.3;
        EXPECT_LE(rect_prob(Vector::Zero(p), s, raised).value, base + 1e-12);
      }
    }
  }
}

TEST(RectProb, BlockDiagonalFactorizes) {
  Matrix s = Matrix::Zero(4, 4);
  s.topLeftCorner(2, 2) = equicorrelated(2, 0.6);
  s.bottomRightCorner(2, 2) = equicorrelated(2, -0.3);
  const Vector lower = vec({-0.2, 0.1, 0.4, -0.5});
  const auto whole = rect_prob(Vector::Zero(4), s, lower);
  const auto a = rect_prob(Vector::Zero(2), s.topLeftCorner(2, 2), lower.head(2));
  const auto b = rect_prob(Vector::Zero(2), s.bottomRightCorner(2, 2), lower.tail(2));
  const double tol = 3 * (whole.abs_error_estimate + a.abs_error_estimate + b.abs_error_estimate);
  EXPECT_NEAR(whole.value, a.value * b.value, std::max(tol, 1e-12));
}

TEST(RectProb, MinusInfinityMarginalizes) {
  Matrix s(3, 3);
  s << 1, 0.3, 0.2, 0.3, 2, 0.5, 0.2, 0.5, 1.5;
  const Vector lower = vec({0.1, -kInf, -0.4});
  Matrix s2(2, 2);
  s2 << 1, 0.2, 0.2, 1.5;
  EXPECT_NEAR(rect_prob(Vector::Zero(3), s, lower).value, rect_prob(Vector::Zero(2), s2, vec({0.1, -0.4})).value,
              1e-13);
  EXPECT_EQ(rect_prob(Vector::Zero(2), s2, vec({-kInf, -kInf})).value, 1.0);
}

TEST(RectProb, QmcIsDeterministic) {
  RectProbOptions opt;
  opt.seed = 99;
  const auto a = rect_prob(Vector::Zero(5), equicorrelated(5, 0.3), Vector::Constant(5, 0.2), opt);
  const auto b = rect_prob(Vector::Zero(5), equicorrelated(5, 0.3), Vector::Constant(5, 0.2), opt);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.n_evaluations, b.n_evaluations);
}

TEST(RectProb, BudgetExhaustionIsFlagged) {
  RectProbOptions opt;
  opt.max_evaluations = 20000;
  opt.qmc_abs_tol = 1e-12;
  const auto r = rect_prob(Vector::Zero(6), equicorrelated(6, 0.4), Vector::Zero(6), opt);
  EXPECT_FALSE(r.accuracy_met);
  EXPECT_GT(r.value, 0.0);
}

TEST(RectProb, InvalidInput) {
  EXPECT_THROW(rect_prob(Vector::Zero(21), Matrix::Identity(21, 21), Vector::Zero(21)), DomainError);
  EXPECT_THROW(rect_prob(Vector::Zero(2), Matrix::Identity(3, 3), Vector::Zero(2)), DomainError);
  EXPECT_THROW(rect_prob(Vector::Zero(2), (Matrix(2, 2) << 1, 2, 2, 1).finished(), Vector::Zero(2)), DomainError);
}

// ---------------------------------------------------------------- norm_const

TEST(NormConst, UntruncatedUnivariate) {
  const auto m = build_model(vec({0}), Matrix::Identity(1, 1), vec({-kInf}), GeneratorSpec::normal());
  EXPECT_NEAR(norm_const(m), -0.5 * std::log(2 * kPi), 1e-15);
}

TEST(NormConst, BivariateOrthant) {
  const auto m = build_model(vec({0, 0}), Matrix::Identity(2, 2), vec({0, 0}), GeneratorSpec::normal());
  EXPECT_NEAR(norm_const(m), -std::log(2 * kPi / 4), 1e-12);
}

TEST(NormConst, StudentTMatchesCartesianQuadrature) {
  for (double rho : {0.0, 0.5, -0.6}) {
    for (const Vector& c : {vec({1.0, -2.0}), vec({2.0, 0.5}), vec({-kInf, 1.5})}) {
      const Vector mu = vec({1.0, -2.0});
      const Matrix s = (Matrix(2, 2) << 2.0, rho * std::sqrt(2.0) * 0.7, rho * std::sqrt(2.0) * 0.7, 0.49).finished();
      const auto m = build_model(mu, s, c, GeneratorSpec::student_t(4));
      const Matrix inv = s.inverse();
      auto g = [&](double w1, double w2) {
        const double d1 = w1 - mu(0), d2 = w2 - mu(1);
        const double q = inv(0, 0) * d1 * d1 + 2 * inv(0, 1) * d1 * d2 + inv(1, 1) * d2 * d2;
        return std::pow(1 + q / 4, -3.0);
      };
      auto inner = [&](double w1) {
        return gauss_kronrod<double, 31>::integrate([&](double w2) { return g(w1, w2); }, c(1), kInf, 20, 1e-13);
      };
      const double mass = gauss_kronrod<double, 31>::integrate(inner, c(0), kInf, 20, 1e-12);
      EXPECT_NEAR(norm_const(m), -std::log(mass), 1e-6) << "rho=" << rho;
    }
  }
}

TEST(NormConst, KotzNormalEquivalent) {
  for (int p : {2, 3}) {
    const Matrix s = equicorrelated(p, 0.3);
    const Vector c = Vector::LinSpaced(p, -0.5, 0.4);
    const auto mk = build_model(Vector::Zero(p), s, c, GeneratorSpec::kotz(1.0, 0.5, 1.0));
    const auto mn = build_model(Vector::Zero(p), s, c, GeneratorSpec::normal());
    EXPECT_NEAR(norm_const(mk), norm_const(mn), p == 2 ? 1e-9 : 2e-5) << p;
  }
}

TEST(NormConst, StudentTOrthantInThreeDimensions) {
  // Sigma = I, c = mu: by symmetry the orthant holds 1/8 of the total mass
  const double tau = 5.0;
  const auto m = build_model(Vector::Zero(3), Matrix::Identity(3, 3), Vector::Zero(3), GeneratorSpec::student_t(tau));
  const double log_total = std::lgamma(tau / 2) + 1.5 * std::log(tau * kPi) - std::lgamma((tau + 3) / 2);
  EXPECT_NEAR(norm_const(m), -(log_total - std::log(8.0)), 1e-5);
}

TEST(NormConst, StudentTGeneralBoundsMatchScaleMixture) {
  // X = Z / sqrt(S / tau), S ~ chi2(tau): P(X >= a) = E_S[P(Z >= a sqrt(S / tau))]
  const double tau = 3.0;
  Matrix s = equicorrelated(3, 0.3);
  s(0, 2) = s(2, 0) = -0.2;
  const Vector c = vec({-0.5, 0.1, 0.4});
  const auto m = build_model(Vector::Zero(3), s, c, GeneratorSpec::student_t(tau));
  auto chi2_pdf = [&](double x) {
    return std::exp((0.5 * tau - 1) * std::log(x) - 0.5 * x - 0.5 * tau * std::log(2.0) - std::lgamma(0.5 * tau));
  };
  auto integrand = [&](double x) {
    if (!(x > 0)) return 0.0;
    return chi2_pdf(x) * rect_prob(Vector::Zero(3), s, c * std::sqrt(x / tau)).value;
  };
  const double prob = gauss_kronrod<double, 31>::integrate(integrand, 0.0, kInf, 10, 1e-9);
  const double log_total = std::lgamma(tau / 2) + 1.5 * std::log(tau * kPi) - std::lgamma((tau + 3) / 2) +
                           0.5 * std::log(s.determinant());
  EXPECT_NEAR(norm_const(m), -(log_total + std::log(prob)), 1e-4);
}

TEST(NormConst, DivergentGeneratorNamed) {
  const auto m = build_model(Vector::Zero(2), Matrix::Identity(2, 2), Vector::Zero(2), GeneratorSpec::kotz(0.0, 1.0, 1.0));
  try {
    norm_const(m);
    FAIL() << "expected IntegrationError";
  } catch (const IntegrationError& e) {
    EXPECT_NE(std::string(e.what()).find("diverges"), std::string::npos) << e.what();
  }
}

TEST(NormConst, CachedAndSharedAcrossCopies) {
  const auto m = build_model(vec({0, 0}), equicorrelated(2, 0.2), vec({0.1, 0.3}), GeneratorSpec::student_t(3));
  const auto copy = m;
  const double a = norm_const(m);
  EXPECT_EQ(norm_const(copy), a);
  int calls = 0;
  EXPECT_EQ(m.cached_log_norm_const([&](const TruncatedEllipticalModel&) {
    ++calls;
    return 0.0;
  }),
            a);
  EXPECT_EQ(calls, 0);
}

// ---------------------------------------------------------------- radial law

TEST(Radial, NormalBivariateCdfAndQuantile) {
  const RadialDistribution rd(GeneratorSpec::normal(), 2);
  for (double r : {0.1, 0.5, 1.0, 2.0, 4.0}) EXPECT_NEAR(rd.cdf(r), 1 - std::exp(-r * r / 2), 1e-8) << r;
  for (double u : {0.01, 0.3, 0.7, 0.999}) EXPECT_NEAR(rd.quantile(u), std::sqrt(-2 * std::log1p(-u)), 1e-6) << u;
  EXPECT_NEAR(rd.log_normalizer(), 0.0, 1e-10);  // integral of r exp(-r^2/2) is 1
}

TEST(Radial, MomentsAgainstClosedForm) {
  // chi with 3 degrees of freedom: E R = 2 sqrt(2 / pi)
  EXPECT_NEAR(radial_moment_numeric(GeneratorSpec::normal(), 3, 1.0), 2 * std::sqrt(2 / kPi), 1e-9);
  EXPECT_NEAR(radial_moment_numeric(GeneratorSpec::gamma_radial(2.275, 0.5), 2, 2.0), 2.275 * 3.275 * 0.25, 1e-8);
  EXPECT_THROW(radial_moment_numeric(GeneratorSpec::student_t(1.5), 2, 2.0), IntegrationError);
}

TEST(Radial, SpikeTableConcentratesMass) {
  // g supported near t = 4 only: R is close to 2
  const auto gen = GeneratorSpec::tabulated({0.0, 3.9, 4.0, 4.1}, {0.0, 0.0, 1.0, 0.0});
  const RadialDistribution rd(gen, 2);
  EXPECT_EQ(rd.cdf(1.9), 0.0);
  EXPECT_NEAR(rd.cdf(2.03), 1.0, 1e-12);
  for (double u : {0.01, 0.5, 0.99}) {
    EXPECT_GT(rd.quantile(u), std::sqrt(3.9) - 1e-12);
    EXPECT_LT(rd.quantile(u), std::sqrt(4.1) + 1e-12);
  }
}
