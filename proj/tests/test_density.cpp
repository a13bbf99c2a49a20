#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "trunc_ellipse/density.hpp"

using namespace trunc_ellipse;
using boost::math::quadrature::gauss_kronrod;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Matrix random_spd(int p, std::mt19937_64& gen) {
  std::normal_distribution<double> z;
  Matrix a(p, p);
  for (int i = 0; i < p * p; ++i) a(i) = z(gen);
  return a * a.transpose() + 0.1 * Matrix::Identity(p, p);
}

template <class F>
double gk(F f, double a, double b, double tol = 1e-12) {
  return gauss_kronrod<double, 31>::integrate(f, a, b, 20, tol);
}

}  // namespace

TEST(QuadForm, MatchesExplicitInverse) {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 200; ++rep) {
    const int p = 1 + rep % 6;
    const Matrix s = random_spd(p, gen);
    Vector mu(p), w(p);
    for (int i = 0; i < p; ++i) {
      mu(i) = z(gen);
      w(i) = z(gen);
    }
    const auto m = build_model(mu, s, Vector::Constant(p, -kInf), GeneratorSpec::normal());
    const double expect = (w - mu).dot(s.inverse() * (w - mu));
    EXPECT_NEAR(quad_form(m, w), expect, 1e-9 * std::max(1.0, expect));
  }
}

TEST(QuadForm, DecompositionIsAdditive) {
  std::mt19937_64 gen(12);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 1000; ++rep) {
    const int p = 2 + rep % 5;
    const int p1 = 1 + rep % (p - 1);
    const Matrix s = random_spd(p, gen);
    Vector mu(p), w(p);
    for (int i = 0; i < p; ++i) {
      mu(i) = z(gen);
      w(i) = z(gen);
    }
    const auto m = build_model(mu, s, Vector::Constant(p, -kInf), GeneratorSpec::normal());
    const auto part = partition(m, p1);
    const auto d = decompose_quad(m, part, w.head(p1), w.tail(p - p1));
    EXPECT_NEAR(d.q_full, d.q1 + d.q2, 1e-9 * std::max(1.0, d.q_full)) << rep;
    // conditional mean oracle: mu2 + S21 S11^-1 (w1 - mu1)
    const Matrix s11 = s.topLeftCorner(p1, p1), s21 = s.bottomLeftCorner(p - p1, p1);
    const Vector cm = mu.tail(p - p1) + s21 * s11.inverse() * (w.head(p1) - mu.head(p1));
    EXPECT_LT((d.cond_mean_shift - cm).norm(), 1e-8 * std::max(1.0, cm.norm()));
  }
}

TEST(LogPdf, BivariateOrthantAtOrigin) {
  const auto m = build_model(vec({0, 0}), Matrix::Identity(2, 2), vec({0, 0}), GeneratorSpec::normal());
  EXPECT_NEAR(log_pdf(m, vec({0, 0})), std::log(2.0 / std::numbers::pi), 1e-12);
  EXPECT_NEAR(log_pdf(m, vec({0, 0})), -0.451582705289, 1e-12);
  EXPECT_EQ(log_pdf(m, vec({-1e-12, 1})), -kInf);
  EXPECT_EQ(pdf(m, vec({1, -3})), 0.0);
  EXPECT_TRUE(in_support(m, vec({0, 0})));
  EXPECT_THROW(log_pdf(m, vec({0, 0, 0})), DomainError);
}

TEST(LogPdf, HalfNormal) {
  const auto m = build_model(vec({0}), Matrix::Identity(1, 1), vec({0}), GeneratorSpec::normal());
  EXPECT_NEAR(log_pdf(m, vec({0})), 0.5 * std::log(2.0 / std::numbers::pi), 1e-13);
  EXPECT_NEAR(log_pdf(m, vec({1.3})), 0.5 * std::log(2.0 / std::numbers::pi) - 0.5 * 1.69, 1e-13);
}

TEST(LogPdf, IntegratesToOne) {
  const std::vector<GeneratorSpec> gens{GeneratorSpec::normal(), GeneratorSpec::student_t(3),
                                        GeneratorSpec::kotz(2, 0.7, 1.0), GeneratorSpec::gamma_radial(2.5, 0.8)};
  for (const auto& g : gens) {
    const auto m = build_model(vec({0.5, -1}), bivariate_sigma(1.2, 0.8, 0.5), vec({0.3, -1.4}), g);
    auto inner = [&](double w1) {
      return gk([&](double w2) { return pdf(m, vec({w1, w2})); }, -1.4, kInf, 1e-11);
    };
    EXPECT_NEAR(gk(inner, 0.3, kInf, 1e-10), 1.0, 1e-7) << g.describe();
  }
}

TEST(GradLogPdf, FiniteDifferences) {
  const std::vector<GeneratorSpec> gens{GeneratorSpec::normal(), GeneratorSpec::student_t(4),
                                        GeneratorSpec::kotz(1.5, 0.5, 0.8), GeneratorSpec::gamma_radial(3.0)};
  std::mt19937_64 gen(13);
  for (const auto& g : gens) {
    const Matrix s = random_spd(3, gen);
    const auto m = build_model(vec({0.1, 0.2, -0.3}), s, Vector::Constant(3, -kInf), g);
    const Vector w = vec({0.7, -0.4, 0.9});
    const Vector grad = grad_log_pdf(m, w);
    for (int i = 0; i < 3; ++i) {
      const double h = 1e-6;
      Vector a = w, b = w;
      a(i) += h;
      b(i) -= h;
      EXPECT_NEAR(grad(i), (log_pdf(m, a) - log_pdf(m, b)) / (2 * h), 1e-6 * std::max(1.0, std::abs(grad(i))))
          << g.describe() << " i=" << i;
    }
  }
}

TEST(Marginal, MatchesOneDimensionalQuadrature) {
  for (double rho : {-0.7, 0.0, 0.4, 0.9}) {
    const auto m = build_model(vec({1, 2}), bivariate_sigma(1.5, 0.7, rho), vec({0.5, 1.8}), GeneratorSpec::normal());
    const auto part = partition(m, 1);
    for (double w1 : {0.5, 0.9, 1.7, 3.5}) {
      const double oracle = gk([&](double w2) { return pdf(m, vec({w1, w2})); }, 1.8, kInf, 1e-13);
      EXPECT_NEAR(marginal_pdf_w1(m, part, vec({w1})), oracle, 1e-8 * oracle) << rho << " " << w1;
    }
    EXPECT_EQ(marginal_pdf_w1(m, part, vec({0.4})), 0.0);
    const double total = gk([&](double w1) { return marginal_pdf_w1(m, part, vec({w1})); }, 0.5, kInf, 1e-11);
    EXPECT_NEAR(total, 1.0, 1e-8);
  }
}

TEST(Marginal, TrivariateIntegratesToOne) {
  Matrix s(3, 3);
  s << 1, 0.3, 0.5, 0.3, 2, -0.4, 0.5, -0.4, 1.5;
  const auto m = build_model(vec({0, 0, 0}), s, vec({-0.5, 0.2, -1}), GeneratorSpec::normal());
  const auto part = partition(m, 1);
  const double total = gk([&](double w1) { return marginal_pdf_w1(m, part, vec({w1})); }, -0.5, kInf, 1e-10);
  EXPECT_NEAR(total, 1.0, 1e-8);
}

TEST(Conditional, IsJointOverMarginalAndNormalized) {
  const auto m = build_model(vec({0, 0}), bivariate_sigma(1, 1, 0.6), vec({-0.3, 0.2}), GeneratorSpec::normal());
  const auto part = partition(m, 1);
  for (double w1 : {-0.3, 0.4, 2.0}) {
    const double total =
        gk([&](double w2) { return conditional_pdf_w2_given_w1(m, part, vec({w1}), vec({w2})); }, 0.2, kInf);
    EXPECT_NEAR(total, 1.0, 1e-10);
    for (double w2 : {0.2, 0.9, 2.5}) {
      const double ratio = pdf(m, vec({w1, w2})) / marginal_pdf_w1(m, part, vec({w1}));
      EXPECT_NEAR(conditional_pdf_w2_given_w1(m, part, vec({w1}), vec({w2})), ratio, 1e-10 * ratio);
    }
  }
  EXPECT_EQ(conditional_pdf_w2_given_w1(m, part, vec({0.0}), vec({0.1})), 0.0);
  EXPECT_THROW(conditional_pdf_w2_given_w1(m, part, vec({-1.0}), vec({0.5})), DomainError);
}

TEST(Conditional, BlockDiagonalFactorizes) {
  Matrix s = Matrix::Zero(3, 3);
  s(0, 0) = 2.0;
  s.bottomRightCorner(2, 2) = bivariate_sigma(1, 1.5, -0.5);
  const auto m = build_model(vec({0.3, -0.2, 0.1}), s, vec({0.0, -0.5, 0.4}), GeneratorSpec::normal());
  const auto part = partition(m, 1);
  const Vector w2 = vec({0.1, 1.3});
  const double c_at_a = conditional_pdf_w2_given_w1(m, part, vec({0.2}), w2);
  const double c_at_b = conditional_pdf_w2_given_w1(m, part, vec({3.0}), w2);
  EXPECT_NEAR(c_at_a, c_at_b, 1e-13 * c_at_a);
  for (double w1 : {0.2, 1.1}) {
    const Vector w = vec({w1, w2(0), w2(1)});
    const double product = marginal_pdf_w1(m, part, vec({w1})) * c_at_a;
    EXPECT_NEAR(pdf(m, w), product, 1e-10 * product);
  }
}

TEST(Marginal, NonNormalUnsupported) {
  const auto m = build_model(vec({0, 0}), Matrix::Identity(2, 2), vec({0, 0}), GeneratorSpec::student_t(5));
  const auto part = partition(m, 1);
  EXPECT_THROW(marginal_pdf_w1(m, part, vec({0.5})), UnsupportedOperation);
  EXPECT_THROW(conditional_pdf_w2_given_w1(m, part, vec({0.5}), vec({0.5})), UnsupportedOperation);
}
